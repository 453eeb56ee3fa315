#include <doctest.h>

#include <random>

#include "andlantis/config.hpp"
#include "andlantis/error.hpp"
#include "andlantis/uiexplore.hpp"
#include "harness.hpp"
#include "oracles.hpp"
#include "ui_gen.hpp"

using namespace andlantis;
using namespace andlantis::ui;

namespace {

UiGraph chain3() { return config::load_ui_graph(harness::fixture("ui/chain3.ui.json")); }

std::set<std::pair<std::string, std::string>> stimulated(const InteractionRecord &r) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto &s : r.steps) {
        if (s.is_interaction()) {
            out.insert({s.state_id, s.element_id});
        }
    }
    return out;
}

} // namespace

TEST_CASE("single state with three self-loops") {
    UiGraph g("home", {{"home", {{"a", ElementKind::Clickable}, {"b", ElementKind::Clickable},
                                 {"c", ElementKind::Scrollable}}}},
              {});
    auto r = explore(g, 10);
    CHECK(r.interactions() == 3);
    CHECK(r.coverage.elements_stimulated == 3);
    CHECK(r.coverage.element_fraction() == 1.0);
    for (const auto &s : r.steps) {
        CHECK(s.outcome.kind == OutcomeKind::SelfLoop);
    }
}

TEST_CASE("chain visits all states then backtracks") {
    const auto g = chain3();
    CHECK(oracle::reachable(g).size() == 3);
    auto r = explore(g, 50);
    CHECK(r.coverage.states_visited == 3);
    CHECK(r.coverage.state_fraction() == 1.0);
    CHECK(r.coverage.element_fraction() == 1.0);
    std::vector<std::string> order;
    for (const auto &s : r.steps) {
        if (s.outcome.kind == OutcomeKind::Transition) {
            order.push_back(s.outcome.next);
        }
    }
    CHECK(order == std::vector<std::string>{"s1", "s2"});
    CHECK(r.steps.back().outcome.kind == OutcomeKind::Backtrack);
}

TEST_CASE("budget 1 on a chain: two states seen, one element") {
    auto r = explore(chain3(), 1);
    CHECK(r.interactions() == 1);
    CHECK(r.coverage.states_visited == 2);
    CHECK(r.coverage.states_reachable == 3);
    CHECK(r.coverage.elements_stimulated == 1);
    CHECK(r.coverage.elements_reachable == 4);
}

TEST_CASE("budget 0 gives an empty record") {
    auto r = explore(chain3(), 0);
    CHECK(r.steps.empty());
    CHECK(replay(chain3(), r).empty());
}

TEST_CASE("crash halts exploration") {
    const auto g = config::load_ui_graph(harness::fixture("ui/crash.ui.json"));
    auto r = explore(g, 100);
    CHECK(r.crashed());
    CHECK(r.steps.back().outcome.kind == OutcomeKind::Crash);
    CHECK(replay(g, r).back().kind == OutcomeKind::Crash);
}

TEST_CASE("undeclared transition is a self-loop") {
    const auto g = chain3();
    CHECK(interact(g, "s1", "scroll", 0).kind == OutcomeKind::SelfLoop);
    CHECK_THROWS_AS(interact(g, "s1", "nope", 0), ContractViolation);
}

TEST_CASE("typable transition keyed by input class") {
    const auto g = config::load_ui_graph(harness::fixture("ui/smshider.ui.json"));
    CHECK(interact(g, "register", "field_phone", 1).next == "verified");
    CHECK(interact(g, "register", "field_phone", 0).kind == OutcomeKind::SelfLoop);
    // the default explorer only ever types the first input class
    auto first = explore(g, 20);
    CHECK(first.coverage.states_visited == 2);
    ExploreConfig rr;
    rr.typing = TypingPolicy::RoundRobin;
    rr.inputs = {"abc", "5551234"};
    // round robin types class 1 on the second typable stimulus only; one
    // typable element means class 0 again
    auto second = explore(g, 20, rr);
    CHECK(second.steps.at(1).input_class == 0);
}

TEST_CASE("hook sees every interaction in order") {
    std::vector<std::string> seen;
    auto r = explore(chain3(), 50, {}, [&](const InteractionStep &s) { seen.push_back(s.element_id); });
    CHECK(seen.size() == r.interactions());
}

TEST_CASE("unreachable island excluded from denominators") {
    UiGraph g("a", {{"a", {{"x", ElementKind::Clickable}}}, {"island", {{"y", ElementKind::Clickable}}}}, {});
    auto r = explore(g, 10);
    CHECK(r.coverage.states_reachable == 1);
    CHECK(r.coverage.elements_reachable == 1);
    CHECK(r.coverage.element_fraction() == 1.0);
}

TEST_CASE("random acyclic graphs: full coverage and faithful replay") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = uigen::acyclic(rng, false);
        const auto want = oracle::reachable_elements(g);
        auto r = explore(g, want.size() + 1);
        CHECK(stimulated(r) == want);
        CHECK(r.coverage.element_fraction() == 1.0);
        CHECK(r.coverage.states_visited == oracle::reachable(g).size());
        auto again = InteractionRecord::from_json(r.to_json());
        CHECK(again == r);
        CHECK(again.to_json() == r.to_json());
        CHECK(replay(g, again).size() == r.steps.size());
    }
}

TEST_CASE("single-fault injection: replay diverges at that step") {
    std::mt19937_64 rng(77);
    int checked = 0;
    for (int trial = 0; trial < 300 && checked < 100; ++trial) {
        auto g = uigen::acyclic(rng, true);
        auto r = explore(g, 100);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            if (r.steps[i].is_interaction()) {
                idx.push_back(i);
            }
        }
        if (idx.empty()) {
            continue;
        }
        const std::size_t at = idx[rng() % idx.size()];
        const auto &step = r.steps[at];
        // flip the stimulus to a crash, or a crash to a self-loop
        TransitionKey key{step.state_id, step.element_id, step.input_class};
        auto mutated = g;
        if (step.outcome.kind == OutcomeKind::Crash) {
            mutated.set_transition(key, {false, step.state_id});
        } else {
            mutated.set_transition(key, {true, {}});
        }
        // an earlier step on the same key would diverge first
        std::size_t first = at;
        for (std::size_t i : idx) {
            const auto &s = r.steps[i];
            if (i < first && s.state_id == key.state && s.element_id == key.element) {
                first = i;
            }
        }
        try {
            replay(mutated, r);
            FAIL("replay should diverge");
        } catch (const ReplayMismatch &e) {
            CHECK(e.step() == first);
        }
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("graph json round trip and validation") {
    const auto g = chain3();
    CHECK(UiGraph::from_json(g.to_json()) == g);
    CHECK_THROWS_AS(UiGraph::from_json(R"({"root":"nope","states":[],"transitions":[]})"), ConfigError);
    CHECK_THROWS_AS(UiGraph::from_json("{"), ConfigError);
}
