#include "andlantis/uiexplore.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

#include <json.hpp>

#include "andlantis/error.hpp"

namespace andlantis::ui {

using nlohmann::json;

const UiElement *UiState::element(std::string_view id) const {
    for (const auto &e : elements) {
        if (e.element_id == id) {
            return &e;
        }
    }
    return nullptr;
}

std::string to_string(ElementKind kind) {
    switch (kind) {
    case ElementKind::Clickable:
        return "CLICKABLE";
    case ElementKind::Scrollable:
        return "SCROLLABLE";
    case ElementKind::Typable:
        return "TYPABLE";
    }
    return "CLICKABLE";
}

std::string to_string(OutcomeKind kind) {
    switch (kind) {
    case OutcomeKind::Transition:
        return "transition";
    case OutcomeKind::SelfLoop:
        return "self_loop";
    case OutcomeKind::Backtrack:
        return "backtrack";
    case OutcomeKind::Crash:
        return "crash";
    }
    return "self_loop";
}

namespace {

ElementKind kind_from_string(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "clickable") {
        return ElementKind::Clickable;
    }
    if (s == "scrollable") {
        return ElementKind::Scrollable;
    }
    if (s == "typable") {
        return ElementKind::Typable;
    }
    throw ConfigError("unknown element kind '" + s + "'");
}

OutcomeKind outcome_from_string(const std::string &s) {
    for (auto k : {OutcomeKind::Transition, OutcomeKind::SelfLoop, OutcomeKind::Backtrack, OutcomeKind::Crash}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw ConfigError("unknown outcome kind '" + s + "'");
}

} // namespace

std::string Outcome::str() const {
    std::string s = to_string(kind);
    if (!next.empty()) {
        s += "(" + next + ")";
    }
    return s;
}

UiGraph::UiGraph(std::string root, std::vector<UiState> states, std::map<TransitionKey, TransitionTarget> transitions)
    : root_(std::move(root)), states_(std::move(states)), transitions_(std::move(transitions)) {
    for (std::size_t i = 0; i < states_.size(); ++i) {
        if (!index_.emplace(states_[i].state_id, i).second) {
            throw ConfigError("duplicate state '" + states_[i].state_id + "'");
        }
    }
    validate();
}

void UiGraph::validate() const {
    if (!index_.contains(root_)) {
        throw ConfigError("root state '" + root_ + "' is not declared");
    }
    for (const auto &s : states_) {
        std::set<std::string_view> seen;
        for (const auto &e : s.elements) {
            if (!seen.insert(e.element_id).second) {
                throw ConfigError("duplicate element '" + e.element_id + "' in state '" + s.state_id + "'");
            }
        }
    }
    for (const auto &[key, target] : transitions_) {
        const UiState *from = state(key.state);
        if (from == nullptr) {
            throw ConfigError("transition from unknown state '" + key.state + "'");
        }
        const UiElement *el = from->element(key.element);
        if (el == nullptr) {
            throw ConfigError("transition on unknown element '" + key.element + "' of '" + key.state + "'");
        }
        if (key.input_class < 0 || (el->kind != ElementKind::Typable && key.input_class != 0)) {
            throw ConfigError("bad input_class on '" + key.state + "/" + key.element + "'");
        }
        if (!target.crash && state(target.next) == nullptr) {
            throw ConfigError("transition to unknown state '" + target.next + "'");
        }
    }
}

const UiState *UiGraph::state(std::string_view id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &states_[it->second];
}

const TransitionTarget *UiGraph::lookup(const TransitionKey &key) const {
    auto it = transitions_.find(key);
    return it == transitions_.end() ? nullptr : &it->second;
}

void UiGraph::set_transition(const TransitionKey &key, const TransitionTarget &target) {
    auto saved = transitions_;
    transitions_[key] = target;
    try {
        validate();
    } catch (...) {
        transitions_ = std::move(saved);
        throw;
    }
}

std::set<std::string> UiGraph::reachable_states() const {
    std::set<std::string> seen{root_};
    std::deque<std::string> work{root_};
    while (!work.empty()) {
        std::string cur = std::move(work.front());
        work.pop_front();
        // Transitions are keyed by state first, so this range is contiguous.
        for (auto it = transitions_.lower_bound(TransitionKey{cur, "", 0});
             it != transitions_.end() && it->first.state == cur; ++it) {
            if (!it->second.crash && seen.insert(it->second.next).second) {
                work.push_back(it->second.next);
            }
        }
    }
    return seen;
}

std::size_t UiGraph::reachable_element_count() const {
    std::size_t n = 0;
    for (const auto &id : reachable_states()) {
        n += state(id)->elements.size();
    }
    return n;
}

UiGraph UiGraph::from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        std::vector<UiState> states;
        for (const auto &s : j.at("states")) {
            UiState st{s.at("state_id").get<std::string>(), {}};
            for (const auto &e : s.value("elements", json::array())) {
                st.elements.push_back({e.at("element_id").get<std::string>(),
                                       kind_from_string(e.value("kind", std::string("CLICKABLE")))});
            }
            states.push_back(std::move(st));
        }
        std::map<TransitionKey, TransitionTarget> transitions;
        for (const auto &t : j.value("transitions", json::array())) {
            TransitionKey key{t.at("from").get<std::string>(), t.at("element").get<std::string>(),
                              t.value("input_class", 0)};
            TransitionTarget target;
            target.crash = t.value("crash", false);
            if (!target.crash) {
                target.next = t.at("to").get<std::string>();
            }
            if (!transitions.emplace(key, target).second) {
                throw ConfigError("duplicate transition for '" + key.state + "/" + key.element + "'");
            }
        }
        return UiGraph(j.at("root").get<std::string>(), std::move(states), std::move(transitions));
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed UI graph: ") + e.what());
    }
}

std::string UiGraph::to_json() const {
    json states = json::array();
    for (const auto &s : states_) {
        json els = json::array();
        for (const auto &e : s.elements) {
            els.push_back({{"element_id", e.element_id}, {"kind", to_string(e.kind)}});
        }
        states.push_back({{"state_id", s.state_id}, {"elements", std::move(els)}});
    }
    json transitions = json::array();
    for (const auto &[k, t] : transitions_) {
        json jt{{"from", k.state}, {"element", k.element}, {"input_class", k.input_class}};
        if (t.crash) {
            jt["crash"] = true;
        } else {
            jt["to"] = t.next;
        }
        transitions.push_back(std::move(jt));
    }
    return json{{"root", root_}, {"states", std::move(states)}, {"transitions", std::move(transitions)}}.dump(2) +
           "\n";
}

Outcome interact(const UiGraph &graph, std::string_view state_id, std::string_view element_id, int input_class) {
    const UiState *state = graph.state(state_id);
    if (state == nullptr || state->element(element_id) == nullptr) {
        throw ContractViolation("element '" + std::string(element_id) + "' is not in state '" +
                                std::string(state_id) + "'");
    }
    const TransitionTarget *t =
        graph.lookup(TransitionKey{std::string(state_id), std::string(element_id), input_class});
    if (t == nullptr) {
        return {OutcomeKind::SelfLoop, {}};
    }
    if (t->crash) {
        return {OutcomeKind::Crash, {}};
    }
    if (t->next == state_id) {
        return {OutcomeKind::SelfLoop, {}};
    }
    return {OutcomeKind::Transition, t->next};
}

InteractionRecord explore(const UiGraph &graph, std::size_t budget, const ExploreConfig &cfg,
                          const InteractionHook &hook) {
    InteractionRecord record;
    std::set<std::string> visited_states{graph.root()};
    std::set<std::pair<std::string, std::string>> stimulated;
    std::vector<std::string> stack{graph.root()};
    std::size_t interactions = 0;
    std::size_t typed = 0;

    auto next_element = [&](const UiState &s) -> const UiElement * {
        auto pick = [&](const UiElement &e) { return !stimulated.contains({s.state_id, e.element_id}); };
        if (cfg.ordering == Ordering::Reverse) {
            auto it = std::find_if(s.elements.rbegin(), s.elements.rend(), pick);
            return it == s.elements.rend() ? nullptr : &*it;
        }
        auto it = std::find_if(s.elements.begin(), s.elements.end(), pick);
        return it == s.elements.end() ? nullptr : &*it;
    };

    while (!stack.empty() && interactions < budget) {
        const UiState &cur = *graph.state(stack.back());
        const UiElement *el = next_element(cur);
        if (el == nullptr) {
            std::string done = stack.back();
            stack.pop_back();
            if (!stack.empty()) {
                record.steps.push_back({std::move(done), {}, {}, 0, {OutcomeKind::Backtrack, stack.back()}});
            }
            continue;
        }
        stimulated.insert({cur.state_id, el->element_id});

        InteractionStep step{cur.state_id, el->element_id, {}, 0, {}};
        if (el->kind == ElementKind::Typable && !cfg.inputs.empty()) {
            const std::size_t cls = cfg.typing == TypingPolicy::RoundRobin ? typed % cfg.inputs.size() : 0;
            ++typed;
            step.input_class = static_cast<int>(cls);
            step.input = cfg.inputs[cls];
        }
        step.outcome = interact(graph, cur.state_id, el->element_id, step.input_class);
        ++interactions;
        record.steps.push_back(step);
        if (hook) {
            hook(record.steps.back());
        }
        if (step.outcome.kind == OutcomeKind::Crash) {
            break;
        }
        // A transition into an already-visited state is logically undone:
        // exploration resumes where it was.
        if (step.outcome.kind == OutcomeKind::Transition && visited_states.insert(step.outcome.next).second) {
            stack.push_back(step.outcome.next);
        }
    }
    record.coverage = coverage(record, graph);
    return record;
}

std::vector<Outcome> replay(const UiGraph &graph, const InteractionRecord &record, const InteractionHook &hook) {
    std::vector<Outcome> out;
    out.reserve(record.steps.size());
    for (std::size_t i = 0; i < record.steps.size(); ++i) {
        const auto &step = record.steps[i];
        Outcome got;
        if (!step.is_interaction()) {
            if (graph.state(step.state_id) == nullptr || graph.state(step.outcome.next) == nullptr) {
                throw ReplayMismatch(i, step.outcome.str(), "unknown state");
            }
            got = step.outcome;
        } else {
            const UiState *s = graph.state(step.state_id);
            if (s == nullptr || s->element(step.element_id) == nullptr) {
                throw ReplayMismatch(i, step.outcome.str(), "missing element " + step.element_id);
            }
            got = interact(graph, step.state_id, step.element_id, step.input_class);
            if (got != step.outcome) {
                throw ReplayMismatch(i, step.outcome.str(), got.str());
            }
            if (hook) {
                hook(step);
            }
        }
        out.push_back(std::move(got));
    }
    return out;
}

Coverage coverage(const InteractionRecord &record, const UiGraph &graph) {
    const auto reachable = graph.reachable_states();
    std::set<std::string> visited{graph.root()};
    std::set<std::pair<std::string, std::string>> stimulated;
    for (const auto &step : record.steps) {
        if (!step.is_interaction()) {
            continue;
        }
        if (reachable.contains(step.state_id)) {
            stimulated.insert({step.state_id, step.element_id});
        }
        if (step.outcome.kind == OutcomeKind::Transition && reachable.contains(step.outcome.next)) {
            visited.insert(step.outcome.next);
        }
    }
    Coverage c;
    c.states_visited = visited.size();
    c.states_reachable = reachable.size();
    c.elements_stimulated = stimulated.size();
    c.elements_reachable = graph.reachable_element_count();
    return c;
}

double Coverage::state_fraction() const noexcept {
    return states_reachable == 0 ? 0.0 : static_cast<double>(states_visited) / static_cast<double>(states_reachable);
}

double Coverage::element_fraction() const noexcept {
    return elements_reachable == 0 ? 1.0
                                   : static_cast<double>(elements_stimulated) / static_cast<double>(elements_reachable);
}

std::size_t InteractionRecord::interactions() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const auto &s) { return s.is_interaction(); }));
}

std::string InteractionRecord::to_json() const {
    json steps_j = json::array();
    for (const auto &s : steps) {
        json o{{"kind", to_string(s.outcome.kind)}};
        if (!s.outcome.next.empty()) {
            o["next"] = s.outcome.next;
        }
        steps_j.push_back({{"state_id", s.state_id},
                           {"element_id", s.element_id},
                           {"input", s.input},
                           {"input_class", s.input_class},
                           {"outcome", std::move(o)}});
    }
    json cov{{"states_visited", coverage.states_visited},
             {"states_reachable", coverage.states_reachable},
             {"state_fraction", coverage.state_fraction()},
             {"elements_stimulated", coverage.elements_stimulated},
             {"elements_reachable", coverage.elements_reachable},
             {"element_fraction", coverage.element_fraction()}};
    return json{{"steps", std::move(steps_j)}, {"coverage", std::move(cov)}, {"crash", crashed()}}.dump(2) + "\n";
}

InteractionRecord InteractionRecord::from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        InteractionRecord r;
        for (const auto &s : j.at("steps")) {
            const auto &o = s.at("outcome");
            r.steps.push_back({s.at("state_id").get<std::string>(), s.at("element_id").get<std::string>(),
                               s.value("input", std::string()), s.value("input_class", 0),
                               {outcome_from_string(o.at("kind").get<std::string>()), o.value("next", std::string())}});
        }
        if (j.contains("coverage")) {
            const auto &c = j.at("coverage");
            r.coverage.states_visited = c.at("states_visited").get<std::size_t>();
            r.coverage.states_reachable = c.at("states_reachable").get<std::size_t>();
            r.coverage.elements_stimulated = c.at("elements_stimulated").get<std::size_t>();
            r.coverage.elements_reachable = c.at("elements_reachable").get<std::size_t>();
        }
        return r;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed interaction record: ") + e.what());
    }
}

} // namespace andlantis::ui
