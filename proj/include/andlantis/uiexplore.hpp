#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace andlantis::ui {

enum class ElementKind { Clickable, Scrollable, Typable };

struct UiElement {
    std::string element_id;
    ElementKind kind = ElementKind::Clickable;

    bool operator==(const UiElement &) const = default;
};

struct UiState {
    std::string state_id;
    std::vector<UiElement> elements; // declared order

    const UiElement *element(std::string_view id) const;
    bool operator==(const UiState &) const = default;
};

struct TransitionKey {
    std::string state;
    std::string element;
    int input_class = 0;

    auto operator<=>(const TransitionKey &) const = default;
};

struct TransitionTarget {
    bool crash = false;
    std::string next; // empty when crash

    bool operator==(const TransitionTarget &) const = default;
};

/// Abstract application UI: states, their elements, and where each
/// (state, element, input class) leads. Missing entries are self-loops.
class UiGraph {
public:
    UiGraph() = default;
    UiGraph(std::string root, std::vector<UiState> states, std::map<TransitionKey, TransitionTarget> transitions);

    static UiGraph from_json(std::string_view text);
    std::string to_json() const;

    const std::string &root() const noexcept { return root_; }
    const std::vector<UiState> &states() const noexcept { return states_; }
    const UiState *state(std::string_view id) const;
    const std::map<TransitionKey, TransitionTarget> &transitions() const noexcept { return transitions_; }
    const TransitionTarget *lookup(const TransitionKey &key) const;

    /// Replace or add one transition (re-validated).
    void set_transition(const TransitionKey &key, const TransitionTarget &target);

    /// States reachable from the root through declared transitions.
    std::set<std::string> reachable_states() const;
    std::size_t reachable_element_count() const;

    bool operator==(const UiGraph &) const = default;

private:
    void validate() const;

    std::string root_;
    std::vector<UiState> states_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::map<TransitionKey, TransitionTarget> transitions_;
};

enum class OutcomeKind { Transition, SelfLoop, Backtrack, Crash };

struct Outcome {
    OutcomeKind kind = OutcomeKind::SelfLoop;
    std::string next; // Transition: target state; Backtrack: state resumed

    std::string str() const;
    bool operator==(const Outcome &) const = default;
};

struct InteractionStep {
    std::string state_id;
    std::string element_id; // empty for backtrack steps
    std::string input;
    int input_class = 0;
    Outcome outcome;

    bool is_interaction() const noexcept { return outcome.kind != OutcomeKind::Backtrack; }
    bool operator==(const InteractionStep &) const = default;
};

struct Coverage {
    std::size_t states_visited = 0;
    std::size_t states_reachable = 0;
    std::size_t elements_stimulated = 0;
    std::size_t elements_reachable = 0;

    double state_fraction() const noexcept;
    double element_fraction() const noexcept;
    bool operator==(const Coverage &) const = default;
};

struct InteractionRecord {
    std::vector<InteractionStep> steps;
    Coverage coverage;

    std::size_t interactions() const noexcept;
    bool crashed() const noexcept { return !steps.empty() && steps.back().outcome.kind == OutcomeKind::Crash; }

    std::string to_json() const;
    static InteractionRecord from_json(std::string_view text);
    bool operator==(const InteractionRecord &) const = default;
};

enum class Ordering { Declared, Reverse };
enum class TypingPolicy { FirstInput, RoundRobin };

struct ExploreConfig {
    std::vector<std::string> inputs{"hello world", "5551234"};
    Ordering ordering = Ordering::Declared;
    TypingPolicy typing = TypingPolicy::FirstInput;
};

/// Called for every interaction (not for backtracks), after its outcome is
/// known. The sandbox binds ON_UI behavior rules through this.
using InteractionHook = std::function<void(const InteractionStep &)>;

/// Look up one stimulus. Throws ContractViolation when the element is not
/// declared in `state_id`.
Outcome interact(const UiGraph &graph, std::string_view state_id, std::string_view element_id, int input_class);

/// Depth-first stimulation: unvisited elements of the current state in
/// order; descend into newly discovered states; backtrack to the previous
/// state when the current one is exhausted. At most `budget` interactions.
InteractionRecord explore(const UiGraph &graph, std::size_t budget, const ExploreConfig &cfg = {},
                          const InteractionHook &hook = {});

/// Re-run a record against `graph`. Throws ReplayMismatch naming the first
/// divergent step.
std::vector<Outcome> replay(const UiGraph &graph, const InteractionRecord &record, const InteractionHook &hook = {});

Coverage coverage(const InteractionRecord &record, const UiGraph &graph);

std::string to_string(ElementKind kind);
std::string to_string(OutcomeKind kind);

} // namespace andlantis::ui
