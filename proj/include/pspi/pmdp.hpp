#pragma once

#include "pspi/polynomial.hpp"
#include "pspi/rational.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pspi {

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

struct Edge {
    std::size_t target = 0;
    Polynomial label;
    bool operator==(const Edge&) const = default;
};

/// One enabled action at a state and its labeled successors (sorted by target).
struct Choice {
    std::size_t action = 0;
    std::vector<Edge> edges;
    bool operator==(const Choice&) const = default;
};

/// Parametric MDP. Rewards are stored densely for every (s,a), enabled or not.
///
/// States flagged `split` are intermediate states inserted by
/// normalize_distinct_labels. An edge into a split state is not discounted,
/// so the two hops through it count as one discounted step.
struct PMdp {
    std::string name = "model";
    std::vector<std::string> states;
    std::vector<std::string> actions;
    std::vector<std::string> params;
    std::size_t initial = 0;
    Rational gamma = Rational(9, 10);
    Rational rmax = 0;
    std::vector<Rational> reward;              // n_states * n_actions
    std::vector<std::vector<Choice>> choices;  // per state, sorted by action
    std::vector<bool> split;                   // per state

    std::size_t n_states() const noexcept { return states.size(); }
    std::size_t n_actions() const noexcept { return actions.size(); }
    const Rational& r(std::size_t s, std::size_t a) const { return reward[s * actions.size() + a]; }
    const Choice* find_choice(std::size_t s, std::size_t a) const;
    bool enabled(std::size_t s, std::size_t a) const { return find_choice(s, a) != nullptr; }
    std::size_t state_index(const std::string& name) const;   // npos when unknown
    std::size_t action_index(const std::string& name) const;  // npos when unknown
    std::size_t n_pairs() const;
    std::size_t n_transitions() const;

    bool operator==(const PMdp&) const = default;
};

/// Checks the structural invariants and throws ModelError on violation.
void validate(const PMdp& m);

/// True iff every labeled transition instantiates to a strictly positive
/// probability (checked in exact arithmetic), no probability exceeds 1 + tol,
/// and every enabled row sums to 1 within tol. Incomplete valuations are not
/// graph-preserving.
bool is_graph_preserving(const PMdp& m, const Valuation& v, double tol = 1e-9);

struct Transition {
    std::size_t target = 0;
    double prob = 0.0;
};

struct MdpChoice {
    std::size_t action = 0;
    std::vector<Transition> next;
};

/// Concrete MDP with the same layout as PMdp. A state may have no enabled
/// action (MLE estimates); such a state is absorbing with value 0.
struct Mdp {
    std::string name = "model";
    std::vector<std::string> states;
    std::vector<std::string> actions;
    std::size_t initial = 0;
    double gamma = 0.9;
    double rmax = 0.0;
    std::vector<double> reward;  // n_states * n_actions
    std::vector<std::vector<MdpChoice>> choices;
    std::vector<bool> split;

    std::size_t n_states() const noexcept { return states.size(); }
    std::size_t n_actions() const noexcept { return actions.size(); }
    double r(std::size_t s, std::size_t a) const { return reward[s * actions.size() + a]; }
    const MdpChoice* find_choice(std::size_t s, std::size_t a) const;
    bool enabled(std::size_t s, std::size_t a) const { return find_choice(s, a) != nullptr; }
    /// Discount applied to an edge entering `target`.
    double discount(std::size_t target) const { return split[target] ? 1.0 : gamma; }
};

/// Throws ValuationError when v is not graph-preserving.
Mdp instantiate(const PMdp& m, const Valuation& v, double tol = 1e-9);

/// Same states, actions, rewards and discount but no transitions.
Mdp skeleton(const PMdp& m);

/// Parameter values as exact rationals (for exact positivity checks).
std::map<std::string, Rational> exact_valuation(const Valuation& v);

/// Routes every group of identically-labeled successors of a pair through a
/// fresh zero-reward split state which uses the same action to move uniformly
/// to the group. Returns the input unchanged when labels are already distinct.
PMdp normalize_distinct_labels(const PMdp& m);

/// True iff no pair at a non-split state has two successors with equal labels.
bool has_distinct_labels(const PMdp& m);

} // namespace pspi
