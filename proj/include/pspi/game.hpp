#pragma once

#include "pspi/pmdp.hpp"
#include "pspi/solve.hpp"

#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace pspi {

/// Antagonistic (min over successors) and cooperative (max over successors)
/// values of the support graph. They ignore the labels entirely.
struct GameValues {
    std::vector<double> aval;
    std::vector<double> cval;
    std::size_t iterations = 0;
};

struct GameOptions {
    double tol = 1e-10;
    std::size_t max_iter = 1000000;
};

/// max(1, rmax / (1 - gamma)).
double value_scale(const PMdp& m);
/// Margin separating strict inequalities from the equality band.
double strict_margin(const PMdp& m);

/// Discount of an edge into t (1 into split states).
double edge_discount(const PMdp& m, std::size_t t);

/// Worst and best one-step backups of a pair under the given values.
double min_backup(const PMdp& m, std::size_t s, const Choice& c, const std::vector<double>& v);
double max_backup(const PMdp& m, std::size_t s, const Choice& c, const std::vector<double>& v);

/// Throws ConvergenceError.
GameValues aval_cval(const PMdp& m, const GameOptions& opt = {});

/// Same fixpoints with the maximizing choice limited to the support of pi.
/// Throws ModelError when pi plays no enabled action at some state.
GameValues aval_cval_policy(const PMdp& m, const Policy& pi, const GameOptions& opt = {});

using TransitionSet = std::set<std::tuple<std::size_t, std::size_t, std::size_t>>;

/// { (s,a,s') | aVal(s) < R(s,a) + gamma aVal(s') by more than the strict margin }.
TransitionSet improving_transitions(const PMdp& m, const GameValues& gv);

/// Keeps only the pairs whose worst backup reaches aVal(s) (within the margin).
PMdp worst_case_subpmdp(const PMdp& m, const GameValues& gv);

/// Per state: whether some policy traverses a target transition with probability 1.
std::vector<bool> almost_sure_region(const PMdp& m, const TransitionSet& target);
bool almost_sure_hit(const PMdp& m, const TransitionSet& target, std::size_t from);

/// Whether a worst-case optimal policy from s hits an improving transition almost surely.
bool strict_bound_holds(const PMdp& m, std::size_t s);
std::vector<bool> strict_bound_region(const PMdp& m, const GameValues& gv);

enum class PruneReason { Strict, NonStrict, Smt };

struct PrunedPair {
    std::size_t s = 0;
    std::size_t a = 0;
    PruneReason reason = PruneReason::Strict;
    std::size_t round = 0;
    std::string detail;
};

struct PruneResult {
    std::vector<PrunedPair> removed;
    std::vector<std::string> log;

    bool contains(std::size_t s, std::size_t a) const;
};

std::string to_string(PruneReason r);

/// Copy of m without the listed pairs.
PMdp remove_pairs(const PMdp& m, const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

/// aVal-cVal pruning iterated to a fixpoint. Never removes the last action of a state.
std::pair<PMdp, PruneResult> aval_cval_prune(const PMdp& m, const GameOptions& opt = {});

/// Human-readable list of removed pairs.
std::string prune_report(const PMdp& m, const PruneResult& r);

} // namespace pspi
