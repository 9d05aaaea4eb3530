#pragma once

#include "pspi/pmdp.hpp"
#include "pspi/spibb.hpp"

#include <cstdint>
#include <vector>

namespace pspi {

/// Partition of pairs by their set of successor labels, and of transitions by
/// (pair class, label). Split states compare their uniform rows position by
/// position, since their labels are equal by construction.
struct LabelClasses {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<std::size_t> sa_class;                            // per s*nA+a, npos if disabled
    std::vector<std::vector<std::vector<std::size_t>>> trans_class;  // [s][choice][edge]
    std::size_t n_sa_classes = 0;
    std::size_t n_trans_classes = 0;

    std::size_t pair_class(std::size_t s, std::size_t a) const { return sa_class[s * n_actions + a]; }
};

/// Throws ModelError when a non-split pair has two successors with equal labels.
LabelClasses label_classes(const PMdp& m);

/// Class-level sums of the raw counts.
struct PooledCounts {
    std::vector<std::uint64_t> sa;     // per pair class
    std::vector<std::uint64_t> trans;  // per transition class
};

PooledCounts pooled_counts(const CountTable& c, const LabelClasses& lc, const PMdp& m);

/// Pooled denominator of (s,a); 0 for disabled pairs.
std::uint64_t pooled_sa(const PooledCounts& pc, const LabelClasses& lc, std::size_t s, std::size_t a);

/// Estimate where each transition gets its class total over its pair class
/// total. A pair is disabled iff its pooled denominator is 0.
Mdp parametric_mle(const CountTable& c, const PMdp& m, const LabelClasses& lc);

/// Pairs whose pooled denominator is below n_wedge.
UncertaintySet parametric_uncertainty_set(const CountTable& c, const LabelClasses& lc, std::uint64_t n_wedge,
                                          const PMdp& m);

Policy pspibb_policy(const PMdp& m, const LabelClasses& lc, const CountTable& c, const Policy& pi_b,
                     std::uint64_t n_wedge, const SpibbOptions& opt = {});

} // namespace pspi
