#pragma once

#include "pspi/pmdp.hpp"
#include "pspi/solve.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pspi {

struct Step {
    std::size_t s = 0;
    std::size_t a = 0;
    std::size_t next = 0;
    bool operator==(const Step&) const = default;
};

/// Ordered transitions; episode_starts holds the index of each episode's first step.
struct Dataset {
    std::string env;
    std::uint64_t seed = 0;
    std::string behavior = "pi_b";
    std::vector<Step> steps;
    std::vector<std::size_t> episode_starts;
};

/// First n steps of d, keeping the episode marks that fall inside.
Dataset prefix(const Dataset& d, std::size_t n);

class CountTable {
public:
    CountTable() = default;
    CountTable(std::size_t n_states, std::size_t n_actions)
        : n_states_(n_states), n_actions_(n_actions), sa_(n_states * n_actions, 0), sas_(n_states * n_actions) {}

    void add(std::size_t s, std::size_t a, std::size_t next, std::uint64_t k = 1);
    std::uint64_t sa(std::size_t s, std::size_t a) const { return sa_[s * n_actions_ + a]; }
    std::uint64_t sas(std::size_t s, std::size_t a, std::size_t next) const;
    /// Observed successors of (s,a) and their counts.
    const std::map<std::size_t, std::uint64_t>& successors(std::size_t s, std::size_t a) const {
        return sas_[s * n_actions_ + a];
    }
    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    bool operator==(const CountTable&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<std::uint64_t> sa_;
    std::vector<std::map<std::size_t, std::uint64_t>> sas_;
};

CountTable count(const Dataset& d, std::size_t n_states, std::size_t n_actions);

/// MLE transition estimate on the skeleton of m. Pairs without data, and pairs
/// not enabled in m, are disabled. Throws ModelError when the data contains a
/// transition outside the support of m.
Mdp mle_mdp(const CountTable& c, const PMdp& m);

/// Bootstrapped pairs. `allowed` marks the enabled pairs of the model the set was
/// built for; actions outside it (pruned or never enabled) get no mass from pi_I.
struct UncertaintySet {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<char> member;
    std::vector<char> allowed;

    bool contains(std::size_t s, std::size_t a) const { return member[s * n_actions + a] != 0; }
    bool is_allowed(std::size_t s, std::size_t a) const { return allowed[s * n_actions + a] != 0; }
    std::size_t size() const;
    /// Every member is also a member of other.
    bool subset_of(const UncertaintySet& other) const;
};

/// { (s,a) enabled in m | n_sa(s,a) < n_wedge }.
UncertaintySet uncertainty_set(const CountTable& c, std::uint64_t n_wedge, const PMdp& m);

struct SpibbOptions {
    bool one_shot = false;          // single greedy step on Q* of the MLE
    std::size_t max_rounds = 1000;  // cap on the policy-iteration loop
};

/// Bootstrapped improvement: copies pi_b on U, gives the remaining mass to the
/// best action among the non-bootstrapped ones the MLE enables (lowest index on
/// ties). Where none is available the row is pi_b restricted to allowed actions.
Policy spibb_policy(const Mdp& mle, const Policy& pi_b, const UncertaintySet& u, const SpibbOptions& opt = {});

} // namespace pspi
