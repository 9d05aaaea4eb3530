#pragma once

#include "pspi/pmdp.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace pspi {

/// Stationary stochastic policy stored densely as n_states x n_actions.
struct Policy {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> prob;

    Policy() = default;
    Policy(std::size_t states, std::size_t actions)
        : n_states(states), n_actions(actions), prob(states * actions, 0.0) {}

    double operator()(std::size_t s, std::size_t a) const { return prob[s * n_actions + a]; }
    double& at(std::size_t s, std::size_t a) { return prob[s * n_actions + a]; }
};

/// Uniform over the enabled actions of each state (all zero where none is enabled).
Policy uniform_policy(const Mdp& m);

/// Puts all mass on choice[s]; npos leaves the row empty.
Policy deterministic_policy(const Mdp& m, const std::vector<std::size_t>& choice);

/// Rows sum to 1 within tol on every state with an enabled action and mass
/// sits only on enabled actions. States without enabled actions must be empty.
bool is_valid_policy(const Mdp& m, const Policy& pi, double tol = 1e-9);

/// V per state, Q per (s,a). Q is -inf on disabled pairs in optimal tables.
struct ValueTable {
    std::size_t n_actions = 0;
    std::vector<double> v;
    std::vector<double> q;
    std::size_t iterations = 0;
    double residual = 0.0;

    double Q(std::size_t s, std::size_t a) const { return q[s * n_actions + a]; }
};

struct SolveOptions {
    double tol = 1e-10;
    std::size_t max_iter = 1000000;
};

/// R(s,a) + sum over successors of discount * P * v.
double backup(const Mdp& m, std::size_t s, const MdpChoice& c, const std::vector<double>& v);

/// Jacobi value iteration from V = 0. Throws ConvergenceError.
ValueTable value_iteration(const Mdp& m, const SolveOptions& opt = {});

/// Iterative evaluation of pi from V = 0. A disabled action that still carries
/// mass contributes its reward and nothing else. Throws ConvergenceError.
ValueTable policy_evaluation(const Mdp& m, const Policy& pi, const SolveOptions& opt = {});

/// Direct sparse solve of (I - gamma P_pi) V = R_pi, same conventions as policy_evaluation.
ValueTable evaluate_exact(const Mdp& m, const Policy& pi);

/// Lowest-index argmax of Q over enabled actions; npos where nothing is enabled.
/// An action replaces the incumbent only when better by more than eps.
std::vector<std::size_t> greedy_actions(const Mdp& m, const ValueTable& t, double eps = 0.0);

/// Howard policy iteration with exact evaluation; returns a deterministic optimal policy.
std::pair<Policy, ValueTable> policy_iteration(const Mdp& m, const SolveOptions& opt = {});

} // namespace pspi
