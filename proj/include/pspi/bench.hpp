#pragma once

#include "pspi/pmdp.hpp"
#include "pspi/solve.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace pspi {

struct BenchmarkSpec {
    std::string name;
    std::map<std::string, std::string> builder_params;
    std::size_t expected_states = 0;
    std::size_t expected_actions = 0;
    std::size_t expected_params = 0;
    double alpha = 0.0;           // behavior-policy perturbation
    Valuation truth;              // canonical graph-preserving valuation
    std::size_t horizon = 200;    // rollout reset after this many steps
    std::vector<bool> terminal;   // entering such a state ends the episode
    std::string construction;     // how the model was built
};

struct Benchmark {
    PMdp model;
    BenchmarkSpec spec;
};

/// n x n slippery grid (n >= 2). Dims are only checked for the 5 x 5 default.
Benchmark build_gridworld(std::size_t n = 5);
Benchmark build_resource_gathering();
Benchmark build_taxi();
Benchmark build_pacman();
/// `bias` is added to the entry that beats the player's previous move.
Benchmark build_rps(double bias = 0.2);

/// gridworld, resource-gathering, taxi, pacman, rps. Throws std::invalid_argument.
Benchmark build_benchmark(const std::string& name);
std::vector<std::string> benchmark_names();

/// Built dims equal the expected ones.
bool dims_match(const Benchmark& b);

/// Text report: dims (built and expected), alpha, horizon, valuation and construction notes.
std::string spec_report(const Benchmark& b);

/// Optimal action of m gets 1 - alpha, the rest is spread evenly over the
/// other enabled actions. A state with one enabled action keeps mass 1.
Policy behavior_policy(const Mdp& m, double alpha);

/// Same as above for an already computed deterministic optimal choice per state.
Policy behavior_policy(const Mdp& m, const std::vector<std::size_t>& optimal, double alpha);

} // namespace pspi
