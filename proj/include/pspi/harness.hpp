#pragma once

#include "pspi/bench.hpp"
#include "pspi/game.hpp"
#include "pspi/solve.hpp"
#include "pspi/spibb.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pspi {

/// splitmix64 generator. Uniform doubles use the top 53 bits.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();  // [0, 1)

private:
    std::uint64_t state_;
};

/// Seed of stream `index` derived from the master seed.
std::uint64_t seed_stream(std::uint64_t master, std::uint64_t index);

/// Index drawn by inverse CDF from non-negative weights summing to about 1;
/// rounding slack goes to the last positive weight.
std::size_t sample_index(const std::vector<double>& weights, double u);

/// Rollouts from the initial state, restarting after `horizon` steps or on
/// entering a terminal state, truncated to exactly n_steps steps.
Dataset sample_dataset(const Mdp& m, const Policy& pi, std::size_t n_steps, std::uint64_t seed,
                       std::size_t horizon = 200, const std::vector<bool>& terminal = {});

/// V^pi at the initial state of the true model.
double evaluate_policy_true(const Mdp& m_true, const Policy& pi);

/// Mean of the worst ceil(fraction * n) values. Throws std::invalid_argument.
double cvar(std::vector<double> values, double fraction);

enum class Pruning { None, Game, Smt };
std::string to_string(Pruning p);
Pruning parse_pruning(const std::string& text);

struct Method {
    bool parametric = false;  // pSPIBB when set
    Pruning pruning = Pruning::None;

    std::string name() const { return parametric ? "pspibb" : "spibb"; }
    bool operator==(const Method&) const = default;
};

struct ExperimentConfig {
    std::string env = "gridworld";
    std::vector<Method> methods{{false, Pruning::None}, {true, Pruning::None}};
    std::uint64_t n_wedge = 10;
    double delta = 0.05;
    std::vector<std::size_t> sizes{10, 100, 1000, 10000};
    std::size_t n_seeds = 64;
    std::optional<double> alpha;          // defaults to the benchmark's
    std::optional<std::string> gamma;     // rational text, defaults to the benchmark's
    std::optional<std::size_t> horizon;   // defaults to the benchmark's
    std::uint64_t master_seed = 1;
    std::size_t jobs = 1;
    double smt_timeout = 10.0;
    std::size_t smt_witness_samples = 16;  // sampled valuations tried before each solver run
};

/// Throws std::invalid_argument on a config that breaks the invariants.
void validate(const ExperimentConfig& cfg);

/// `key value` lines; `#` starts a comment. Keys: env, methods (e.g.
/// "spibb:none,pspibb:game"), n_wedge, delta, sizes, seeds, alpha, gamma,
/// horizon, master_seed, jobs, smt_timeout, smt_witness_samples.
ExperimentConfig parse_config(std::string_view text);
std::string serialize_config(const ExperimentConfig& cfg);

/// Outcome of one (method, size) run on one seed.
struct RunOutcome {
    double performance = 0.0;  // true-model value of pi_I at the initial state
    double mle_gap = 0.0;      // V^pi_B - V^pi_I on the estimate used
    double zeta = 0.0;         // bound including mle_gap
    std::size_t bootstrapped = 0;
};

struct SeedResult {
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    double baseline = 0.0;
    std::vector<std::vector<RunOutcome>> runs;  // [method][size]
    std::string error;                          // empty on success
};

struct CurvePoint {
    std::string env;
    Method method;
    std::uint64_t n_wedge = 0;
    std::size_t size = 0;
    double mean = 0.0;
    double cvar10 = 0.0;
    double cvar1 = 0.0;
    double baseline = 0.0;
};

struct PruningSummary {
    Pruning pruning = Pruning::None;
    std::size_t removed = 0;
    std::string report;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<CurvePoint> curve;  // sorted by (method, pruning, size)
    std::vector<SeedResult> seeds;
    std::vector<PruningSummary> pruning;
    double baseline = 0.0;
    std::size_t failures = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Header env,method,pruning,n_wedge,size,mean,cvar10,cvar1,baseline.
std::string emit_csv(const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> parse_csv(std::string_view text);

/// One row per (seed, method, size) with performance, baseline and bound.
std::string emit_raw_csv(const ExperimentResult& r);

/// Plain-text summary: pruning, failures, worst safety margin per method.
std::string experiment_summary(const ExperimentResult& r);

} // namespace pspi
