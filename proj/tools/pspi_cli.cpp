#include "pspi/bench.hpp"
#include "pspi/bounds.hpp"
#include "pspi/error.hpp"
#include "pspi/game.hpp"
#include "pspi/harness.hpp"
#include "pspi/model_io.hpp"
#include "pspi/pspibb.hpp"
#include "pspi/smt.hpp"
#include "pspi/solve.hpp"
#include "pspi/spibb.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace pspi;

namespace {

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file(path, text);
}

Mdp concrete(const PMdp& m, const std::string& valuation) {
    if (m.params.empty() && valuation.empty()) return instantiate(m, {});
    if (valuation.empty()) throw ValuationError("the model has parameters; pass --valuation");
    return instantiate(m, parse_valuation(valuation));
}

std::size_t find_state(const PMdp& m, const std::string& name) {
    const std::size_t s = m.state_index(name);
    if (s == npos) throw ModelError("unknown state '" + name + "'");
    return s;
}

std::size_t find_action(const PMdp& m, const std::string& name) {
    const std::size_t a = m.action_index(name);
    if (a == npos) throw ModelError("unknown action '" + name + "'");
    return a;
}

struct ImproveArgs {
    std::string model, data, baseline;
    std::uint64_t n_wedge = 0;
    bool one_shot = false;
    bool zeta = false;
    double delta = 0.05;
    std::string out;
};

void add_improve_options(CLI::App* cmd, ImproveArgs& a) {
    cmd->add_option("--model", a.model, "model file")->required();
    cmd->add_option("--data", a.data, "dataset file")->required();
    cmd->add_option("--baseline", a.baseline, "behavior policy file")->required();
    cmd->add_option("--n-wedge", a.n_wedge, "count threshold")->required();
    cmd->add_flag("--one-shot", a.one_shot, "single greedy step on Q* of the estimate");
    cmd->add_flag("--zeta", a.zeta, "also print the performance-loss bound");
    cmd->add_option("--delta", a.delta, "confidence parameter for --zeta");
    cmd->add_option("--out", a.out, "write the improved policy here instead of stdout");
}

int run_improve(const ImproveArgs& a, bool parametric) {
    const PMdp m = parse_pmdp(read_file(a.model));
    const Dataset d = parse_dataset(read_file(a.data), m);
    const Policy pi_b = parse_policy(read_file(a.baseline), m);
    const CountTable c = count(d, m.n_states(), m.n_actions());
    SpibbOptions opt;
    opt.one_shot = a.one_shot;
    Mdp est;
    UncertaintySet u;
    if (parametric) {
        const LabelClasses lc = label_classes(m);
        est = parametric_mle(c, m, lc);
        u = parametric_uncertainty_set(c, lc, a.n_wedge, m);
    } else {
        est = mle_mdp(c, m);
        u = uncertainty_set(c, a.n_wedge, m);
    }
    const Policy pi_i = spibb_policy(est, pi_b, u, opt);
    emit(a.out, serialize_policy(pi_i, m, parametric ? "pi_pspibb" : "pi_spibb"));
    const double v_i = evaluate_exact(est, pi_i).v[est.initial];
    const double v_b = evaluate_exact(est, pi_b).v[est.initial];
    std::cout << std::setprecision(12) << "bootstrapped " << u.size() << "\n"
              << "mle_performance " << v_i << "\nmle_baseline " << v_b << "\n";
    if (a.zeta) {
        const double gamma = to_double(m.gamma);
        const double v_max = to_double(m.rmax) / (1.0 - gamma);
        std::cout << "zeta " << zeta_bound(a.n_wedge, a.delta, v_max, gamma, v_b - v_i, m.n_states(), m.n_actions())
                  << "\n";
    }
    return 0;
}

SmtQuery parse_query(const std::string& q) {
    if (q == "q-q") return SmtQuery::QQ;
    if (q == "aval-q") return SmtQuery::AvalQ;
    throw std::invalid_argument("unknown query '" + q + "' (expected aval-q or q-q)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe policy improvement on parametric MDPs"};
    app.require_subcommand(1);

    // solve
    std::string solve_model, solve_valuation, solve_table;
    auto* solve_cmd = app.add_subcommand("solve", "optimal values of a model under a valuation");
    solve_cmd->add_option("--model", solve_model, "model file")->required();
    solve_cmd->add_option("--valuation", solve_valuation, "parameter values, e.g. \"p=0.3,q=1/4\"");
    solve_cmd->add_option("--table", solve_table, "write state,action,q rows as CSV (- for stdout)");

    // spibb / pspibb
    ImproveArgs spibb_args, pspibb_args;
    add_improve_options(app.add_subcommand("spibb", "bootstrapped improvement from raw counts"), spibb_args);
    add_improve_options(app.add_subcommand("pspibb", "bootstrapped improvement from pooled counts"), pspibb_args);

    // prune
    std::string prune_model, prune_method = "game", prune_out, prune_report_path, prune_solver, prune_query = "both";
    double prune_timeout = 60.0;
    std::size_t prune_jobs = 1, prune_witnesses = 0;
    auto* prune_cmd = app.add_subcommand("prune", "remove state-action pairs that are never optimal");
    prune_cmd->add_option("--model", prune_model, "model file")->required();
    prune_cmd->add_option("--method", prune_method, "game or smt")->check(CLI::IsMember({"game", "smt"}));
    prune_cmd->add_option("--out", prune_out, "pruned model file")->required();
    prune_cmd->add_option("--report", prune_report_path, "also write the report to this file");
    prune_cmd->add_option("--solver-cmd", prune_solver, "SMT-LIB 2 solver command reading stdin");
    prune_cmd->add_option("--timeout", prune_timeout, "seconds per solver query");
    prune_cmd->add_option("--jobs", prune_jobs, "concurrent solver processes");
    prune_cmd->add_option("--witness-samples", prune_witnesses,
                          "valuations sampled before each query; a witness answers sat without the solver");
    prune_cmd->add_option("--query", prune_query, "aval-q, q-q or both")
        ->check(CLI::IsMember({"aval-q", "q-q", "both"}));

    // smt-export
    std::string export_model, export_query = "q-q", export_out;
    std::vector<std::string> export_pair;
    auto* export_cmd = app.add_subcommand("smt-export", "write the SMT-LIB 2 query for one pair");
    export_cmd->add_option("--model", export_model, "model file")->required();
    export_cmd->add_option("--pair", export_pair, "state and action names")->required()->expected(2);
    export_cmd->add_option("--query", export_query, "aval-q or q-q")->check(CLI::IsMember({"aval-q", "q-q"}));
    export_cmd->add_option("--out", export_out, "script file (stdout when omitted)");

    // bench
    std::string bench_name, bench_out, bench_baseline;
    bool bench_spec = false;
    auto* bench_cmd = app.add_subcommand("bench", "build a benchmark model");
    bench_cmd->add_option("--name", bench_name, "environment")->required()->check(CLI::IsMember(benchmark_names()));
    bench_cmd->add_option("--out", bench_out, "model file");
    bench_cmd->add_flag("--spec", bench_spec, "print dims, alpha, valuation and construction");
    bench_cmd->add_option("--baseline", bench_baseline, "write the behavior policy here");

    // sample
    std::string sample_model, sample_valuation, sample_policy, sample_out;
    std::size_t sample_steps = 0, sample_horizon = 200;
    std::uint64_t sample_seed = 1;
    auto* sample_cmd = app.add_subcommand("sample", "roll out a policy and write a dataset");
    sample_cmd->add_option("--model", sample_model, "model file")->required();
    sample_cmd->add_option("--valuation", sample_valuation, "true parameter values");
    sample_cmd->add_option("--policy", sample_policy, "behavior policy file")->required();
    sample_cmd->add_option("--steps", sample_steps, "dataset size")->required();
    sample_cmd->add_option("--seed", sample_seed, "random seed");
    sample_cmd->add_option("--horizon", sample_horizon, "steps per episode");
    sample_cmd->add_option("--out", sample_out, "dataset file (stdout when omitted)");

    // experiment
    std::string exp_config, exp_dir = ".";
    auto* exp_cmd = app.add_subcommand("experiment", "data-efficiency study over seeds and dataset sizes");
    exp_cmd->add_option("--config", exp_config, "config file")->required();
    exp_cmd->add_option("--out-dir", exp_dir, "directory for results.csv and raw_seeds.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve_cmd) {
            const PMdp m = parse_pmdp(read_file(solve_model));
            const Mdp mdp = concrete(m, solve_valuation);
            const auto [pi, table] = policy_iteration(mdp);
            std::cout << std::setprecision(12) << "V(" << m.states[m.initial] << ") = " << table.v[m.initial] << "\n";
            if (!solve_table.empty()) {
                std::ostringstream csv;
                csv << std::setprecision(17) << "state,action,q,v\n";
                for (std::size_t s = 0; s < m.n_states(); ++s)
                    for (const auto& c : mdp.choices[s])
                        csv << m.states[s] << "," << m.actions[c.action] << "," << table.Q(s, c.action) << ","
                            << table.v[s] << "\n";
                emit(solve_table, csv.str());
            }
            return 0;
        }
        if (app.got_subcommand("spibb")) return run_improve(spibb_args, false);
        if (app.got_subcommand("pspibb")) return run_improve(pspibb_args, true);
        if (*prune_cmd) {
            const PMdp m = parse_pmdp(read_file(prune_model));
            std::pair<PMdp, PruneResult> res;
            if (prune_method == "game") {
                res = aval_cval_prune(m);
            } else {
                SmtPruneOptions opt;
                if (!prune_solver.empty()) opt.smt.solver_command = prune_solver;
                opt.smt.timeout_s = prune_timeout;
                opt.jobs = prune_jobs;
                opt.smt.witness_samples = prune_witnesses;
                opt.use_qq = prune_query != "aval-q";
                opt.use_aval_q = prune_query != "q-q";
                res = smt_prune(m, opt);
            }
            write_file(prune_out, serialize_pmdp(res.first));
            const std::string report = prune_report(m, res.second);
            std::cout << report;
            if (!prune_report_path.empty()) write_file(prune_report_path, report);
            return 0;
        }
        if (*export_cmd) {
            const PMdp m = parse_pmdp(read_file(export_model));
            const std::size_t s = find_state(m, export_pair[0]);
            const std::size_t a = find_action(m, export_pair[1]);
            emit(export_out, emit_smtlib(pruning_query(m, s, a, parse_query(export_query))));
            return 0;
        }
        if (*bench_cmd) {
            const Benchmark b = build_benchmark(bench_name);
            if (!bench_out.empty()) write_file(bench_out, serialize_pmdp(b.model));
            if (bench_spec) std::cout << spec_report(b);
            if (!bench_baseline.empty()) {
                const Mdp truth = instantiate(b.model, b.spec.truth);
                write_file(bench_baseline, serialize_policy(behavior_policy(truth, b.spec.alpha), b.model, "pi_b"));
            }
            if (bench_out.empty() && !bench_spec && bench_baseline.empty()) std::cout << serialize_pmdp(b.model);
            return dims_match(b) ? 0 : 2;
        }
        if (*sample_cmd) {
            const PMdp m = parse_pmdp(read_file(sample_model));
            const Mdp mdp = concrete(m, sample_valuation);
            const Policy pi = parse_policy(read_file(sample_policy), m);
            if (!is_valid_policy(mdp, pi)) throw std::invalid_argument("policy is not a distribution over enabled actions");
            Dataset d = sample_dataset(mdp, pi, sample_steps, sample_seed, sample_horizon);
            emit(sample_out, serialize_dataset(d, m));
            return 0;
        }
        if (*exp_cmd) {
            const ExperimentConfig cfg = parse_config(read_file(exp_config));
            const ExperimentResult r = run_experiment(cfg);
            std::filesystem::create_directories(exp_dir);
            write_file((std::filesystem::path(exp_dir) / "results.csv").string(), emit_csv(r.curve));
            write_file((std::filesystem::path(exp_dir) / "raw_seeds.csv").string(), emit_raw_csv(r));
            std::cout << experiment_summary(r);
            return r.failures == 0 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
