#include "pspi/bench.hpp"
#include "pspi/harness.hpp"
#include "pspi/model_io.hpp"

#include "random_models.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

using namespace pspi;

namespace {

Mdp three_state() {
    return instantiate(parse_pmdp("pmdp three\ngamma 9/10\nrmax 2\nstate s0\nstate s1\nstate s2\ninitial s0\n"
                                  "action a\naction b\nreward s0 a 1\nreward s1 b 2\nreward s2 a -1\n"
                                  "trans s0 a s1 1/5\ntrans s0 a s2 4/5\ntrans s0 b s0 1/2\ntrans s0 b s1 1/2\n"
                                  "trans s1 a s0 1\ntrans s1 b s2 3/10\ntrans s1 b s1 7/10\n"
                                  "trans s2 a s0 2/3\ntrans s2 a s2 1/3\n"),
                       {});
}

Policy mixed(const Mdp& m) {
    Policy pi(m.n_states(), m.n_actions());
    pi.at(0, 0) = 0.25;
    pi.at(0, 1) = 0.75;
    pi.at(1, 0) = 0.6;
    pi.at(1, 1) = 0.4;
    pi.at(2, 0) = 1.0;
    return pi;
}

} // namespace

TEST_CASE("cvar") {
    std::vector<double> v(10);
    std::iota(v.begin(), v.end(), 1.0);
    std::shuffle(v.begin(), v.end(), support::Engine(4));
    CHECK(cvar(v, 0.1) == 1.0);
    CHECK(cvar(v, 0.2) == 1.5);
    CHECK(cvar(v, 0.01) == 1.0);
    CHECK(cvar(v, 1.0) == 5.5);
    CHECK_THROWS_AS(cvar({}, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(cvar(v, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(cvar(v, 1.5), std::invalid_argument);
    // Non-decreasing in the fraction, never above the mean.
    support::Engine g(7);
    std::vector<double> r(37);
    for (double& x : r) x = support::uniform_real(g, -5, 5);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    double prev = -INFINITY;
    for (double f = 0.01; f <= 1.0; f += 0.01) {
        const double c = cvar(r, f);
        CHECK(c >= prev - 1e-12);
        CHECK(c <= mean + 1e-12);
        prev = c;
    }
}

TEST_CASE("random streams") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        CHECK(x != c.next());
    }
    Rng u(1);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double x = u.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        sum += x;
    }
    CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(seed_stream(7, i));
    CHECK(seeds.size() == 1000);
    CHECK(seed_stream(7, 3) == seed_stream(7, 3));
    CHECK(seed_stream(7, 3) != seed_stream(8, 3));
}

TEST_CASE("sample_index") {
    const std::vector<double> w{0.2, 0.0, 0.5, 0.3};
    CHECK(sample_index(w, 0.0) == 0);
    CHECK(sample_index(w, 0.19) == 0);
    CHECK(sample_index(w, 0.2) == 2);
    CHECK(sample_index(w, 0.69) == 2);
    CHECK(sample_index(w, 0.71) == 3);
    CHECK(sample_index(w, 0.9999999) == 3);
    // Rounding slack lands on the last positive weight.
    CHECK(sample_index({0.5, 0.4999999, 0.0}, 0.99999995) == 1);
}

TEST_CASE("sample_dataset basics") {
    const Mdp m = three_state();
    const Policy pi = mixed(m);
    CHECK(sample_dataset(m, pi, 0, 1).steps.empty());
    const Dataset d = sample_dataset(m, pi, 1000, 5);
    REQUIRE(d.steps.size() == 1000);
    CHECK(d.steps[0].s == m.initial);
    for (std::size_t i = 1; i < d.steps.size(); ++i)
        CHECK(d.steps[i].s == (i % 200 == 0 ? m.initial : d.steps[i - 1].next));
    for (const Step& st : d.steps) {
        CHECK(m.enabled(st.s, st.a));
        CHECK(pi(st.s, st.a) > 0.0);
    }
    CHECK(d.episode_starts == std::vector<std::size_t>{0, 200, 400, 600, 800});
    // Deterministic and prefix-consistent.
    const Dataset again = sample_dataset(m, pi, 1000, 5);
    CHECK(again.steps == d.steps);
    const Dataset shorter = sample_dataset(m, pi, 321, 5);
    CHECK(std::equal(shorter.steps.begin(), shorter.steps.end(), d.steps.begin()));
    CHECK(prefix(d, 321).steps == shorter.steps);
    CHECK(sample_dataset(m, pi, 1000, 6).steps != d.steps);
    // Terminal states restart the episode.
    const Dataset term = sample_dataset(m, pi, 500, 9, 200, {false, false, true});
    for (std::size_t i = 1; i < term.steps.size(); ++i)
        if (term.steps[i - 1].next == 2) CHECK(term.steps[i].s == m.initial);
    CHECK_THROWS_AS(sample_dataset(m, pi, 10, 1, 0), std::invalid_argument);
}

TEST_CASE("sampled frequencies converge to the true probabilities") {
    const Mdp m = three_state();
    const Policy pi = mixed(m);
    const Dataset d = sample_dataset(m, pi, 1000000, 11, 1000000);
    std::map<std::pair<std::size_t, std::size_t>, double> sa;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> sas;
    std::map<std::size_t, double> visits;
    for (const Step& st : d.steps) {
        ++visits[st.s];
        ++sa[{st.s, st.a}];
        ++sas[{st.s, st.a, st.next}];
    }
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (const auto& c : m.choices[s]) {
            CHECK(std::abs(sa[{s, c.action}] / visits[s] - pi(s, c.action)) < 0.01);
            for (const auto& t : c.next)
                CHECK(std::abs(sas[{s, c.action, t.target}] / sa[{s, c.action}] - t.prob) < 0.01);
        }
}

TEST_CASE("evaluate_policy_true matches a dense solve") {
    support::Engine g(13);
    for (int i = 0; i < 50; ++i) {
        const PMdp pm = support::random_pmdp(g);
        const Mdp m = instantiate(pm, support::random_valuation(g, pm));
        const Policy pi = uniform_policy(m);
        CHECK(evaluate_policy_true(m, pi) ==
              doctest::Approx(support::evaluate_oracle(m, pi)[m.initial]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("config parsing and validation") {
    const ExperimentConfig cfg = parse_config("# comment\nenv taxi\nmethods spibb:none,pspibb:game,pspibb:smt\n"
                                              "n_wedge 200\ndelta 0.1\nsizes 100,1000\nseeds 8\nalpha 0.25\n"
                                              "gamma 19/20\nhorizon 50\nmaster_seed 9\njobs 2\nsmt_timeout 5\n");
    CHECK(cfg.env == "taxi");
    REQUIRE(cfg.methods.size() == 3);
    CHECK(cfg.methods[1] == Method{true, Pruning::Game});
    CHECK(cfg.methods[2] == Method{true, Pruning::Smt});
    CHECK(cfg.n_wedge == 200);
    CHECK(cfg.sizes == std::vector<std::size_t>{100, 1000});
    CHECK(cfg.alpha == 0.25);
    CHECK(cfg.gamma == "19/20");
    CHECK(cfg.horizon == 50u);
    const std::string text = serialize_config(cfg);
    CHECK(serialize_config(parse_config(text)) == text);

    CHECK_THROWS_AS(parse_config("sizes 10,10\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("sizes 100,10\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("seeds 0\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("delta 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("alpha 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("methods dqn\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("methods spibb:maybe\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("colour blue\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("env\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("gamma 1/0\n"), std::invalid_argument);
    ExperimentConfig bad;
    bad.methods.clear();
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("without data every method returns the baseline") {
    ExperimentConfig cfg;
    cfg.env = "gridworld";
    cfg.sizes = {0, 50};
    cfg.n_seeds = 4;
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.failures == 0);
    for (const auto& sr : r.seeds)
        for (const auto& runs : sr.runs) {
            CHECK(runs[0].performance == doctest::Approx(r.baseline).epsilon(1e-12));
            CHECK(runs[0].mle_gap == doctest::Approx(0.0).scale(1.0));
        }
}

TEST_CASE("curve CSV round-trips and experiments are deterministic") {
    ExperimentConfig cfg;
    cfg.env = "gridworld";
    cfg.methods = {{true, Pruning::Game}, {false, Pruning::None}, {true, Pruning::None}};
    cfg.sizes = {10, 100, 1000};
    cfg.n_seeds = 6;
    cfg.jobs = 2;
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.curve.size() == 9);
    for (std::size_t i = 1; i < r.curve.size(); ++i) {
        const auto& p = r.curve[i - 1];
        const auto& q = r.curve[i];
        const auto key = [](const CurvePoint& c) {
            return std::make_tuple(c.method.name(), static_cast<int>(c.method.pruning), c.size);
        };
        CHECK(key(p) < key(q));
    }
    for (const auto& pt : r.curve) {
        CHECK(pt.cvar1 <= pt.cvar10 + 1e-12);
        CHECK(pt.cvar10 <= pt.mean + 1e-12);
    }
    const std::string csv = emit_csv(r.curve);
    CHECK(csv.rfind("env,method,pruning,n_wedge,size,mean,cvar10,cvar1,baseline\n", 0) == 0);
    const auto parsed = parse_csv(csv);
    REQUIRE(parsed.size() == r.curve.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].method == r.curve[i].method);
        CHECK(parsed[i].size == r.curve[i].size);
        CHECK(parsed[i].mean == r.curve[i].mean);
        CHECK(parsed[i].cvar1 == r.curve[i].cvar1);
    }
    CHECK(emit_csv(parsed) == csv);
    cfg.jobs = 1;
    const ExperimentResult again = run_experiment(cfg);
    CHECK(emit_csv(again.curve) == csv);
    CHECK(emit_raw_csv(again) == emit_raw_csv(r));
    CHECK(experiment_summary(r).find("failures 0") != std::string::npos);
    CHECK_THROWS(parse_csv("env,method\nx,y\n"));
}

TEST_CASE("sharing the slip helps on the gridworld") {
    ExperimentConfig cfg;
    cfg.env = "gridworld";
    cfg.n_wedge = 20;
    cfg.sizes = {10, 100, 1000, 10000};
    cfg.n_seeds = 64;
    const ExperimentResult r = run_experiment(cfg);
    REQUIRE(r.failures == 0);
    std::map<std::size_t, std::map<bool, double>> mean;
    for (const auto& pt : r.curve) mean[pt.size][pt.method.parametric] = pt.mean;
    for (const auto& [size, m] : mean) {
        CAPTURE(size);
        CHECK(m.at(true) >= m.at(false) - 1e-9);
    }
    CHECK(mean.at(1000).at(true) > r.baseline);
}
