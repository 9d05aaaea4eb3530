#include "pspi/error.hpp"
#include "pspi/game.hpp"
#include "pspi/model_io.hpp"

#include "random_models.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace pspi;

namespace {

PMdp load(const std::string& file) { return parse_pmdp(read_file(std::string(PSPI_MODELS_DIR) + "/" + file)); }

// b reaches s1 (pays 1 forever) or a -10 trap; a loops at 0. The only
// improving transition lies behind b, which is not worst-case optimal.
const char* kHiddenImprovement = R"(pmdp hidden
gamma 9/10
rmax 10
param p
state s0
state s1
state s2
state s3
initial s0
action a
action b
reward s1 a 1
reward s3 a -10
trans s0 a s0 1
trans s0 b s1 p
trans s0 b s2 1 - p
trans s1 a s1 1
trans s2 a s3 1
trans s3 a s3 1
)";

std::vector<std::size_t> all_actions(const PMdp& m, std::size_t s) {
    std::vector<std::size_t> out;
    for (const auto& c : m.choices[s]) out.push_back(c.action);
    return out;
}

Policy deterministic(const PMdp& m, const std::vector<std::size_t>& choice) {
    Policy pi(m.n_states(), m.n_actions());
    for (std::size_t s = 0; s < m.n_states(); ++s) pi.at(s, choice[s]) = 1.0;
    return pi;
}

void for_each_choice(const PMdp& m, const std::function<void(const std::vector<std::size_t>&)>& f) {
    std::vector<std::size_t> idx(m.n_states(), 0), choice(m.n_states());
    while (true) {
        for (std::size_t s = 0; s < m.n_states(); ++s) choice[s] = m.choices[s][idx[s]].action;
        f(choice);
        std::size_t s = 0;
        for (; s < m.n_states(); ++s) {
            if (++idx[s] < m.choices[s].size()) break;
            idx[s] = 0;
        }
        if (s == m.n_states()) return;
    }
}

// Same support, every label replaced by a fresh constant distribution.
PMdp relabel(const PMdp& m, support::Engine& g) {
    PMdp out = m;
    out.params.clear();
    for (auto& row : out.choices)
        for (auto& c : row) {
            const auto labels = support::random_labels(g, c.edges.size(), {}, false);
            for (std::size_t e = 0; e < c.edges.size(); ++e) c.edges[e].label = labels[e];
        }
    return out;
}

support::RandomPMdpOptions small(std::size_t max_states) {
    support::RandomPMdpOptions o;
    o.max_states = max_states;
    return o;
}

} // namespace

TEST_SUITE("game values") {
    TEST_CASE("values of the pruning example") {
        const PMdp m = load("two_sided.pmdp");
        const GameValues gv = aval_cval(m);
        auto s = [&](const char* n) { return m.state_index(n); };
        CHECK(std::abs(gv.aval[s("s0")]) <= 1e-6);
        CHECK(std::abs(gv.aval[s("s1")]) <= 1e-6);
        CHECK(std::abs(gv.cval[s("s3")]) <= 1e-6);
        CHECK(std::abs(gv.cval[s("s4")]) <= 1e-6);
        CHECK(std::abs(gv.cval[s("s5")] + 191) <= 1e-6);
        CHECK(std::abs(gv.cval[s("s6")] + 195) <= 1e-6);
        CHECK(std::abs(gv.cval[s("s7")] + 200) <= 1e-6);
        CHECK(std::abs(gv.cval[s("s8")] + 200) <= 1e-6);
    }

    TEST_CASE("antagonistic value of the two-action example") {
        const PMdp m = load("qq_gap.pmdp");
        CHECK(std::abs(aval_cval(m).aval[m.state_index("s0")] + 45) <= 1e-6);
    }

    TEST_CASE("singleton supports: both values equal the MDP values") {
        const PMdp m = parse_pmdp("pmdp det\ngamma 1/2\nrmax 3\nstate s0\nstate s1\ninitial s0\naction a\naction b\n"
                                  "reward s0 a 1\nreward s0 b 3\nreward s1 a -2\n"
                                  "trans s0 a s0 1\ntrans s0 b s1 1\ntrans s1 a s0 1\n");
        const GameValues gv = aval_cval(m);
        const ValueTable vt = value_iteration(instantiate(m, {}));
        for (std::size_t s = 0; s < 2; ++s) {
            CHECK(gv.aval[s] == doctest::Approx(vt.v[s]).epsilon(1e-8));
            CHECK(gv.cval[s] == doctest::Approx(vt.v[s]).epsilon(1e-8));
        }
    }

    TEST_CASE("property: ordering, bounds and valuation independence") {
        support::Engine g(51);
        for (int i = 0; i < 200; ++i) {
            const PMdp m = support::random_pmdp(g, small(8));
            const GameValues gv = aval_cval(m);
            const double vmax = to_double(m.rmax) / (1 - to_double(m.gamma));
            for (std::size_t s = 0; s < m.n_states(); ++s) {
                CHECK(gv.aval[s] <= gv.cval[s] + 1e-12);
                CHECK(gv.aval[s] >= -vmax - 1e-9);
                CHECK(gv.cval[s] <= vmax + 1e-9);
            }
            const GameValues other = aval_cval(relabel(m, g));
            CHECK(other.aval == gv.aval);
            CHECK(other.cval == gv.cval);
        }
    }

    TEST_CASE("property: sandwich around the optimal values") {
        support::Engine g(52);
        for (int i = 0; i < 200; ++i) {
            const PMdp m = support::random_pmdp(g, small(8));
            const GameValues gv = aval_cval(m);
            const ValueTable vt = value_iteration(instantiate(m, support::random_valuation(g, m)));
            for (std::size_t s = 0; s < m.n_states(); ++s) {
                CHECK(gv.aval[s] - 1e-6 <= vt.v[s]);
                CHECK(vt.v[s] <= gv.cval[s] + 1e-6);
            }
        }
    }
}

TEST_SUITE("policy game values") {
    TEST_CASE("a worst-case optimal policy attains aVal") {
        const PMdp m = load("two_sided.pmdp");
        const GameValues gv = aval_cval(m);
        std::vector<std::size_t> choice(m.n_states());
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            double best = -INFINITY;
            for (const auto& c : m.choices[s]) {
                const double b = min_backup(m, s, c, gv.aval);
                if (b > best + 1e-9) best = b, choice[s] = c.action;
            }
        }
        const GameValues gp = aval_cval_policy(m, deterministic(m, choice));
        CHECK(gp.aval[m.initial] == doctest::Approx(gv.aval[m.initial]).scale(1.0));
    }

    TEST_CASE("single-action models: identical to the unrestricted values") {
        const PMdp m = load("qq_gap.pmdp");
        const PMdp one = remove_pairs(m, {{m.state_index("s0"), m.action_index("b")}});
        std::vector<std::size_t> choice(one.n_states(), 0);
        const GameValues x = aval_cval(one), y = aval_cval_policy(one, deterministic(one, choice));
        for (std::size_t s = 0; s < one.n_states(); ++s) {
            CHECK(x.aval[s] == doctest::Approx(y.aval[s]));
            CHECK(x.cval[s] == doctest::Approx(y.cval[s]));
        }
    }

    TEST_CASE("property: policy values never exceed the game values, and the best one attains them") {
        support::Engine g(53);
        for (int i = 0; i < 60; ++i) {
            const PMdp m = support::random_pmdp(g, small(5));
            const GameValues gv = aval_cval(m);
            std::vector<double> best_a(m.n_states(), -INFINITY), best_c(m.n_states(), -INFINITY);
            for_each_choice(m, [&](const std::vector<std::size_t>& choice) {
                const GameValues gp = aval_cval_policy(m, deterministic(m, choice));
                for (std::size_t s = 0; s < m.n_states(); ++s) {
                    CHECK(gp.aval[s] <= gv.aval[s] + 1e-8);
                    CHECK(gp.cval[s] <= gv.cval[s] + 1e-8);
                    best_a[s] = std::max(best_a[s], gp.aval[s]);
                    best_c[s] = std::max(best_c[s], gp.cval[s]);
                }
            });
            for (std::size_t s = 0; s < m.n_states(); ++s) {
                CHECK(best_a[s] == doctest::Approx(gv.aval[s]).epsilon(1e-8).scale(1.0));
                CHECK(best_c[s] == doctest::Approx(gv.cval[s]).epsilon(1e-8).scale(1.0));
            }
        }
    }

    TEST_CASE("a policy without enabled actions at a state is rejected") {
        const PMdp m = load("qq_gap.pmdp");
        CHECK_THROWS_AS(aval_cval_policy(m, Policy(m.n_states(), m.n_actions())), ModelError);
    }
}

TEST_SUITE("improving transitions") {
    TEST_CASE("the pruning example") {
        const PMdp m = load("two_sided.pmdp");
        const TransitionSet i = improving_transitions(m, aval_cval(m));
        const auto s0 = m.state_index("s0"), a = m.action_index("a");
        CHECK(i == TransitionSet{{s0, a, m.state_index("s2")}});
        // The transition s2 -a-> s9 is still hit almost surely from s0.
        CHECK(almost_sure_hit(m, {{m.state_index("s2"), a, m.state_index("s9")}}, s0));
    }

    TEST_CASE("a deterministic single-run chain has none") {
        const PMdp m = parse_pmdp("pmdp chain\ngamma 1/2\nrmax 3\nstate s0\nstate s1\nstate s2\ninitial s0\naction a\n"
                                  "reward s0 a 3\nreward s1 a -1\ntrans s0 a s1 1\ntrans s1 a s2 1\ntrans s2 a s2 1\n");
        CHECK(improving_transitions(m, aval_cval(m)).empty());
    }

    TEST_CASE("property: members improve strictly, worst successors of optimal actions never do") {
        support::Engine g(54);
        for (int i = 0; i < 200; ++i) {
            const PMdp m = support::random_pmdp(g, small(8));
            const GameValues gv = aval_cval(m);
            const TransitionSet set = improving_transitions(m, gv);
            const double gamma = to_double(m.gamma);
            for (const auto& [s, a, t] : set) CHECK(gv.aval[s] < to_double(m.r(s, a)) + gamma * gv.aval[t]);
            for (std::size_t s = 0; s < m.n_states(); ++s)
                for (const auto& c : m.choices[s]) {
                    if (std::abs(min_backup(m, s, c, gv.aval) - gv.aval[s]) > 1e-9) continue;
                    for (const auto& e : c.edges)
                        if (std::abs(to_double(m.r(s, c.action)) + gamma * gv.aval[e.target] - gv.aval[s]) <= 1e-9)
                            CHECK(set.count({s, c.action, e.target}) == 0);
                }
        }
    }
}

TEST_SUITE("worst-case sub-model") {
    TEST_CASE("single-action models are unchanged") {
        const PMdp m = parse_pmdp("pmdp one\ngamma 1/2\nrmax 1\nparam x\nstate s\nstate t\ninitial s\naction a\n"
                                  "reward s a 1\ntrans s a s x\ntrans s a t 1 - x\ntrans t a t 1\n");
        CHECK(worst_case_subpmdp(m, aval_cval(m)) == m);
    }

    TEST_CASE("the pruning example keeps a and b at s0") {
        const PMdp m = load("two_sided.pmdp");
        const GameValues gv = aval_cval(m);
        const PMdp sub = worst_case_subpmdp(m, gv);
        const auto s0 = m.state_index("s0");
        CHECK(all_actions(sub, s0) == std::vector<std::size_t>{m.action_index("a"), m.action_index("b")});
        // Hand computation: worst backups of a, b, c at s0 are 0, 0 and 0.95 * -191.
        CHECK(min_backup(m, s0, *m.find_choice(s0, m.action_index("a")), gv.aval) == doctest::Approx(0.0).scale(1.0));
        CHECK(min_backup(m, s0, *m.find_choice(s0, m.action_index("b")), gv.aval) == doctest::Approx(0.0).scale(1.0));
        CHECK(min_backup(m, s0, *m.find_choice(s0, m.action_index("c")), gv.aval) == doctest::Approx(-0.95 * 195));
    }

    TEST_CASE("property: every policy of the sub-model is worst-case optimal") {
        support::Engine g(55);
        for (int i = 0; i < 100; ++i) {
            const PMdp m = support::random_pmdp(g, small(5));
            const GameValues gv = aval_cval(m);
            const PMdp sub = worst_case_subpmdp(m, gv);
            for (std::size_t s = 0; s < m.n_states(); ++s) {
                REQUIRE_FALSE(sub.choices[s].empty());
                for (const auto& c : sub.choices[s])
                    CHECK(std::abs(min_backup(m, s, c, gv.aval) - gv.aval[s]) <= strict_margin(m));
            }
            for_each_choice(sub, [&](const std::vector<std::size_t>& choice) {
                const GameValues gp = aval_cval_policy(m, deterministic(m, choice));
                for (std::size_t s = 0; s < m.n_states(); ++s)
                    CHECK(gp.aval[s] == doctest::Approx(gv.aval[s]).epsilon(1e-8).scale(1.0));
            });
        }
    }
}

TEST_SUITE("almost-sure reachability") {
    TEST_CASE("unreachable targets are never hit") {
        const PMdp m = load("two_sided.pmdp");
        CHECK_FALSE(almost_sure_hit(m, {{m.state_index("s0"), 0, m.state_index("s1")}}, m.state_index("s3")));
        CHECK_FALSE(almost_sure_hit(m, {}, m.state_index("s0")));
    }

    TEST_CASE("probabilistic branching that may avoid the target") {
        const PMdp m = parse_pmdp(kHiddenImprovement);
        const auto s0 = m.state_index("s0"), b = m.action_index("b");
        CHECK_FALSE(almost_sure_hit(m, {{s0, b, m.state_index("s1")}}, s0));
        // A retry loop makes it sure: s2 goes back to s0 in this variant.
        PMdp retry = m;
        retry.choices[m.state_index("s2")][0].edges[0].target = s0;
        CHECK(almost_sure_hit(retry, {{s0, b, m.state_index("s1")}}, s0));
    }

    TEST_CASE("property: agrees with policy enumeration and simulation") {
        support::Engine g(56);
        for (int i = 0; i < 40; ++i) {
            const PMdp m = support::random_pmdp(g, small(6));
            support::TargetSet target;
            for (std::size_t s = 0; s < m.n_states(); ++s)
                for (const auto& c : m.choices[s])
                    for (const auto& e : c.edges)
                        if (support::uniform_real(g, 0, 1) < 0.15) target.insert({s, c.action, e.target});
            const std::size_t from = support::uniform_int(g, 0, m.n_states() - 1);
            const bool answer = almost_sure_hit(m, target, from);
            const auto witness = support::find_sure_policy(m, target, from);
            CHECK(answer == witness.has_value());
            if (answer && witness) {
                const Mdp mdp = instantiate(m, support::random_valuation(g, m));
                CHECK(support::simulate_hit_frequency(mdp, *witness, target, from, 20000, 10000, g) >= 0.999);
            }
        }
    }
}

TEST_SUITE("strict bound condition") {
    TEST_CASE("holds at s0 of the pruning example") {
        const PMdp m = load("two_sided.pmdp");
        CHECK(strict_bound_holds(m, m.state_index("s0")));
    }

    TEST_CASE("absorbing zero-reward state") {
        const PMdp m = parse_pmdp("pmdp z\ngamma 1/2\nrmax 1\nstate s\ninitial s\naction a\ntrans s a s 1\n");
        CHECK_FALSE(strict_bound_holds(m, 0));
    }

    TEST_CASE("improvement reachable only through a non-optimal action") {
        const PMdp m = parse_pmdp(kHiddenImprovement);
        const GameValues gv = aval_cval(m);
        const auto s0 = m.state_index("s0");
        const TransitionSet set = improving_transitions(m, gv);
        CHECK(set == TransitionSet{{s0, m.action_index("b"), m.state_index("s1")}});
        CHECK_FALSE(strict_bound_holds(m, s0));
        // Oracle: no deterministic policy is both worst-case optimal and sure to hit.
        bool witness = false;
        for_each_choice(m, [&](const std::vector<std::size_t>& choice) {
            const bool optimal = std::abs(aval_cval_policy(m, deterministic(m, choice)).aval[s0] - gv.aval[s0]) <= 1e-9;
            witness = witness || (optimal && support::chain_hits_surely(m, choice, set, s0));
        });
        CHECK_FALSE(witness);
    }
}

TEST_SUITE("aVal-cVal pruning") {
    TEST_CASE("the pruning example loses c (strict) and b (non-strict)") {
        const PMdp m = load("two_sided.pmdp");
        const auto [pruned, res] = aval_cval_prune(m);
        const auto s0 = m.state_index("s0");
        REQUIRE(res.removed.size() == 2);
        CHECK(res.contains(s0, m.action_index("c")));
        CHECK(res.contains(s0, m.action_index("b")));
        for (const auto& r : res.removed)
            CHECK(r.reason == (r.a == m.action_index("c") ? PruneReason::Strict : PruneReason::NonStrict));
        CHECK(all_actions(pruned, s0) == std::vector<std::size_t>{m.action_index("a")});
        CHECK(prune_report(m, res).find("s0 b") != std::string::npos);
    }

    TEST_CASE("one action per state: nothing to prune") {
        const PMdp m = parse_pmdp("pmdp one\ngamma 1/2\nrmax 1\nparam x\nstate s\nstate t\ninitial s\naction a\n"
                                  "reward s a 1\ntrans s a s x\ntrans s a t 1 - x\ntrans t a t 1\n");
        const auto [pruned, res] = aval_cval_prune(m);
        CHECK(res.removed.empty());
        CHECK(pruned == m);
    }

    TEST_CASE("remove_pairs") {
        const PMdp m = load("qq_gap.pmdp");
        const PMdp r = remove_pairs(m, {{0, 0}});
        CHECK_FALSE(r.enabled(0, 0));
        CHECK(r.enabled(0, 1));
        CHECK(r.n_pairs() == m.n_pairs() - 1);
    }

    TEST_CASE("property: sound removals and preserved optimal values") {
        support::Engine g(57);
        for (int i = 0; i < 100; ++i) {
            const PMdp m = support::random_pmdp(g, small(6));
            const auto [pruned, res] = aval_cval_prune(m);
            for (std::size_t s = 0; s < m.n_states(); ++s) CHECK_FALSE(pruned.choices[s].empty());
            for (int k = 0; k < 10; ++k) {
                const Valuation v = support::random_valuation(g, m);
                const Mdp full = instantiate(m, v), reduced = instantiate(pruned, v);
                const auto vf = value_iteration(full).v, vr = value_iteration(reduced).v;
                for (std::size_t s = 0; s < m.n_states(); ++s) CHECK(std::abs(vf[s] - vr[s]) <= 1e-6);
                for (const auto& r : res.removed) {
                    const double q = support::q_value(full, r.s, r.a, vf);
                    if (r.reason == PruneReason::Strict) CHECK(q < vf[r.s]);
                    else CHECK(q <= vf[r.s] + 1e-7);
                }
            }
        }
    }
}
