#include "pspi/error.hpp"
#include "pspi/game.hpp"
#include "pspi/model_io.hpp"
#include "pspi/smt.hpp"
#include "pspi/solve.hpp"

#include "random_models.hpp"

#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

using namespace pspi;

namespace {

PMdp load(const std::string& name) { return parse_pmdp(read_file(std::string(PSPI_MODELS_DIR) + "/" + name)); }

SmtOptions solver_options(double timeout_s = 60.0) {
    SmtOptions o;
    o.timeout_s = timeout_s;
    return o;
}

std::size_t count_asserts(const std::string& script) {
    std::size_t n = 0;
    for (const Sexp& e : parse_sexps(script))
        if (e.is_list && !e.list.empty() && e.list[0].atom == "assert") ++n;
    return n;
}

bool is_integer_literal(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Walks an asserted term: operators are arithmetic or relational, leaves are
// declared variables or non-negative integer literals.
void check_term(const Sexp& e, const std::set<std::string>& vars) {
    static const std::set<std::string> ops{"+", "-", "*", "/", "=", "<=", "<", ">=", ">", "or", "and"};
    if (!e.is_list) {
        CHECK_MESSAGE((vars.count(e.atom) || is_integer_literal(e.atom)), "unexpected leaf " << e.atom);
        return;
    }
    REQUIRE_FALSE(e.list.empty());
    REQUIRE_FALSE(e.list[0].is_list);
    CHECK_MESSAGE(ops.count(e.list[0].atom), "unexpected operator " << e.list[0].atom);
    for (std::size_t i = 1; i < e.list.size(); ++i) check_term(e.list[i], vars);
}

PMdp small_random(support::Engine& g, std::size_t n_params) {
    support::RandomPMdpOptions o;
    o.max_states = 4;
    o.max_actions = 2;
    o.max_successors = 2;
    o.n_params = n_params;
    return support::random_pmdp(g, o);
}

} // namespace

TEST_CASE("encoding of the q-q example has one parameter, four values and five Q variables") {
    const PMdp m = load("qq_gap.pmdp");
    const EtrSystem sys = encode_bellman(m);
    CHECK(sys.param_vars == std::vector<std::string>{"x_p"});
    CHECK(sys.v_vars.size() == 4);
    CHECK(sys.q_vars.size() == 5);
    CHECK_FALSE(sys.query);
    const std::string script = emit_smtlib(sys);
    CHECK(count_asserts(script) == sys.constraint_count());
    const EtrSystem q = pruning_query(m, m.state_index("s0"), m.action_index("a"), SmtQuery::QQ);
    REQUIRE(q.query);
    CHECK(q.constraint_count() == sys.constraint_count() + 1);
    const std::string qs = emit_smtlib(q);
    CHECK(count_asserts(qs) == q.constraint_count());
    CHECK(qs.find("; query: V(s0) <= Q(s0,a)") != std::string::npos);
}

TEST_CASE("emitted scripts use exact integer arithmetic and are deterministic") {
    support::Engine g(3);
    for (int i = 0; i < 30; ++i) {
        const PMdp m = support::random_pmdp(g);
        const EtrSystem sys = encode_bellman(m);
        const std::string script = emit_smtlib(sys);
        CHECK(script == emit_smtlib(encode_bellman(m)));
        std::set<std::string> vars(sys.param_vars.begin(), sys.param_vars.end());
        vars.insert(sys.v_vars.begin(), sys.v_vars.end());
        vars.insert(sys.q_vars.begin(), sys.q_vars.end());
        std::size_t asserts = 0, declared = 0;
        for (const Sexp& e : parse_sexps(script)) {
            REQUIRE(e.is_list);
            if (e.list[0].atom == "declare-fun") {
                ++declared;
                CHECK(vars.count(e.list[1].atom));
            } else if (e.list[0].atom == "assert") {
                ++asserts;
                REQUIRE(e.list.size() == 2);
                check_term(e.list[1], vars);
            }
        }
        CHECK(declared == vars.size());
        CHECK(asserts == sys.constraint_count());
        CHECK(script.find('.') == std::string::npos);
    }
}

TEST_CASE("solver driver verdicts") {
    const std::string z3 = default_solver_command();
    CHECK(solve("(assert false)\n(check-sat)\n", z3, 30).status == SmtStatus::Unsat);
    const SolverVerdict sat =
        solve("(declare-fun x () Real)\n(assert (> x 0))\n(check-sat)\n(get-model)\n", z3, 30);
    REQUIRE(sat.status == SmtStatus::Sat);
    REQUIRE(sat.model);
    REQUIRE(sat.model->count("x"));
    const auto x = model_value(sat.model->at("x"));
    REQUIRE(x);
    CHECK(*x > 0);
    CHECK(sat.wall_time >= 0.0);

    CHECK(solve("", "cat >/dev/null; echo unknown", 10).status == SmtStatus::Unknown);
    CHECK_THROWS_AS(solve("", "cat >/dev/null; echo garbage", 10), SolverError);
    CHECK_THROWS_AS(solve("", "cat >/dev/null; echo '(error \"bad\")'", 10), SolverError);
    CHECK_THROWS_AS(solve("", "cat >/dev/null", 10), SolverError);
    CHECK_THROWS_AS(solve("", "/nonexistent/solver-binary -in", 10), SolverError);
    CHECK(solve("", "sleep 5", 0.5).status == SmtStatus::Timeout);
}

TEST_CASE("model values") {
    CHECK(model_value("3") == 3.0);
    CHECK(model_value("(- 5)") == -5.0);
    CHECK(model_value("(/ 1 2)") == 0.5);
    CHECK(model_value("(/ (- 3) 4)") == -0.75);
    CHECK(model_value("(- (/ 3 4))") == -0.75);
    CHECK_FALSE(model_value("(root-obj (+ (^ x 2) (- 2)) 1)"));
    CHECK_FALSE(model_value("(/ 1 0)"));
    CHECK_FALSE(model_value("x"));
}

TEST_CASE("a parameterless system is satisfied exactly by the optimal values") {
    support::Engine g(17);
    const std::string z3 = default_solver_command();
    for (int i = 0; i < 10; ++i) {
        const PMdp m = small_random(g, 0);
        const EtrSystem sys = encode_bellman(m);
        const SolverVerdict v = solve(emit_smtlib(sys), z3, 60);
        REQUIRE(v.status == SmtStatus::Sat);
        REQUIRE(v.model);
        const Mdp inst = instantiate(m, {});
        const auto best = support::optimal_by_enumeration(inst);
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            const auto val = model_value(v.model->at(v_var(s)));
            REQUIRE(val);
            CHECK(*val == doctest::Approx(best[s]).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("exact aVal") {
    const PMdp m4 = load("qq_gap.pmdp");
    CHECK(exact_aval(m4)[m4.state_index("s0")] == Rational(-45));
    const PMdp m3 = load("two_sided.pmdp");
    const auto ex3 = exact_aval(m3);
    const auto gv3 = aval_cval(m3);
    for (std::size_t s = 0; s < m3.n_states(); ++s) CHECK(to_double(ex3[s]) == doctest::Approx(gv3.aval[s]));

    support::Engine g(11);
    for (int i = 0; i < 100; ++i) {
        const PMdp m = support::random_pmdp(g);
        const auto ex = exact_aval(m);
        const auto gv = aval_cval(m);
        const double bound = 1e-8 * value_scale(m);
        for (std::size_t s = 0; s < m.n_states(); ++s) CHECK(std::abs(to_double(ex[s]) - gv.aval[s]) <= bound);
    }
}

TEST_CASE("pruning queries on the q-q example") {
    const PMdp m = load("qq_gap.pmdp");
    const std::size_t s0 = m.state_index("s0"), a = m.action_index("a"), b = m.action_index("b");
    const SmtOptions opt = solver_options();
    const SmtDecision aq = aval_q_prunable(m, s0, a, opt);
    CHECK(aq.queried);
    CHECK(aq.verdict.status == SmtStatus::Sat);
    CHECK_FALSE(aq.prunable);
    CHECK(aq.verdict.wall_time < 60.0);
    const SmtDecision qa = qq_prunable(m, s0, a, opt);
    CHECK(qa.verdict.status == SmtStatus::Unsat);
    CHECK(qa.prunable);
    const SmtDecision qb = qq_prunable(m, s0, b, opt);
    CHECK(qb.verdict.status == SmtStatus::Sat);
    CHECK_FALSE(qb.prunable);

    // Oracle for the verdicts: b is strictly better at every sampled p.
    for (double p : {0.05, 0.1, 0.5, 0.9, 0.95}) {
        const Mdp inst = instantiate(m, {{"p", p}});
        const auto best = support::optimal_by_enumeration(inst);
        CHECK(support::q_value(inst, s0, b, best) > support::q_value(inst, s0, a, best));
    }
}

TEST_CASE("aval-q removes the hopeless action of the pruning example") {
    const PMdp m = load("two_sided.pmdp");
    const std::size_t s0 = m.state_index("s0");
    const SmtDecision d = aval_q_prunable(m, s0, m.action_index("c"), solver_options());
    CHECK(d.strict_bound);
    CHECK(d.prunable);
    CHECK_FALSE(aval_q_prunable(m, s0, m.action_index("a"), solver_options()).prunable);
}

TEST_CASE("single-action states are never queried") {
    const PMdp m = load("qq_gap.pmdp");
    const SmtDecision d = qq_prunable(m, m.state_index("s1"), m.action_index("a"), solver_options());
    CHECK_FALSE(d.queried);
    CHECK_FALSE(d.prunable);
    CHECK_THROWS_AS(qq_prunable(m, m.state_index("s1"), m.action_index("b")), ModelError);
}

TEST_CASE("SMT pruning removes at least what game pruning removes") {
    for (const char* name : {"two_sided.pmdp", "qq_gap.pmdp"}) {
        const PMdp m = load(name);
        const auto [gm, game] = aval_cval_prune(m);
        const auto [sm, smt] = smt_prune(m);
        for (const auto& p : game.removed) CHECK_MESSAGE(smt.contains(p.s, p.a), name << " " << m.states[p.s] << " " << m.actions[p.a]);
        for (const auto& p : smt.removed) CHECK(p.reason == PruneReason::Smt);
        for (std::size_t s = 0; s < sm.n_states(); ++s) CHECK_FALSE(sm.choices[s].empty());
    }
    const PMdp m4 = load("qq_gap.pmdp");
    const auto [sm4, r4] = smt_prune(m4);
    REQUIRE(r4.removed.size() == 1);
    CHECK(r4.contains(m4.state_index("s0"), m4.action_index("a")));
}

TEST_CASE("an undecided solver never prunes") {
    const PMdp m = load("qq_gap.pmdp");
    SmtOptions slow = solver_options(0.3);
    slow.solver_command = "sleep 5";
    const SmtDecision d = qq_prunable(m, m.state_index("s0"), m.action_index("a"), slow);
    CHECK(d.verdict.status == SmtStatus::Timeout);
    CHECK_FALSE(d.prunable);
    SmtPruneOptions po;
    po.smt = slow;
    po.smt.solver_command = "cat >/dev/null; echo unknown";
    CHECK(smt_prune(m, po).second.removed.empty());
}

TEST_CASE("property: SMT verdicts agree with sampled valuations") {
    support::Engine g(29);
    const SmtOptions opt = solver_options(20);
    std::size_t decided = 0;
    for (int i = 0; i < 15; ++i) {
        const PMdp m = small_random(g, 1);
        std::vector<Mdp> samples;
        std::vector<std::vector<double>> values;
        for (int k = 0; k < 50; ++k) {
            samples.push_back(instantiate(m, support::random_valuation(g, m)));
            values.push_back(support::optimal_by_enumeration(samples.back()));
        }
        const auto aval = exact_aval(m);
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            if (m.choices[s].size() < 2) continue;
            for (const Choice& c : m.choices[s]) {
                const SmtDecision qq = qq_prunable(m, s, c.action, opt);
                const SmtDecision aq = aval_q_prunable(m, s, c.action, opt);
                for (const auto* d : {&qq, &aq})
                    if (d->verdict.status == SmtStatus::Sat || d->verdict.status == SmtStatus::Unsat) ++decided;
                for (std::size_t k = 0; k < samples.size(); ++k) {
                    const double q = support::q_value(samples[k], s, c.action, values[k]);
                    double other = -INFINITY;
                    for (const Choice& o : m.choices[s])
                        if (o.action != c.action) other = std::max(other, support::q_value(samples[k], s, o.action, values[k]));
                    if (qq.prunable) CHECK(q <= values[k][s] + 1e-9);
                    if (qq.prunable) CHECK(other >= q - 1e-9);
                    if (aq.prunable) CHECK(q <= to_double(aval[s]) + 1e-9);
                    if (q > other + 1e-6) {
                        CHECK_FALSE(qq.prunable);
                        CHECK_FALSE(aq.prunable);
                    }
                }
            }
        }
    }
    CHECK(decided > 0);
}

TEST_CASE("a sampled witness answers sat without the solver") {
    const PMdp m = load("qq_gap.pmdp");
    const std::size_t s0 = m.state_index("s0"), a = m.action_index("a"), b = m.action_index("b");
    SmtOptions opt = solver_options();
    opt.witness_samples = 16;
    // Q(s0,a) = 18p^2 - 4.5(1-p) - 45 exceeds aVal = -45 for p above about 0.39.
    const SmtDecision aq = aval_q_prunable(m, s0, a, opt);
    CHECK(aq.witnessed);
    CHECK(aq.verdict.status == SmtStatus::Sat);
    CHECK_FALSE(aq.prunable);
    REQUIRE(aq.verdict.model);
    const auto p = model_value(aq.verdict.model->at("x_p"));
    REQUIRE(p);
    const Mdp inst = instantiate(m, {{"p", *p}});
    const auto best = support::optimal_by_enumeration(inst);
    CHECK(support::q_value(inst, s0, a, best) > -45.0);
    // b wins everywhere, so its q-q query is witnessed; a needs the solver.
    CHECK(qq_prunable(m, s0, b, opt).witnessed);
    const SmtDecision qa = qq_prunable(m, s0, a, opt);
    CHECK_FALSE(qa.witnessed);
    CHECK(qa.prunable);
    // A broken solver is never reached when a witness exists.
    opt.solver_command = "/nonexistent/solver-binary";
    CHECK_FALSE(qq_prunable(m, s0, b, opt).prunable);
    CHECK_THROWS_AS(qq_prunable(m, s0, a, opt), SolverError);
}

TEST_CASE("property: witnesses never change what gets pruned") {
    support::Engine g(41);
    SmtPruneOptions plain;
    plain.smt.timeout_s = 20;
    SmtPruneOptions fast = plain;
    fast.smt.witness_samples = 16;
    std::size_t removed = 0;
    for (int i = 0; i < 12; ++i) {
        const PMdp m = small_random(g, 1);
        const auto [pm, pr] = smt_prune(m, plain);
        const auto [fm, fr] = smt_prune(m, fast);
        // Only compare runs where every query was decided.
        bool decided = true;
        for (const auto* r : {&pr, &fr})
            for (const auto& line : r->log) decided = decided && line.rfind("undecided", 0) != 0;
        if (!decided) continue;
        CHECK(serialize_pmdp(pm) == serialize_pmdp(fm));
        removed += pr.removed.size();
    }
    CHECK(removed > 0);
}

TEST_CASE("property: game, aval-q and q-q pruning form a chain") {
    support::Engine g(53);
    const SmtOptions opt = solver_options(20);
    std::size_t game_pairs = 0, aval_pairs = 0;
    for (int i = 0; i < 25; ++i) {
        const PMdp m = small_random(g, 1);
        const auto [gm, game] = aval_cval_prune(m);
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            if (m.choices[s].size() < 2) continue;
            for (const Choice& c : m.choices[s]) {
                const SmtDecision aq = aval_q_prunable(m, s, c.action, opt);
                const SmtDecision qq = qq_prunable(m, s, c.action, opt);
                const auto decided = [](const SmtDecision& d) {
                    return d.verdict.status == SmtStatus::Sat || d.verdict.status == SmtStatus::Unsat;
                };
                if (game.contains(s, c.action) && decided(aq)) {
                    ++game_pairs;
                    CHECK(aq.prunable);
                }
                if (aq.prunable && decided(qq)) {
                    ++aval_pairs;
                    CHECK(qq.prunable);
                }
            }
        }
    }
    CHECK(game_pairs > 0);
    CHECK(aval_pairs > 0);
}
