#include "pspi/smt.hpp"

#include "pspi/error.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pspi {

std::size_t EtrSystem::atom_count() const {
    std::size_t n = query ? query->any_of.size() : 0;
    for (const auto& c : constraints) n += c.any_of.size();
    return n;
}

std::string param_var(const std::string& param) { return "x_" + param; }
std::string v_var(std::size_t s) { return "v_" + std::to_string(s); }
std::string q_var(std::size_t s, std::size_t a) { return "q_" + std::to_string(s) + "_" + std::to_string(a); }

namespace {

Constraint single(Polynomial p, Rel rel, std::string tag) {
    return Constraint{{Atom{std::move(p), rel}}, std::move(tag)};
}

// Label with every parameter renamed to its solver variable.
Polynomial rename_params(const Polynomial& p) {
    Polynomial out;
    for (const auto& [mono, coef] : p.terms()) {
        Polynomial term(coef);
        for (const auto& [name, e] : mono) term *= Polynomial::variable(param_var(name)).pow(e);
        out += term;
    }
    return out;
}

} // namespace

EtrSystem encode_bellman(const PMdp& m) {
    EtrSystem sys;
    for (const auto& x : m.params) sys.param_vars.push_back(param_var(x));
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        sys.v_vars.push_back(v_var(s));
        for (const Choice& c : m.choices[s]) sys.q_vars.push_back(q_var(s, c.action));
    }

    // Graph preservation: each distinct non-constant label in (0,1], rows sum to 1.
    std::set<Polynomial> labels;
    for (const auto& row : m.choices)
        for (const Choice& c : row)
            for (const Edge& e : c.edges)
                if (!e.label.is_constant()) labels.insert(e.label);
    for (const auto& p : labels) {
        const Polynomial renamed = rename_params(p);
        sys.constraints.push_back(single(renamed, Rel::Gt, "label " + p.to_string() + " > 0"));
        sys.constraints.push_back(single(renamed - Polynomial(Rational(1)), Rel::Le, "label " + p.to_string() + " <= 1"));
    }
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (const Choice& c : m.choices[s]) {
            Polynomial sum;
            for (const Edge& e : c.edges) sum += e.label;
            sum -= Polynomial(Rational(1));
            if (sum.is_zero()) continue;
            sys.constraints.push_back(single(rename_params(sum), Rel::Eq,
                                             "row " + m.states[s] + " " + m.actions[c.action] + " sums to 1"));
        }
    }

    // Q(s,a) - R(s,a) - sum disc * P * V(s') = 0
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (const Choice& c : m.choices[s]) {
            Polynomial eq = Polynomial::variable(q_var(s, c.action)) - Polynomial(m.r(s, c.action));
            for (const Edge& e : c.edges) {
                const Rational disc = m.split[e.target] ? Rational(1) : m.gamma;
                eq -= Polynomial(disc) * rename_params(e.label) * Polynomial::variable(v_var(e.target));
            }
            sys.constraints.push_back(single(std::move(eq), Rel::Eq, "bellman " + m.states[s] + " " + m.actions[c.action]));
        }
    }

    // V(s) = max_a Q(s,a)
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        const auto& row = m.choices[s];
        const Polynomial v = Polynomial::variable(v_var(s));
        if (row.size() == 1) {
            sys.constraints.push_back(
                single(v - Polynomial::variable(q_var(s, row[0].action)), Rel::Eq, "value " + m.states[s]));
            continue;
        }
        Constraint any{{}, "value " + m.states[s] + " attained"};
        for (const Choice& c : row) {
            const Polynomial diff = v - Polynomial::variable(q_var(s, c.action));
            sys.constraints.push_back(single(diff, Rel::Ge, "value " + m.states[s] + " >= " + m.actions[c.action]));
            any.any_of.push_back(Atom{diff, Rel::Eq});
        }
        sys.constraints.push_back(std::move(any));
    }
    return sys;
}

namespace {

std::string smt_rational(const Rational& r) {
    const auto num = boost::multiprecision::numerator(r);
    const auto den = boost::multiprecision::denominator(r);
    const bool neg = num < 0;
    const std::string mag = neg ? boost::multiprecision::cpp_int(-num).str() : num.str();
    std::string body = den == 1 ? mag : "(/ " + mag + " " + den.str() + ")";
    return neg ? "(- " + body + ")" : body;
}

std::string smt_poly(const Polynomial& p) {
    if (p.is_zero()) return "0";
    std::vector<std::string> terms;
    for (const auto& [mono, coef] : p.terms()) {
        std::vector<std::string> factors;
        if (coef != 1 || mono.empty()) factors.push_back(smt_rational(coef));
        for (const auto& [name, e] : mono)
            for (unsigned k = 0; k < e; ++k) factors.push_back(name);
        if (factors.size() == 1) {
            terms.push_back(factors[0]);
        } else {
            std::string t = "(*";
            for (const auto& f : factors) t += " " + f;
            terms.push_back(t + ")");
        }
    }
    if (terms.size() == 1) return terms[0];
    std::string out = "(+";
    for (const auto& t : terms) out += " " + t;
    return out + ")";
}

std::string smt_atom(const Atom& a) {
    const char* op = "=";
    switch (a.rel) {
    case Rel::Eq: op = "="; break;
    case Rel::Le: op = "<="; break;
    case Rel::Lt: op = "<"; break;
    case Rel::Ge: op = ">="; break;
    case Rel::Gt: op = ">"; break;
    }
    return std::string("(") + op + " " + smt_poly(a.poly) + " 0)";
}

std::string smt_constraint(const Constraint& c) {
    if (c.any_of.size() == 1) return smt_atom(c.any_of[0]);
    std::string out = "(or";
    for (const auto& a : c.any_of) out += " " + smt_atom(a);
    return out + ")";
}

std::string comment(const std::string& text) {
    std::string out = text;
    std::replace(out.begin(), out.end(), '\n', ' ');
    return "; " + out + "\n";
}

} // namespace

std::string emit_smtlib(const EtrSystem& sys) {
    std::ostringstream out;
    out << "(set-logic QF_NRA)\n(set-option :produce-models true)\n";
    for (const auto* group : {&sys.param_vars, &sys.v_vars, &sys.q_vars})
        for (const auto& v : *group) out << "(declare-fun " << v << " () Real)\n";
    for (const auto& c : sys.constraints) out << comment(c.tag) << "(assert " << smt_constraint(c) << ")\n";
    if (sys.query) out << comment("query: " + sys.query->tag) << "(assert " << smt_constraint(*sys.query) << ")\n";
    out << "(check-sat)\n(get-model)\n(exit)\n";
    return out.str();
}

std::vector<Sexp> parse_sexps(std::string_view text) {
    std::vector<Sexp> top;
    std::vector<Sexp> stack;
    std::size_t i = 0;
    auto push = [&](Sexp e) {
        if (stack.empty()) top.push_back(std::move(e));
        else stack.back().list.push_back(std::move(e));
    };
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == ';') {
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (c == '(') {
            Sexp e;
            e.is_list = true;
            stack.push_back(std::move(e));
            ++i;
        } else if (c == ')') {
            if (stack.empty()) throw std::runtime_error("unbalanced ')'");
            Sexp e = std::move(stack.back());
            stack.pop_back();
            push(std::move(e));
            ++i;
        } else if (c == '"' || c == '|') {
            const std::size_t start = i++;
            while (i < text.size() && text[i] != c) ++i;
            if (i == text.size()) throw std::runtime_error("unterminated literal");
            ++i;
            push(Sexp{std::string(text.substr(start, i - start)), {}, false});
        } else {
            const std::size_t start = i;
            while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != '(' &&
                   text[i] != ')' && text[i] != ';')
                ++i;
            push(Sexp{std::string(text.substr(start, i - start)), {}, false});
        }
    }
    if (!stack.empty()) throw std::runtime_error("unbalanced '('");
    return top;
}

std::string to_string(SmtStatus s) {
    switch (s) {
    case SmtStatus::Sat: return "sat";
    case SmtStatus::Unsat: return "unsat";
    case SmtStatus::Unknown: return "unknown";
    case SmtStatus::Timeout: return "timeout";
    }
    return "?";
}

namespace {

std::optional<Rational> sexp_value(const Sexp& e) {
    if (!e.is_list) {
        try {
            return parse_rational(e.atom);
        } catch (const std::invalid_argument&) {
            return std::nullopt;
        }
    }
    if (e.list.empty() || e.list[0].is_list) return std::nullopt;
    const std::string& op = e.list[0].atom;
    if (op == "-" && e.list.size() == 2) {
        auto v = sexp_value(e.list[1]);
        if (v) return Rational(-*v);
        return std::nullopt;
    }
    if (op == "/" && e.list.size() == 3) {
        auto a = sexp_value(e.list[1]);
        auto b = sexp_value(e.list[2]);
        if (a && b && *b != 0) return Rational(*a / *b);
    }
    return std::nullopt;
}

} // namespace

std::optional<double> model_value(const std::string& text) {
    try {
        auto items = parse_sexps(text);
        if (items.size() != 1) return std::nullopt;
        auto v = sexp_value(items[0]);
        if (v) return to_double(*v);
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

namespace {

// Values of the deterministic play where state s takes action act[s] and the
// opponent resolves it to successor nxt[s]. Every state has one outgoing edge,
// so each path ends in a cycle that is solved in closed form.
std::vector<Rational> play_values(const PMdp& m, const std::vector<std::size_t>& act,
                                  const std::vector<std::size_t>& nxt) {
    const std::size_t nS = m.n_states();
    auto disc = [&](std::size_t t) { return m.split[t] ? Rational(1) : m.gamma; };
    std::vector<Rational> v(nS);
    std::vector<int> state(nS, 0);  // 0 new, 1 on current path, 2 solved
    for (std::size_t start = 0; start < nS; ++start) {
        if (state[start] == 2) continue;
        std::vector<std::size_t> path;
        std::size_t s = start;
        while (state[s] == 0) {
            state[s] = 1;
            path.push_back(s);
            s = nxt[s];
        }
        std::size_t solved_from = path.size();
        if (state[s] == 1) {
            // Cycle from position of s to the end of the path.
            const auto pos = static_cast<std::size_t>(std::find(path.begin(), path.end(), s) - path.begin());
            Rational acc = 0, prod = 1;
            for (std::size_t i = pos; i < path.size(); ++i) {
                const std::size_t c = path[i];
                acc += prod * m.r(c, act[c]);
                prod *= disc(nxt[c]);
            }
            v[s] = acc / (Rational(1) - prod);
            state[s] = 2;
            for (std::size_t i = path.size(); i-- > pos + 1;) {
                const std::size_t c = path[i];
                v[c] = m.r(c, act[c]) + disc(nxt[c]) * v[nxt[c]];
                state[c] = 2;
            }
            solved_from = pos;
        }
        for (std::size_t i = solved_from; i-- > 0;) {
            const std::size_t c = path[i];
            v[c] = m.r(c, act[c]) + disc(nxt[c]) * v[nxt[c]];
            state[c] = 2;
        }
    }
    return v;
}

} // namespace

std::vector<Rational> exact_aval(const PMdp& m) {
    const std::size_t nS = m.n_states();
    const GameValues gv = aval_cval(m);
    auto disc = [&](std::size_t t) { return m.split[t] ? Rational(1) : m.gamma; };

    // Strategies read off the floating-point fixpoint.
    std::vector<std::size_t> act(nS), nxt(nS);
    for (std::size_t s = 0; s < nS; ++s) {
        double best = 0.0;
        bool first = true;
        for (const Choice& c : m.choices[s]) {
            const double b = min_backup(m, s, c, gv.aval);
            if (first || b > best) {
                best = b;
                act[s] = c.action;
                first = false;
            }
        }
        const Choice& c = *m.find_choice(s, act[s]);
        double worst = 0.0;
        first = true;
        for (const Edge& e : c.edges) {
            const double w = edge_discount(m, e.target) * gv.aval[e.target];
            if (first || w < worst) {
                worst = w;
                nxt[s] = e.target;
                first = false;
            }
        }
    }

    // Strategy iteration in exact arithmetic: the opponent best-responds to the
    // current actions, then the maximizer switches only on strict gains.
    for (int outer = 0; outer < 10000; ++outer) {
        std::vector<Rational> v;
        for (int inner = 0;; ++inner) {
            if (inner > 10000) throw std::logic_error("exact aVal: opponent iteration did not settle");
            v = play_values(m, act, nxt);
            bool changed = false;
            for (std::size_t s = 0; s < nS; ++s) {
                const Choice& c = *m.find_choice(s, act[s]);
                Rational cur = disc(nxt[s]) * v[nxt[s]];
                for (const Edge& e : c.edges) {
                    const Rational w = disc(e.target) * v[e.target];
                    if (w < cur) {
                        cur = w;
                        nxt[s] = e.target;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        bool improved = false;
        for (std::size_t s = 0; s < nS; ++s) {
            Rational best = v[s];
            for (const Choice& c : m.choices[s]) {
                Rational worst;
                std::size_t arg = 0;
                bool first = true;
                for (const Edge& e : c.edges) {
                    const Rational w = disc(e.target) * v[e.target];
                    if (first || w < worst) {
                        worst = w;
                        arg = e.target;
                        first = false;
                    }
                }
                if (m.r(s, c.action) + worst > best) {
                    best = m.r(s, c.action) + worst;
                    act[s] = c.action;
                    nxt[s] = arg;
                    improved = true;
                }
            }
        }
        if (!improved) return play_values(m, act, nxt);
    }
    throw std::logic_error("exact aVal: strategy iteration did not settle");
}

EtrSystem pruning_query(const PMdp& m, std::size_t s, std::size_t a, SmtQuery kind) {
    if (!m.enabled(s, a)) throw ModelError("pair " + m.states[s] + " " + m.actions[a] + " is not enabled");
    EtrSystem sys = encode_bellman(m);
    const Polynomial q = Polynomial::variable(q_var(s, a));
    if (kind == SmtQuery::QQ) {
        sys.query = single(Polynomial::variable(v_var(s)) - q, Rel::Le,
                           "V(" + m.states[s] + ") <= Q(" + m.states[s] + "," + m.actions[a] + ")");
    } else {
        const Rational aval = exact_aval(m)[s];
        const bool strict = strict_bound_holds(m, s);
        sys.query = single(q - Polynomial(aval), strict ? Rel::Gt : Rel::Ge,
                           "Q(" + m.states[s] + "," + m.actions[a] + ") " + (strict ? ">" : ">=") + " aVal = " +
                               to_string(aval));
    }
    return sys;
}

namespace {

// Optimal values of the model at sampled graph-preserving valuations. Each
// parameter is drawn from (0, 1) and rejected draws are retried a bounded
// number of times, so a thin region may yield fewer samples than requested.
class Witnesses {
public:
    Witnesses(const PMdp& m, std::size_t n, std::uint64_t seed) : margin_(strict_margin(m)) {
        if (n == 0) return;
        for (const Rational& r : exact_aval(m)) aval_.push_back(to_double(r));
        std::mt19937_64 g(seed);
        for (std::size_t tries = 0; samples_.size() < n && tries < 50 * n; ++tries) {
            Valuation v;
            for (const auto& x : m.params) {
                double u = 0.0;
                while (u == 0.0) u = static_cast<double>(g() >> 11) * 0x1.0p-53;
                v[x] = u;
            }
            if (!is_graph_preserving(m, v)) continue;
            Mdp inst = instantiate(m, v);
            ValueTable t = value_iteration(inst);
            samples_.push_back({std::move(v), std::move(t)});
        }
    }

    // A valuation where the negated pruning condition holds with room to spare.
    const Valuation* find(const PMdp& m, std::size_t s, std::size_t a, SmtQuery kind) const {
        for (const auto& [v, t] : samples_) {
            const double q = t.Q(s, a);
            if (kind == SmtQuery::AvalQ) {
                if (q > aval_[s] + margin_) return &v;
                continue;
            }
            double other = -std::numeric_limits<double>::infinity();
            for (const Choice& c : m.choices[s])
                if (c.action != a) other = std::max(other, t.Q(s, c.action));
            if (q > other + margin_) return &v;
        }
        return nullptr;
    }

private:
    double margin_;
    std::vector<double> aval_;
    std::vector<std::pair<Valuation, ValueTable>> samples_;
};

SmtDecision decide(const PMdp& m, std::size_t s, std::size_t a, SmtQuery kind, const SmtOptions& opt,
                   const Witnesses* witnesses) {
    SmtDecision d;
    if (!m.enabled(s, a)) throw ModelError("pair " + m.states[s] + " " + m.actions[a] + " is not enabled");
    if (m.choices[s].size() < 2) return d;
    if (kind == SmtQuery::AvalQ) d.strict_bound = strict_bound_holds(m, s);
    d.queried = true;
    if (witnesses) {
        const auto start = std::chrono::steady_clock::now();
        if (const Valuation* v = witnesses->find(m, s, a, kind)) {
            d.witnessed = true;
            d.verdict.status = SmtStatus::Sat;
            std::map<std::string, std::string> model;
            for (const auto& [x, value] : *v) {
                char buf[64];
                const auto r = std::to_chars(buf, buf + sizeof buf, value);
                model[param_var(x)] = std::string(buf, r.ptr);
            }
            d.verdict.model = std::move(model);
            d.verdict.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return d;
        }
    }
    const EtrSystem sys = pruning_query(m, s, a, kind);
    d.verdict = solve(emit_smtlib(sys), opt.solver_command, opt.timeout_s);
    d.prunable = d.verdict.status == SmtStatus::Unsat;
    return d;
}

SmtDecision decide(const PMdp& m, std::size_t s, std::size_t a, SmtQuery kind, const SmtOptions& opt) {
    if (opt.witness_samples == 0 || m.choices[s].size() < 2) return decide(m, s, a, kind, opt, nullptr);
    const Witnesses w(m, opt.witness_samples, opt.witness_seed);
    return decide(m, s, a, kind, opt, &w);
}

} // namespace

SmtDecision aval_q_prunable(const PMdp& m, std::size_t s, std::size_t a, const SmtOptions& opt) {
    return decide(m, s, a, SmtQuery::AvalQ, opt);
}

SmtDecision qq_prunable(const PMdp& m, std::size_t s, std::size_t a, const SmtOptions& opt) {
    return decide(m, s, a, SmtQuery::QQ, opt);
}

std::pair<PMdp, PruneResult> smt_prune(const PMdp& m, const SmtPruneOptions& opt) {
    struct Job {
        std::size_t s, a;
        bool prunable = false;
        std::string detail;
        std::string error;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < m.n_states(); ++s)
        if (m.choices[s].size() > 1)
            for (const Choice& c : m.choices[s]) jobs.push_back(Job{s, c.action, false, {}, {}});

    // One set of sampled valuations serves every query of this pass.
    std::optional<Witnesses> witnesses;
    if (opt.smt.witness_samples > 0 && !jobs.empty()) witnesses.emplace(m, opt.smt.witness_samples, opt.smt.witness_seed);
    const Witnesses* w = witnesses ? &*witnesses : nullptr;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            Job& j = jobs[i];
            try {
                if (opt.use_qq) {
                    const SmtDecision d = decide(m, j.s, j.a, SmtQuery::QQ, opt.smt, w);
                    j.detail = "q-q " + to_string(d.verdict.status);
                    j.prunable = d.prunable;
                }
                if (!j.prunable && opt.use_aval_q) {
                    const SmtDecision d = decide(m, j.s, j.a, SmtQuery::AvalQ, opt.smt, w);
                    j.detail += std::string(j.detail.empty() ? "" : ", ") + "aval-q " + to_string(d.verdict.status);
                    j.prunable = d.prunable;
                }
            } catch (const std::exception& e) {
                j.prunable = false;
                j.error = e.what();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.jobs, jobs.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    PruneResult result;
    std::vector<std::pair<std::size_t, std::size_t>> drop;
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        std::vector<const Job*> here;
        std::size_t total = 0;
        for (const Job& j : jobs) {
            if (j.s != s) continue;
            ++total;
            if (!j.error.empty()) result.log.push_back(m.states[s] + " " + m.actions[j.a] + ": " + j.error);
            if (!j.prunable && (j.detail.find("timeout") != std::string::npos || j.detail.find("unknown") != std::string::npos))
                result.log.push_back("undecided " + m.states[s] + " " + m.actions[j.a] + ": " + j.detail);
            if (j.prunable) here.push_back(&j);
        }
        if (!here.empty() && here.size() == total) {
            result.log.push_back("kept " + m.states[s] + " " + m.actions[here.back()->a] +
                                 " to avoid leaving the state without actions");
            here.pop_back();
        }
        for (const Job* j : here) {
            drop.emplace_back(j->s, j->a);
            result.removed.push_back({j->s, j->a, PruneReason::Smt, 1, j->detail});
        }
    }
    return {remove_pairs(m, drop), std::move(result)};
}

} // namespace pspi
