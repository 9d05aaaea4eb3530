#include "pspi/game.hpp"

#include "pspi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pspi {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double value_scale(const PMdp& m) {
    return std::max(1.0, to_double(m.rmax) / (1.0 - to_double(m.gamma)));
}

double strict_margin(const PMdp& m) { return 1e-7 * value_scale(m); }

double edge_discount(const PMdp& m, std::size_t t) { return m.split[t] ? 1.0 : to_double(m.gamma); }

double min_backup(const PMdp& m, std::size_t s, const Choice& c, const std::vector<double>& v) {
    double worst = kInf;
    for (const Edge& e : c.edges) worst = std::min(worst, edge_discount(m, e.target) * v[e.target]);
    return to_double(m.r(s, c.action)) + worst;
}

double max_backup(const PMdp& m, std::size_t s, const Choice& c, const std::vector<double>& v) {
    double best = -kInf;
    for (const Edge& e : c.edges) best = std::max(best, edge_discount(m, e.target) * v[e.target]);
    return to_double(m.r(s, c.action)) + best;
}

namespace {

// `allowed(s, a)` restricts the maximizer; both fixpoints run side by side.
template <class Allowed>
GameValues solve_game(const PMdp& m, const GameOptions& opt, Allowed allowed) {
    const std::size_t nS = m.n_states();
    // Flattened admissible pairs: reward, then (target, discount) per edge.
    struct Pair {
        double reward;
        std::size_t begin, end;
    };
    std::vector<std::size_t> row_begin(nS + 1, 0);
    std::vector<Pair> pairs;
    std::vector<std::pair<std::size_t, double>> edges;
    const double gamma = to_double(m.gamma);
    for (std::size_t s = 0; s < nS; ++s) {
        row_begin[s] = pairs.size();
        for (const Choice& c : m.choices[s]) {
            if (!allowed(s, c.action)) continue;
            Pair p{to_double(m.r(s, c.action)), edges.size(), 0};
            for (const Edge& e : c.edges) edges.emplace_back(e.target, m.split[e.target] ? 1.0 : gamma);
            p.end = edges.size();
            pairs.push_back(p);
        }
        if (pairs.size() == row_begin[s]) throw ModelError("no admissible action at state " + m.states[s]);
    }
    row_begin[nS] = pairs.size();

    GameValues gv;
    gv.aval.assign(nS, 0.0);
    gv.cval.assign(nS, 0.0);
    std::vector<double> na(nS), nc(nS);
    double residual = kInf;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        residual = 0.0;
        for (std::size_t s = 0; s < nS; ++s) {
            double a = -kInf, c = -kInf;
            for (std::size_t i = row_begin[s]; i < row_begin[s + 1]; ++i) {
                double lo = kInf, hi = -kInf;
                for (std::size_t k = pairs[i].begin; k < pairs[i].end; ++k) {
                    const auto [t, d] = edges[k];
                    lo = std::min(lo, d * gv.aval[t]);
                    hi = std::max(hi, d * gv.cval[t]);
                }
                a = std::max(a, pairs[i].reward + lo);
                c = std::max(c, pairs[i].reward + hi);
            }
            na[s] = a;
            nc[s] = c;
            residual = std::max({residual, std::abs(a - gv.aval[s]), std::abs(c - gv.cval[s])});
        }
        gv.aval.swap(na);
        gv.cval.swap(nc);
        gv.iterations = it;
        if (residual <= opt.tol) return gv;
    }
    throw ConvergenceError("game value iteration did not converge", residual);
}

} // namespace

GameValues aval_cval(const PMdp& m, const GameOptions& opt) {
    return solve_game(m, opt, [](std::size_t, std::size_t) { return true; });
}

GameValues aval_cval_policy(const PMdp& m, const Policy& pi, const GameOptions& opt) {
    if (pi.n_states != m.n_states() || pi.n_actions != m.n_actions())
        throw ModelError("policy dimensions do not match the model");
    return solve_game(m, opt, [&](std::size_t s, std::size_t a) { return pi(s, a) > 0.0; });
}

TransitionSet improving_transitions(const PMdp& m, const GameValues& gv) {
    const double eps = strict_margin(m);
    TransitionSet out;
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (const Choice& c : m.choices[s])
            for (const Edge& e : c.edges)
                if (gv.aval[s] + eps < to_double(m.r(s, c.action)) + edge_discount(m, e.target) * gv.aval[e.target])
                    out.emplace(s, c.action, e.target);
    return out;
}

PMdp worst_case_subpmdp(const PMdp& m, const GameValues& gv) {
    const double eps = strict_margin(m);
    PMdp out = m;
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        auto& row = out.choices[s];
        row.erase(std::remove_if(row.begin(), row.end(),
                                 [&](const Choice& c) { return min_backup(m, s, c, gv.aval) < gv.aval[s] - eps; }),
                  row.end());
        if (row.empty()) throw std::logic_error("worst-case sub-model lost every action at " + m.states[s]);
    }
    return out;
}

std::vector<bool> almost_sure_region(const PMdp& m, const TransitionSet& target) {
    // Node nS is the goal; a target transition is redirected into it.
    const std::size_t nS = m.n_states(), goal = nS;
    std::vector<std::vector<std::vector<std::size_t>>> succ(nS);
    for (std::size_t s = 0; s < nS; ++s) {
        for (const Choice& c : m.choices[s]) {
            std::vector<std::size_t> next;
            for (const Edge& e : c.edges)
                next.push_back(target.count({s, c.action, e.target}) ? goal : e.target);
            succ[s].push_back(std::move(next));
        }
    }
    std::vector<bool> keep(nS + 1, true);
    for (;;) {
        // Pairs that cannot leave `keep`, then states that reach the goal through them.
        std::vector<bool> reach(nS + 1, false);
        reach[goal] = true;
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t s = 0; s < nS; ++s) {
                if (reach[s] || !keep[s]) continue;
                for (const auto& next : succ[s]) {
                    const bool safe = std::all_of(next.begin(), next.end(), [&](std::size_t t) { return keep[t]; });
                    const bool progress = std::any_of(next.begin(), next.end(), [&](std::size_t t) { return reach[t]; });
                    if (safe && progress) {
                        reach[s] = true;
                        grew = true;
                        break;
                    }
                }
            }
        }
        if (reach == keep) break;
        keep = reach;
    }
    keep.pop_back();
    return keep;
}

bool almost_sure_hit(const PMdp& m, const TransitionSet& target, std::size_t from) {
    return almost_sure_region(m, target)[from];
}

std::vector<bool> strict_bound_region(const PMdp& m, const GameValues& gv) {
    const PMdp sub = worst_case_subpmdp(m, gv);
    TransitionSet target;
    for (const auto& [s, a, t] : improving_transitions(m, gv))
        if (sub.enabled(s, a)) target.emplace(s, a, t);
    return almost_sure_region(sub, target);
}

bool strict_bound_holds(const PMdp& m, std::size_t s) { return strict_bound_region(m, aval_cval(m))[s]; }

bool PruneResult::contains(std::size_t s, std::size_t a) const {
    return std::any_of(removed.begin(), removed.end(), [&](const PrunedPair& p) { return p.s == s && p.a == a; });
}

std::string to_string(PruneReason r) {
    switch (r) {
    case PruneReason::Strict: return "strict";
    case PruneReason::NonStrict: return "nonstrict";
    case PruneReason::Smt: return "smt";
    }
    return "?";
}

PMdp remove_pairs(const PMdp& m, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    PMdp out = m;
    for (const auto& [s, a] : pairs) {
        auto& row = out.choices[s];
        row.erase(std::remove_if(row.begin(), row.end(), [a = a](const Choice& c) { return c.action == a; }), row.end());
    }
    return out;
}

std::pair<PMdp, PruneResult> aval_cval_prune(const PMdp& m, const GameOptions& opt) {
    const double eps = strict_margin(m);
    PMdp cur = m;
    PruneResult result;
    for (std::size_t round = 1;; ++round) {
        const GameValues gv = aval_cval(cur, opt);
        const std::vector<bool> strict_bound = strict_bound_region(cur, gv);
        std::vector<std::pair<std::size_t, std::size_t>> drop;
        for (std::size_t s = 0; s < cur.n_states(); ++s) {
            const auto& row = cur.choices[s];
            if (row.size() < 2) continue;
            std::vector<PrunedPair> here;
            for (const Choice& c : row) {
                const double ub = max_backup(cur, s, c, gv.cval);
                std::ostringstream why;
                why.precision(12);
                why << "aVal=" << gv.aval[s] << " bound=" << ub;
                if (gv.aval[s] > ub + eps)
                    here.push_back({s, c.action, PruneReason::Strict, round, why.str()});
                else if (strict_bound[s] && ub <= gv.aval[s] + eps)
                    here.push_back({s, c.action, PruneReason::NonStrict, round, why.str()});
            }
            if (here.size() == row.size()) {
                // Keep the pair with the largest bound so the state stays well-formed.
                auto keep = std::max_element(here.begin(), here.end(), [&](const PrunedPair& x, const PrunedPair& y) {
                    return max_backup(cur, s, *cur.find_choice(s, x.a), gv.cval) <
                           max_backup(cur, s, *cur.find_choice(s, y.a), gv.cval);
                });
                result.log.push_back("kept " + cur.states[s] + " " + cur.actions[keep->a] +
                                     " to avoid leaving the state without actions");
                here.erase(keep);
            }
            for (auto& p : here) {
                drop.emplace_back(p.s, p.a);
                result.removed.push_back(std::move(p));
            }
        }
        if (drop.empty()) break;
        cur = remove_pairs(cur, drop);
    }
    return {std::move(cur), std::move(result)};
}

std::string prune_report(const PMdp& m, const PruneResult& r) {
    std::ostringstream out;
    out << "removed " << r.removed.size() << " pair(s)\n";
    for (const auto& p : r.removed)
        out << "remove " << m.states[p.s] << " " << m.actions[p.a] << " " << to_string(p.reason) << " round "
            << p.round << (p.detail.empty() ? "" : " " + p.detail) << "\n";
    for (const auto& line : r.log) out << "note " << line << "\n";
    return out.str();
}

} // namespace pspi
