#include "pspi/solve.hpp"

#include "pspi/error.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pspi {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Policy uniform_policy(const Mdp& m) {
    Policy pi(m.n_states(), m.n_actions());
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        const auto& row = m.choices[s];
        for (const auto& c : row) pi.at(s, c.action) = 1.0 / static_cast<double>(row.size());
    }
    return pi;
}

Policy deterministic_policy(const Mdp& m, const std::vector<std::size_t>& choice) {
    Policy pi(m.n_states(), m.n_actions());
    for (std::size_t s = 0; s < m.n_states(); ++s)
        if (choice[s] != npos) pi.at(s, choice[s]) = 1.0;
    return pi;
}

bool is_valid_policy(const Mdp& m, const Policy& pi, double tol) {
    if (pi.n_states != m.n_states() || pi.n_actions != m.n_actions()) return false;
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        double sum = 0.0;
        for (std::size_t a = 0; a < m.n_actions(); ++a) {
            const double p = pi(s, a);
            if (p < 0.0) return false;
            if (p > 0.0 && !m.enabled(s, a)) return false;
            sum += p;
        }
        if (m.choices[s].empty() ? sum != 0.0 : std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

double backup(const Mdp& m, std::size_t s, const MdpChoice& c, const std::vector<double>& v) {
    double q = m.r(s, c.action);
    for (const auto& t : c.next) q += m.discount(t.target) * t.prob * v[t.target];
    return q;
}

ValueTable value_iteration(const Mdp& m, const SolveOptions& opt) {
    const std::size_t nS = m.n_states(), nA = m.n_actions();
    ValueTable t;
    t.n_actions = nA;
    t.v.assign(nS, 0.0);
    t.q.assign(nS * nA, kNegInf);
    std::vector<double> next(nS, 0.0);
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        double residual = 0.0;
        for (std::size_t s = 0; s < nS; ++s) {
            double best = m.choices[s].empty() ? 0.0 : kNegInf;
            for (const auto& c : m.choices[s]) {
                const double q = backup(m, s, c, t.v);
                t.q[s * nA + c.action] = q;
                best = std::max(best, q);
            }
            next[s] = best;
            residual = std::max(residual, std::abs(best - t.v[s]));
        }
        t.v.swap(next);
        t.iterations = it;
        t.residual = residual;
        if (residual <= opt.tol) {
            // Q from the final V so that V = max Q holds up to tol.
            for (std::size_t s = 0; s < nS; ++s)
                for (const auto& c : m.choices[s]) t.q[s * nA + c.action] = backup(m, s, c, t.v);
            return t;
        }
    }
    throw ConvergenceError("value iteration did not converge", t.residual);
}

namespace {

void policy_q(const Mdp& m, const Policy& pi, ValueTable& t) {
    const std::size_t nA = m.n_actions();
    t.q.assign(m.n_states() * nA, kNegInf);
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (std::size_t a = 0; a < nA; ++a)
            if (pi(s, a) > 0.0) t.q[s * nA + a] = m.r(s, a);
        for (const auto& c : m.choices[s]) t.q[s * nA + c.action] = backup(m, s, c, t.v);
    }
}

double policy_backup(const Mdp& m, const Policy& pi, std::size_t s, const std::vector<double>& v) {
    if (m.choices[s].empty()) return 0.0;
    double total = 0.0;
    for (std::size_t a = 0; a < m.n_actions(); ++a) {
        const double p = pi(s, a);
        if (p <= 0.0) continue;
        const MdpChoice* c = m.find_choice(s, a);
        total += p * (c ? backup(m, s, *c, v) : m.r(s, a));
    }
    return total;
}

} // namespace

ValueTable policy_evaluation(const Mdp& m, const Policy& pi, const SolveOptions& opt) {
    const std::size_t nS = m.n_states();
    ValueTable t;
    t.n_actions = m.n_actions();
    t.v.assign(nS, 0.0);
    std::vector<double> next(nS, 0.0);
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        double residual = 0.0;
        for (std::size_t s = 0; s < nS; ++s) {
            next[s] = policy_backup(m, pi, s, t.v);
            residual = std::max(residual, std::abs(next[s] - t.v[s]));
        }
        t.v.swap(next);
        t.iterations = it;
        t.residual = residual;
        if (residual <= opt.tol) {
            policy_q(m, pi, t);
            return t;
        }
    }
    throw ConvergenceError("policy evaluation did not converge", t.residual);
}

ValueTable evaluate_exact(const Mdp& m, const Policy& pi) {
    const std::size_t nS = m.n_states();
    const auto n = static_cast<Eigen::Index>(nS);
    std::vector<Eigen::Triplet<double>> entries;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t s = 0; s < nS; ++s) {
        const auto row = static_cast<Eigen::Index>(s);
        entries.emplace_back(row, row, 1.0);
        if (m.choices[s].empty()) continue;
        for (std::size_t a = 0; a < m.n_actions(); ++a) {
            const double p = pi(s, a);
            if (p <= 0.0) continue;
            rhs[row] += p * m.r(s, a);
            if (const MdpChoice* c = m.find_choice(s, a))
                for (const auto& tr : c->next)
                    entries.emplace_back(row, static_cast<Eigen::Index>(tr.target),
                                         -p * m.discount(tr.target) * tr.prob);
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw ConvergenceError("policy evaluation system is singular", 0.0);
    Eigen::VectorXd x = lu.solve(rhs);
    ValueTable t;
    t.n_actions = m.n_actions();
    t.v.assign(x.data(), x.data() + n);
    policy_q(m, pi, t);
    return t;
}

std::vector<std::size_t> greedy_actions(const Mdp& m, const ValueTable& t, double eps) {
    std::vector<std::size_t> out(m.n_states(), npos);
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        double best = kNegInf;
        for (const auto& c : m.choices[s]) {
            const double q = t.Q(s, c.action);
            if (out[s] == npos || q > best + eps) {
                best = q;
                out[s] = c.action;
            }
        }
    }
    return out;
}

std::pair<Policy, ValueTable> policy_iteration(const Mdp& m, const SolveOptions& opt) {
    std::vector<std::size_t> choice(m.n_states(), npos);
    for (std::size_t s = 0; s < m.n_states(); ++s)
        if (!m.choices[s].empty()) choice[s] = m.choices[s].front().action;
    const double scale = std::max(1.0, m.rmax / (1.0 - m.gamma));
    const double eps = 1e-12 * scale;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        Policy pi = deterministic_policy(m, choice);
        ValueTable t = evaluate_exact(m, pi);
        t.iterations = it;
        bool changed = false;
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            if (choice[s] == npos) continue;
            double best_q = kNegInf;
            for (const auto& c : m.choices[s]) best_q = std::max(best_q, t.Q(s, c.action));
            if (t.Q(s, choice[s]) >= best_q - eps) continue;
            // Switch only on a real improvement, then to the lowest near-maximal index.
            std::size_t best = choice[s];
            for (const auto& c : m.choices[s]) {
                if (t.Q(s, c.action) >= best_q - eps) {
                    best = c.action;
                    break;
                }
            }
            if (best != choice[s]) {
                choice[s] = best;
                changed = true;
            }
        }
        if (!changed) {
            for (std::size_t s = 0; s < m.n_states(); ++s)
                for (std::size_t a = 0; a < m.n_actions(); ++a)
                    if (!m.enabled(s, a)) t.q[s * m.n_actions() + a] = kNegInf;
            return {std::move(pi), std::move(t)};
        }
    }
    throw ConvergenceError("policy iteration did not converge", 0.0);
}

} // namespace pspi
