#include "pspi/spibb.hpp"

#include "pspi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pspi {

Dataset prefix(const Dataset& d, std::size_t n) {
    Dataset out;
    out.env = d.env;
    out.seed = d.seed;
    out.behavior = d.behavior;
    n = std::min(n, d.steps.size());
    out.steps.assign(d.steps.begin(), d.steps.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t e : d.episode_starts)
        if (e < n) out.episode_starts.push_back(e);
    return out;
}

void CountTable::add(std::size_t s, std::size_t a, std::size_t next, std::uint64_t k) {
    sa_[s * n_actions_ + a] += k;
    sas_[s * n_actions_ + a][next] += k;
}

std::uint64_t CountTable::sas(std::size_t s, std::size_t a, std::size_t next) const {
    const auto& row = sas_[s * n_actions_ + a];
    auto it = row.find(next);
    return it == row.end() ? 0 : it->second;
}

CountTable count(const Dataset& d, std::size_t n_states, std::size_t n_actions) {
    CountTable c(n_states, n_actions);
    for (const Step& st : d.steps) {
        if (st.s >= n_states || st.next >= n_states || st.a >= n_actions)
            throw ModelError("dataset step refers to an unknown state or action");
        c.add(st.s, st.a, st.next);
    }
    return c;
}

Mdp mle_mdp(const CountTable& c, const PMdp& m) {
    Mdp out = skeleton(m);
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (const Choice& ch : m.choices[s]) {
            const std::uint64_t n = c.sa(s, ch.action);
            if (n == 0) continue;
            MdpChoice mc{ch.action, {}};
            for (const auto& [next, k] : c.successors(s, ch.action)) {
                const bool in_support = std::any_of(ch.edges.begin(), ch.edges.end(),
                                                    [&](const Edge& e) { return e.target == next; });
                if (!in_support)
                    throw ModelError("observed transition " + m.states[s] + " " + m.actions[ch.action] + " " +
                                     m.states[next] + " is outside the model support");
                mc.next.push_back({next, static_cast<double>(k) / static_cast<double>(n)});
            }
            out.choices[s].push_back(std::move(mc));
        }
    }
    return out;
}

std::size_t UncertaintySet::size() const {
    return static_cast<std::size_t>(std::count(member.begin(), member.end(), char{1}));
}

bool UncertaintySet::subset_of(const UncertaintySet& other) const {
    if (member.size() != other.member.size()) return false;
    for (std::size_t i = 0; i < member.size(); ++i)
        if (member[i] && !other.member[i]) return false;
    return true;
}

UncertaintySet uncertainty_set(const CountTable& c, std::uint64_t n_wedge, const PMdp& m) {
    UncertaintySet u{m.n_states(), m.n_actions(), std::vector<char>(m.n_states() * m.n_actions(), 0),
                     std::vector<char>(m.n_states() * m.n_actions(), 0)};
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (const Choice& ch : m.choices[s]) {
            const std::size_t i = s * m.n_actions() + ch.action;
            u.allowed[i] = 1;
            u.member[i] = c.sa(s, ch.action) < n_wedge ? 1 : 0;
        }
    }
    return u;
}

namespace {

// One application of the bootstrapping formula. `choice` carries the greedy
// action from the previous round so that near-ties do not flip back and forth.
Policy bootstrap(const Mdp& mle, const Policy& pi_b, const UncertaintySet& u, const std::vector<double>& q,
                 double eps, std::vector<std::size_t>& choice) {
    const std::size_t nS = mle.n_states(), nA = mle.n_actions();
    Policy pi(nS, nA);
    for (std::size_t s = 0; s < nS; ++s) {
        double boot = 0.0;
        for (std::size_t a = 0; a < nA; ++a) {
            if (u.contains(s, a)) {
                pi.at(s, a) = pi_b(s, a);
                boot += pi_b(s, a);
            }
        }
        std::size_t best = npos;
        double best_q = -std::numeric_limits<double>::infinity();
        for (const auto& c : mle.choices[s]) {
            if (u.contains(s, c.action) || !u.is_allowed(s, c.action)) continue;
            const double v = q[s * nA + c.action];
            if (best == npos || v > best_q) {
                best = c.action;
                best_q = v;
            }
        }
        if (best != npos) {
            const std::size_t prev = choice[s];
            if (prev != npos && prev != best && mle.enabled(s, prev) && !u.contains(s, prev) &&
                u.is_allowed(s, prev) && q[s * nA + prev] >= best_q - eps)
                best = prev;
            pi.at(s, best) += 1.0 - boot;
            choice[s] = best;
            continue;
        }
        // Nothing to be greedy over: fall back to pi_b on the allowed actions.
        choice[s] = npos;
        double total = 0.0, kept = 0.0;
        std::size_t n_allowed = 0;
        for (std::size_t a = 0; a < nA; ++a) {
            total += pi_b(s, a);
            if (u.is_allowed(s, a)) {
                kept += pi_b(s, a);
                ++n_allowed;
            }
        }
        for (std::size_t a = 0; a < nA; ++a) {
            if (!u.is_allowed(s, a)) {
                pi.at(s, a) = 0.0;
            } else if (kept == total) {
                pi.at(s, a) = pi_b(s, a);
            } else if (kept > 0.0) {
                pi.at(s, a) = pi_b(s, a) / kept;
            } else {
                pi.at(s, a) = 1.0 / static_cast<double>(n_allowed);
            }
        }
    }
    return pi;
}

} // namespace

Policy spibb_policy(const Mdp& mle, const Policy& pi_b, const UncertaintySet& u, const SpibbOptions& opt) {
    if (pi_b.n_states != mle.n_states() || pi_b.n_actions != mle.n_actions() || u.n_states != mle.n_states() ||
        u.n_actions != mle.n_actions())
        throw ModelError("policy, uncertainty set and MLE model disagree on dimensions");
    const double eps = 1e-10 * std::max(1.0, mle.rmax / (1.0 - mle.gamma));
    std::vector<std::size_t> choice(mle.n_states(), npos);
    Policy pi = bootstrap(mle, pi_b, u, value_iteration(mle).q, eps, choice);
    if (opt.one_shot) return pi;
    for (std::size_t round = 0; round < opt.max_rounds; ++round) {
        const std::vector<std::size_t> before = choice;
        Policy next = bootstrap(mle, pi_b, u, evaluate_exact(mle, pi).q, eps, choice);
        if (choice == before) return next;
        pi = std::move(next);
    }
    return pi;
}

} // namespace pspi
