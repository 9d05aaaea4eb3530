#include "pspi/pmdp.hpp"

#include "pspi/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pspi {

namespace {

template <class C>
const auto* find_in(const std::vector<C>& row, std::size_t a) {
    auto it = std::lower_bound(row.begin(), row.end(), a,
                               [](const C& c, std::size_t x) { return c.action < x; });
    return (it != row.end() && it->action == a) ? &*it : nullptr;
}

std::size_t index_of(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? npos : static_cast<std::size_t>(it - names.begin());
}

} // namespace

const Choice* PMdp::find_choice(std::size_t s, std::size_t a) const { return find_in(choices[s], a); }
const MdpChoice* Mdp::find_choice(std::size_t s, std::size_t a) const { return find_in(choices[s], a); }

std::size_t PMdp::state_index(const std::string& n) const { return index_of(states, n); }
std::size_t PMdp::action_index(const std::string& n) const { return index_of(actions, n); }

std::size_t PMdp::n_pairs() const {
    std::size_t n = 0;
    for (const auto& row : choices) n += row.size();
    return n;
}

std::size_t PMdp::n_transitions() const {
    std::size_t n = 0;
    for (const auto& row : choices)
        for (const auto& c : row) n += c.edges.size();
    return n;
}

void validate(const PMdp& m) {
    const std::size_t nS = m.n_states(), nA = m.n_actions();
    if (nS == 0) throw ModelError("model has no states");
    if (nA == 0) throw ModelError("model has no actions");
    if (m.initial >= nS) throw ModelError("initial state out of range");
    if (m.gamma <= 0 || m.gamma >= 1) throw ModelError("gamma must lie strictly between 0 and 1");
    if (m.rmax < 0) throw ModelError("rmax must be non-negative");
    if (m.reward.size() != nS * nA) throw ModelError("reward table has the wrong size");
    if (m.choices.size() != nS || m.split.size() != nS) throw ModelError("per-state tables have the wrong size");
    if (std::set<std::string>(m.states.begin(), m.states.end()).size() != nS)
        throw ModelError("duplicate state name");
    if (std::set<std::string>(m.actions.begin(), m.actions.end()).size() != nA)
        throw ModelError("duplicate action name");
    const std::set<std::string> params(m.params.begin(), m.params.end());
    if (params.size() != m.params.size()) throw ModelError("duplicate parameter name");

    for (std::size_t s = 0; s < nS; ++s) {
        for (std::size_t a = 0; a < nA; ++a) {
            const Rational& r = m.r(s, a);
            if (r > m.rmax || -r > m.rmax)
                throw ModelError("reward of " + m.states[s] + "/" + m.actions[a] + " exceeds rmax");
        }
        const auto& row = m.choices[s];
        if (row.empty()) throw ModelError("state " + m.states[s] + " has no enabled action");
        for (std::size_t i = 0; i < row.size(); ++i) {
            const Choice& c = row[i];
            if (c.action >= nA) throw ModelError("action index out of range");
            if (i > 0 && row[i - 1].action >= c.action) throw ModelError("choices not sorted by action");
            if (c.edges.empty())
                throw ModelError("pair " + m.states[s] + "/" + m.actions[c.action] + " has empty support");
            for (std::size_t j = 0; j < c.edges.size(); ++j) {
                const Edge& e = c.edges[j];
                if (e.target >= nS) throw ModelError("transition target out of range");
                if (j > 0 && c.edges[j - 1].target >= e.target)
                    throw ModelError("duplicate or unsorted transition from " + m.states[s] + "/" +
                                     m.actions[c.action]);
                if (e.label.is_zero())
                    throw ModelError("zero label on " + m.states[s] + "/" + m.actions[c.action]);
                for (const auto& x : e.label.variables())
                    if (!params.count(x)) throw ModelError("undeclared parameter '" + x + "'");
            }
        }
    }
}

std::map<std::string, Rational> exact_valuation(const Valuation& v) {
    std::map<std::string, Rational> out;
    for (const auto& [k, x] : v) out.emplace(k, from_double(x));
    return out;
}

namespace {

// Empty string when graph-preserving, otherwise the first violation found.
std::string graph_preserving_violation(const PMdp& m, const Valuation& v, double tol) {
    for (const auto& x : m.params) {
        auto it = v.find(x);
        if (it == v.end()) return "parameter '" + x + "' is not assigned";
        if (!std::isfinite(it->second)) return "parameter '" + x + "' is not finite";
    }
    const auto exact = exact_valuation(v);
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (const Choice& c : m.choices[s]) {
            double sum = 0.0;
            for (const Edge& e : c.edges) {
                if (e.label.evaluate_exact(exact) <= 0)
                    return "label '" + e.label.to_string() + "' at " + m.states[s] + " is not positive";
                const double p = e.label.evaluate(v);
                if (p > 1.0 + tol)
                    return "label '" + e.label.to_string() + "' at " + m.states[s] + " exceeds 1";
                sum += p;
            }
            if (std::abs(sum - 1.0) > tol)
                return "row " + m.states[s] + "/" + m.actions[c.action] + " sums to " + std::to_string(sum);
        }
    }
    return {};
}

} // namespace

bool is_graph_preserving(const PMdp& m, const Valuation& v, double tol) {
    return graph_preserving_violation(m, v, tol).empty();
}

Mdp skeleton(const PMdp& m) {
    Mdp out;
    out.name = m.name;
    out.states = m.states;
    out.actions = m.actions;
    out.initial = m.initial;
    out.gamma = to_double(m.gamma);
    out.rmax = to_double(m.rmax);
    out.reward.reserve(m.reward.size());
    for (const auto& r : m.reward) out.reward.push_back(to_double(r));
    out.choices.assign(m.n_states(), {});
    out.split = m.split;
    return out;
}

Mdp instantiate(const PMdp& m, const Valuation& v, double tol) {
    if (auto why = graph_preserving_violation(m, v, tol); !why.empty())
        throw ValuationError("valuation is not graph-preserving: " + why);
    Mdp out = skeleton(m);
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (const Choice& c : m.choices[s]) {
            MdpChoice mc{c.action, {}};
            mc.next.reserve(c.edges.size());
            for (const Edge& e : c.edges) mc.next.push_back({e.target, e.label.evaluate(v)});
            out.choices[s].push_back(std::move(mc));
        }
    }
    return out;
}

bool has_distinct_labels(const PMdp& m) {
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        if (m.split[s]) continue;
        for (const Choice& c : m.choices[s]) {
            std::vector<const Polynomial*> labels;
            for (const Edge& e : c.edges) labels.push_back(&e.label);
            std::sort(labels.begin(), labels.end(), [](auto* x, auto* y) { return *x < *y; });
            for (std::size_t i = 1; i < labels.size(); ++i)
                if (*labels[i - 1] == *labels[i]) return false;
        }
    }
    return true;
}

namespace {

void normalize_once(PMdp& m) {
    const std::size_t nA = m.n_actions();
    std::set<std::string> names(m.states.begin(), m.states.end());
    const std::size_t original = m.n_states();
    for (std::size_t s = 0; s < original; ++s) {
        if (m.split[s]) continue;
        for (std::size_t ci = 0; ci < m.choices[s].size(); ++ci) {
            const std::size_t a = m.choices[s][ci].action;
            std::map<Polynomial, std::vector<std::size_t>> groups;
            for (const Edge& e : m.choices[s][ci].edges) groups[e.label].push_back(e.target);
            if (groups.size() == m.choices[s][ci].edges.size()) continue;

            std::vector<Edge> edges;
            for (auto& [label, targets] : groups) {
                if (targets.size() == 1) {
                    edges.push_back({targets[0], label});
                    continue;
                }
                std::string name = m.states[s] + "~" + m.actions[a];
                for (int k = 1; names.count(name); ++k) name = m.states[s] + "~" + m.actions[a] + "~" + std::to_string(k);
                names.insert(name);
                const std::size_t f = m.states.size();
                m.states.push_back(name);
                m.split.push_back(true);
                m.reward.resize(m.reward.size() + nA, Rational(0));
                const Rational share(1, static_cast<long long>(targets.size()));
                Choice fc{a, {}};
                for (std::size_t t : targets) {
                    fc.edges.push_back({t, Polynomial(share)});
                }
                m.choices.push_back({std::move(fc)});
                edges.push_back({f, label * Polynomial(Rational(static_cast<long long>(targets.size())))});
            }
            std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.target < y.target; });
            m.choices[s][ci].edges = std::move(edges);
        }
    }
}

} // namespace

PMdp normalize_distinct_labels(const PMdp& m) {
    PMdp out = m;
    // A merged label can collide with an existing one (x, x, 2x), hence the loop.
    while (!has_distinct_labels(out)) normalize_once(out);
    return out;
}

} // namespace pspi
