#include "pspi/pspibb.hpp"

#include "pspi/error.hpp"

#include <algorithm>
#include <map>

namespace pspi {

LabelClasses label_classes(const PMdp& m) {
    const std::size_t nS = m.n_states(), nA = m.n_actions();
    LabelClasses lc;
    lc.n_states = nS;
    lc.n_actions = nA;
    lc.sa_class.assign(nS * nA, npos);
    lc.trans_class.resize(nS);

    // Pair key: split flag plus labels, sorted for ordinary states and
    // positional for split states.
    using PairKey = std::pair<bool, std::vector<Polynomial>>;
    std::map<PairKey, std::size_t> pair_ids;
    std::map<std::pair<std::size_t, Polynomial>, std::size_t> label_ids;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> position_ids;

    for (std::size_t s = 0; s < nS; ++s) {
        lc.trans_class[s].resize(m.choices[s].size());
        for (std::size_t ci = 0; ci < m.choices[s].size(); ++ci) {
            const Choice& c = m.choices[s][ci];
            PairKey key{m.split[s], {}};
            for (const Edge& e : c.edges) key.second.push_back(e.label);
            if (!m.split[s]) {
                std::sort(key.second.begin(), key.second.end());
                if (std::adjacent_find(key.second.begin(), key.second.end()) != key.second.end())
                    throw ModelError("pair " + m.states[s] + "/" + m.actions[c.action] +
                                     " has identically labeled successors; normalize the model first");
            }
            const auto [it, fresh] = pair_ids.try_emplace(std::move(key), pair_ids.size());
            const std::size_t cls = it->second;
            lc.sa_class[s * nA + c.action] = cls;

            auto& ids = lc.trans_class[s][ci];
            ids.reserve(c.edges.size());
            for (std::size_t j = 0; j < c.edges.size(); ++j) {
                std::size_t id = 0;
                if (m.split[s]) {
                    id = position_ids.try_emplace({cls, j}, lc.n_trans_classes).first->second;
                } else {
                    id = label_ids.try_emplace({cls, c.edges[j].label}, lc.n_trans_classes).first->second;
                }
                if (id == lc.n_trans_classes) ++lc.n_trans_classes;
                ids.push_back(id);
            }
        }
    }
    lc.n_sa_classes = pair_ids.size();
    return lc;
}

PooledCounts pooled_counts(const CountTable& c, const LabelClasses& lc, const PMdp& m) {
    PooledCounts pc{std::vector<std::uint64_t>(lc.n_sa_classes, 0), std::vector<std::uint64_t>(lc.n_trans_classes, 0)};
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (std::size_t ci = 0; ci < m.choices[s].size(); ++ci) {
            const Choice& ch = m.choices[s][ci];
            pc.sa[lc.pair_class(s, ch.action)] += c.sa(s, ch.action);
            for (std::size_t j = 0; j < ch.edges.size(); ++j)
                pc.trans[lc.trans_class[s][ci][j]] += c.sas(s, ch.action, ch.edges[j].target);
        }
    }
    return pc;
}

std::uint64_t pooled_sa(const PooledCounts& pc, const LabelClasses& lc, std::size_t s, std::size_t a) {
    const std::size_t cls = lc.pair_class(s, a);
    return cls == npos ? 0 : pc.sa[cls];
}

Mdp parametric_mle(const CountTable& c, const PMdp& m, const LabelClasses& lc) {
    // Raw counts must lie inside the support, as for the plain estimate.
    (void)mle_mdp(c, m);
    const PooledCounts pc = pooled_counts(c, lc, m);
    Mdp out = skeleton(m);
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        for (std::size_t ci = 0; ci < m.choices[s].size(); ++ci) {
            const Choice& ch = m.choices[s][ci];
            const std::uint64_t den = pooled_sa(pc, lc, s, ch.action);
            if (den == 0) continue;
            MdpChoice mc{ch.action, {}};
            for (std::size_t j = 0; j < ch.edges.size(); ++j) {
                const std::uint64_t num = pc.trans[lc.trans_class[s][ci][j]];
                if (num > 0)
                    mc.next.push_back({ch.edges[j].target, static_cast<double>(num) / static_cast<double>(den)});
            }
            out.choices[s].push_back(std::move(mc));
        }
    }
    return out;
}

UncertaintySet parametric_uncertainty_set(const CountTable& c, const LabelClasses& lc, std::uint64_t n_wedge,
                                          const PMdp& m) {
    const PooledCounts pc = pooled_counts(c, lc, m);
    UncertaintySet u = uncertainty_set(c, n_wedge, m);
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (const Choice& ch : m.choices[s])
            u.member[s * m.n_actions() + ch.action] = pooled_sa(pc, lc, s, ch.action) < n_wedge ? 1 : 0;
    return u;
}

Policy pspibb_policy(const PMdp& m, const LabelClasses& lc, const CountTable& c, const Policy& pi_b,
                     std::uint64_t n_wedge, const SpibbOptions& opt) {
    return spibb_policy(parametric_mle(c, m, lc), pi_b, parametric_uncertainty_set(c, lc, n_wedge, m), opt);
}

} // namespace pspi
