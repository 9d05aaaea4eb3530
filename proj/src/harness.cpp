#include "pspi/harness.hpp"

#include "pspi/bounds.hpp"
#include "pspi/error.hpp"
#include "pspi/pspibb.hpp"
#include "pspi/smt.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace pspi {

std::uint64_t Rng::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t seed_stream(std::uint64_t master, std::uint64_t index) {
    // Two rounds so that neighbouring indices land far apart.
    Rng r(master ^ (index * 0xd1b54a32d192ed03ULL));
    r.next();
    return r.next();
}

std::size_t sample_index(const std::vector<double>& weights, double u) {
    double acc = 0.0;
    std::size_t last = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last = i;
        acc += weights[i];
        if (u < acc) return i;
    }
    if (last == weights.size()) throw std::invalid_argument("no positive weight to sample from");
    return last;
}

Dataset sample_dataset(const Mdp& m, const Policy& pi, std::size_t n_steps, std::uint64_t seed, std::size_t horizon,
                       const std::vector<bool>& terminal) {
    if (horizon == 0) throw std::invalid_argument("horizon must be positive");
    Dataset d;
    d.env = m.name;
    d.seed = seed;
    d.steps.reserve(n_steps);
    Rng rng(seed);
    std::vector<double> w(m.n_actions());
    std::size_t s = m.initial, t = 0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        if (t == 0) d.episode_starts.push_back(i);
        for (std::size_t a = 0; a < m.n_actions(); ++a) w[a] = m.enabled(s, a) ? pi(s, a) : 0.0;
        const std::size_t a = sample_index(w, rng.uniform());
        const MdpChoice& c = *m.find_choice(s, a);
        std::vector<double> p;
        p.reserve(c.next.size());
        for (const auto& tr : c.next) p.push_back(tr.prob);
        const std::size_t next = c.next[sample_index(p, rng.uniform())].target;
        d.steps.push_back({s, a, next});
        ++t;
        if (t == horizon || (!terminal.empty() && terminal[next])) {
            s = m.initial;
            t = 0;
        } else {
            s = next;
        }
    }
    return d;
}

double evaluate_policy_true(const Mdp& m_true, const Policy& pi) { return evaluate_exact(m_true, pi).v[m_true.initial]; }

double cvar(std::vector<double> values, double fraction) {
    if (values.empty()) throw std::invalid_argument("cvar of an empty list");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("cvar fraction must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(values.size()) - 1e-9)));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += values[i];
    return sum / static_cast<double>(k);
}

std::string to_string(Pruning p) {
    switch (p) {
    case Pruning::None: return "none";
    case Pruning::Game: return "game";
    case Pruning::Smt: return "smt";
    }
    return "?";
}

Pruning parse_pruning(const std::string& text) {
    if (text == "none") return Pruning::None;
    if (text == "game") return Pruning::Game;
    if (text == "smt") return Pruning::Smt;
    throw std::invalid_argument("unknown pruning '" + text + "'");
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) throw std::invalid_argument("no methods configured");
    if (cfg.sizes.empty()) throw std::invalid_argument("no dataset sizes configured");
    for (std::size_t i = 1; i < cfg.sizes.size(); ++i)
        if (cfg.sizes[i] <= cfg.sizes[i - 1]) throw std::invalid_argument("dataset sizes must be strictly increasing");
    if (cfg.n_seeds == 0) throw std::invalid_argument("at least one seed is required");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (cfg.alpha && !(*cfg.alpha >= 0.0 && *cfg.alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
    if (cfg.horizon && *cfg.horizon == 0) throw std::invalid_argument("horizon must be positive");
    if (cfg.jobs == 0) throw std::invalid_argument("jobs must be positive");
}

namespace {

std::string fmt(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view text, const std::string& what) {
    T v{};
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw std::invalid_argument("bad " + what + " '" + std::string(text) + "'");
    return v;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string method_text(const Method& m) { return m.name() + ":" + to_string(m.pruning); }

} // namespace

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key, value, extra;
        if (!(ls >> key)) continue;
        if (!(ls >> value) || (ls >> extra))
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key value'");
        try {
            if (key == "env") {
                cfg.env = value;
            } else if (key == "methods") {
                cfg.methods.clear();
                for (const auto& item : split(value, ',')) {
                    const auto parts = split(item, ':');
                    if (parts.size() > 2 || (parts[0] != "spibb" && parts[0] != "pspibb"))
                        throw std::invalid_argument("bad method '" + item + "'");
                    cfg.methods.push_back(
                        Method{parts[0] == "pspibb", parts.size() == 2 ? parse_pruning(parts[1]) : Pruning::None});
                }
            } else if (key == "n_wedge") {
                cfg.n_wedge = parse_number<std::uint64_t>(value, "n_wedge");
            } else if (key == "delta") {
                cfg.delta = parse_number<double>(value, "delta");
            } else if (key == "sizes") {
                cfg.sizes.clear();
                for (const auto& item : split(value, ',')) cfg.sizes.push_back(parse_number<std::size_t>(item, "size"));
            } else if (key == "seeds") {
                cfg.n_seeds = parse_number<std::size_t>(value, "seed count");
            } else if (key == "alpha") {
                cfg.alpha = parse_number<double>(value, "alpha");
            } else if (key == "gamma") {
                (void)parse_rational(value);
                cfg.gamma = value;
            } else if (key == "horizon") {
                cfg.horizon = parse_number<std::size_t>(value, "horizon");
            } else if (key == "master_seed") {
                cfg.master_seed = parse_number<std::uint64_t>(value, "master seed");
            } else if (key == "jobs") {
                cfg.jobs = parse_number<std::size_t>(value, "jobs");
            } else if (key == "smt_timeout") {
                cfg.smt_timeout = parse_number<double>(value, "smt timeout");
            } else if (key == "smt_witness_samples") {
                cfg.smt_witness_samples = parse_number<std::size_t>(value, "witness sample count");
            } else {
                throw std::invalid_argument("unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate(cfg);
    return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "env " << cfg.env << "\nmethods ";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) out << (i ? "," : "") << method_text(cfg.methods[i]);
    out << "\nn_wedge " << cfg.n_wedge << "\ndelta " << fmt(cfg.delta) << "\nsizes ";
    for (std::size_t i = 0; i < cfg.sizes.size(); ++i) out << (i ? "," : "") << cfg.sizes[i];
    out << "\nseeds " << cfg.n_seeds << "\n";
    if (cfg.alpha) out << "alpha " << fmt(*cfg.alpha) << "\n";
    if (cfg.gamma) out << "gamma " << *cfg.gamma << "\n";
    if (cfg.horizon) out << "horizon " << *cfg.horizon << "\n";
    out << "master_seed " << cfg.master_seed << "\njobs " << cfg.jobs << "\nsmt_timeout " << fmt(cfg.smt_timeout)
        << "\nsmt_witness_samples " << cfg.smt_witness_samples << "\n";
    return out.str();
}

namespace {

struct Prepared {
    PMdp model;
    std::optional<LabelClasses> classes;
};

Prepared prepare(const PMdp& m, Pruning pruning, const ExperimentConfig& cfg, bool need_classes,
                 PruningSummary& summary) {
    Prepared p{m, std::nullopt};
    summary.pruning = pruning;
    if (pruning != Pruning::None) {
        auto [pruned, game] = aval_cval_prune(m);
        summary.removed = game.removed.size();
        summary.report = prune_report(m, game);
        if (pruning == Pruning::Smt) {
            // SMT queries only on the pairs the game-based pass kept.
            SmtPruneOptions opt;
            opt.smt.timeout_s = cfg.smt_timeout;
            opt.smt.witness_samples = cfg.smt_witness_samples;
            opt.jobs = cfg.jobs;
            auto [after, smt] = smt_prune(pruned, opt);
            summary.removed += smt.removed.size();
            summary.report += prune_report(pruned, smt);
            pruned = std::move(after);
        }
        p.model = std::move(pruned);
    }
    if (need_classes) p.classes = label_classes(p.model);
    return p;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    ExperimentResult result;
    result.config = cfg;

    Benchmark b = build_benchmark(cfg.env);
    if (cfg.gamma) {
        b.model.gamma = parse_rational(*cfg.gamma);
        validate(b.model);
    }
    const double alpha = cfg.alpha.value_or(b.spec.alpha);
    const std::size_t horizon = cfg.horizon.value_or(b.spec.horizon);
    const Mdp truth = instantiate(b.model, b.spec.truth);
    const Policy pi_b = behavior_policy(truth, alpha);
    result.baseline = evaluate_policy_true(truth, pi_b);

    std::map<Pruning, Prepared> prepared;
    for (const Method& m : cfg.methods) {
        if (prepared.count(m.pruning)) continue;
        const bool need_classes = std::any_of(cfg.methods.begin(), cfg.methods.end(), [&](const Method& x) {
            return x.pruning == m.pruning && x.parametric;
        });
        PruningSummary summary;
        prepared.emplace(m.pruning, prepare(b.model, m.pruning, cfg, need_classes, summary));
        if (m.pruning != Pruning::None) result.pruning.push_back(std::move(summary));
    }
    // A parametric method may share a pruning mode with a plain one listed first.
    for (const Method& m : cfg.methods)
        if (m.parametric && !prepared.at(m.pruning).classes)
            prepared.at(m.pruning).classes = label_classes(prepared.at(m.pruning).model);

    const double gamma = to_double(b.model.gamma);
    const double v_max = to_double(b.model.rmax) / (1.0 - gamma);
    const std::size_t nS = b.model.n_states(), nA = b.model.n_actions();

    result.seeds.resize(cfg.n_seeds);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.n_seeds; i = next++) {
            SeedResult& sr = result.seeds[i];
            sr.index = i;
            sr.seed = seed_stream(cfg.master_seed, i);
            sr.baseline = result.baseline;
            try {
                const Dataset data = sample_dataset(truth, pi_b, cfg.sizes.back(), sr.seed, horizon, b.spec.terminal);
                sr.runs.assign(cfg.methods.size(), std::vector<RunOutcome>(cfg.sizes.size()));
                CountTable counts(nS, nA);
                std::size_t used = 0;
                for (std::size_t k = 0; k < cfg.sizes.size(); ++k) {
                    for (; used < cfg.sizes[k]; ++used) {
                        const Step& st = data.steps[used];
                        counts.add(st.s, st.a, st.next);
                    }
                    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
                        const Method& method = cfg.methods[mi];
                        const Prepared& p = prepared.at(method.pruning);
                        Mdp est;
                        UncertaintySet u;
                        if (method.parametric) {
                            est = parametric_mle(counts, p.model, *p.classes);
                            u = parametric_uncertainty_set(counts, *p.classes, cfg.n_wedge, p.model);
                        } else {
                            est = mle_mdp(counts, p.model);
                            u = uncertainty_set(counts, cfg.n_wedge, p.model);
                        }
                        const Policy pi_i = spibb_policy(est, pi_b, u);
                        RunOutcome& out = sr.runs[mi][k];
                        out.performance = evaluate_policy_true(truth, pi_i);
                        out.mle_gap = evaluate_exact(est, pi_b).v[est.initial] - evaluate_exact(est, pi_i).v[est.initial];
                        out.zeta = zeta_bound(cfg.n_wedge, cfg.delta, v_max, gamma, out.mle_gap, nS, nA);
                        out.bootstrapped = u.size();
                    }
                }
            } catch (const std::exception& e) {
                sr.runs.clear();
                sr.error = e.what();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.n_seeds));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (const auto& sr : result.seeds) result.failures += sr.error.empty() ? 0 : 1;
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        for (std::size_t k = 0; k < cfg.sizes.size(); ++k) {
            std::vector<double> values;
            for (const auto& sr : result.seeds)
                if (sr.error.empty()) values.push_back(sr.runs[mi][k].performance);
            if (values.empty()) continue;
            CurvePoint pt;
            pt.env = cfg.env;
            pt.method = cfg.methods[mi];
            pt.n_wedge = cfg.n_wedge;
            pt.size = cfg.sizes[k];
            double sum = 0.0;
            for (double v : values) sum += v;
            pt.mean = sum / static_cast<double>(values.size());
            pt.cvar10 = cvar(values, 0.1);
            pt.cvar1 = cvar(values, 0.01);
            pt.baseline = result.baseline;
            result.curve.push_back(pt);
        }
    }
    std::stable_sort(result.curve.begin(), result.curve.end(), [](const CurvePoint& x, const CurvePoint& y) {
        return std::tuple(x.method.name(), x.method.pruning, x.size) < std::tuple(y.method.name(), y.method.pruning, y.size);
    });
    return result;
}

std::string emit_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream out;
    out << "env,method,pruning,n_wedge,size,mean,cvar10,cvar1,baseline\n";
    for (const auto& p : curve)
        out << p.env << "," << p.method.name() << "," << to_string(p.method.pruning) << "," << p.n_wedge << ","
            << p.size << "," << fmt(p.mean) << "," << fmt(p.cvar10) << "," << fmt(p.cvar1) << "," << fmt(p.baseline)
            << "\n";
    return out.str();
}

std::vector<CurvePoint> parse_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != "env,method,pruning,n_wedge,size,mean,cvar10,cvar1,baseline")
        throw std::invalid_argument("missing or unexpected CSV header");
    std::vector<CurvePoint> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 9) throw std::invalid_argument("CSV row with " + std::to_string(f.size()) + " fields");
        if (f[1] != "spibb" && f[1] != "pspibb") throw std::invalid_argument("unknown method '" + f[1] + "'");
        CurvePoint p;
        p.env = f[0];
        p.method = Method{f[1] == "pspibb", parse_pruning(f[2])};
        p.n_wedge = parse_number<std::uint64_t>(f[3], "n_wedge");
        p.size = parse_number<std::size_t>(f[4], "size");
        p.mean = parse_number<double>(f[5], "mean");
        p.cvar10 = parse_number<double>(f[6], "cvar10");
        p.cvar1 = parse_number<double>(f[7], "cvar1");
        p.baseline = parse_number<double>(f[8], "baseline");
        out.push_back(p);
    }
    return out;
}

std::string emit_raw_csv(const ExperimentResult& r) {
    std::ostringstream out;
    out << "env,seed_index,seed,method,pruning,size,performance,baseline,zeta,bootstrapped,error\n";
    const auto& cfg = r.config;
    for (const auto& sr : r.seeds) {
        if (!sr.error.empty()) {
            std::string msg = sr.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << cfg.env << "," << sr.index << "," << sr.seed << ",,,,,," << fmt(sr.baseline) << ",," << msg << "\n";
            continue;
        }
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
            for (std::size_t k = 0; k < cfg.sizes.size(); ++k) {
                const RunOutcome& o = sr.runs[mi][k];
                out << cfg.env << "," << sr.index << "," << sr.seed << "," << cfg.methods[mi].name() << ","
                    << to_string(cfg.methods[mi].pruning) << "," << cfg.sizes[k] << "," << fmt(o.performance) << ","
                    << fmt(sr.baseline) << "," << fmt(o.zeta) << "," << o.bootstrapped << ",\n";
            }
    }
    return out.str();
}

std::string experiment_summary(const ExperimentResult& r) {
    std::ostringstream out;
    out.precision(8);
    const auto& cfg = r.config;
    out << "env " << cfg.env << " seeds " << cfg.n_seeds << " failures " << r.failures << "\n";
    out << "baseline " << r.baseline << "\n";
    for (const auto& p : r.pruning) out << "pruning " << to_string(p.pruning) << " removed " << p.removed << "\n";
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        double worst = std::numeric_limits<double>::infinity();
        double max_zeta = 0.0;
        for (const auto& sr : r.seeds) {
            if (!sr.error.empty()) continue;
            for (const auto& o : sr.runs[mi]) {
                worst = std::min(worst, o.performance - (sr.baseline - o.zeta));
                max_zeta = std::max(max_zeta, o.zeta);
            }
        }
        out << "method " << method_text(cfg.methods[mi]) << " safety margin " << worst << " max zeta " << max_zeta
            << "\n";
    }
    for (const auto& sr : r.seeds)
        if (!sr.error.empty()) out << "seed " << sr.index << " failed: " << sr.error << "\n";
    return out.str();
}

} // namespace pspi
