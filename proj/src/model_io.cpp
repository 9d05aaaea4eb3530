#include "pspi/model_io.hpp"

#include "pspi/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pspi {

namespace {

struct Line {
    int number = 0;
    std::string_view rest;  // text after comment removal
    std::vector<std::string_view> tokens;
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> out;
    int number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        ++number;
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        Line line{number, raw, {}};
        std::size_t i = 0;
        while (i < raw.size()) {
            while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
            const std::size_t start = i;
            while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
            if (i > start) line.tokens.push_back(raw.substr(start, i - start));
        }
        if (!line.tokens.empty()) out.push_back(line);
        if (end == text.size()) break;
        pos = end + 1;
    }
    return out;
}

// Text following the first n tokens of the line.
std::string_view tail_after(const Line& line, std::size_t n) {
    const std::string_view last = line.tokens[n - 1];
    const std::size_t offset = static_cast<std::size_t>(last.data() - line.rest.data()) + last.size();
    return line.rest.substr(offset);
}

void expect_arity(const Line& line, std::size_t n) {
    if (line.tokens.size() != n)
        throw ModelError("'" + std::string(line.tokens[0]) + "' expects " + std::to_string(n - 1) + " argument(s)",
                         line.number);
}

Rational rational_at(const Line& line, std::size_t i) {
    try {
        return parse_rational(line.tokens[i]);
    } catch (const std::invalid_argument& e) {
        throw ModelError(e.what(), line.number);
    }
}

std::size_t lookup(const std::map<std::string, std::size_t, std::less<>>& index, std::string_view name,
                   const char* what, int line) {
    auto it = index.find(name);
    if (it == index.end()) throw ModelError(std::string("unknown ") + what + " '" + std::string(name) + "'", line);
    return it->second;
}

std::map<std::string, std::size_t, std::less<>> make_index(const std::vector<std::string>& names) {
    std::map<std::string, std::size_t, std::less<>> out;
    for (std::size_t i = 0; i < names.size(); ++i) out.emplace(names[i], i);
    return out;
}

void check_name(const std::string& name, const char* what) {
    if (name.empty() || name.find('#') != std::string::npos ||
        std::any_of(name.begin(), name.end(), [](unsigned char c) { return std::isspace(c); }))
        throw ModelError(std::string("invalid ") + what + " name '" + name + "'");
}

std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

} // namespace

PMdp parse_pmdp(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines.front().tokens[0] != "pmdp") throw ModelError("missing 'pmdp <name>' header", 1);
    PMdp m;
    bool have_gamma = false, have_rmax = false, have_initial = false;

    // Declarations first so that uses may precede them.
    std::set<std::string, std::less<>> seen_state, seen_action, seen_param;
    for (const Line& line : lines) {
        const std::string_view kw = line.tokens[0];
        if (kw == "pmdp") {
            if (&line != &lines.front()) throw ModelError("duplicate header", line.number);
            expect_arity(line, 2);
            m.name = std::string(line.tokens[1]);
        } else if (kw == "state" || kw == "action" || kw == "param") {
            expect_arity(line, 2);
            const std::string name(line.tokens[1]);
            auto& seen = kw == "state" ? seen_state : kw == "action" ? seen_action : seen_param;
            if (!seen.insert(name).second)
                throw ModelError("duplicate " + std::string(kw) + " '" + name + "'", line.number);
            if (kw == "param") {
                const bool ident = (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_') &&
                                   std::all_of(name.begin(), name.end(), [](unsigned char c) {
                                       return std::isalnum(c) || c == '_';
                                   });
                if (!ident) throw ModelError("parameter names must be identifiers", line.number);
            }
            (kw == "state" ? m.states : kw == "action" ? m.actions : m.params).push_back(name);
        }
    }
    if (m.states.empty()) throw ModelError("no states declared");
    if (m.actions.empty()) throw ModelError("no actions declared");
    const auto states = make_index(m.states), actions = make_index(m.actions);
    const std::size_t nA = m.actions.size();
    m.reward.assign(m.states.size() * nA, Rational(0));
    m.choices.assign(m.states.size(), {});
    m.split.assign(m.states.size(), false);
    std::vector<char> reward_set(m.reward.size(), 0);
    std::vector<std::map<std::size_t, std::map<std::size_t, Polynomial>>> trans(m.states.size());

    for (const Line& line : lines) {
        const std::string_view kw = line.tokens[0];
        if (kw == "pmdp" || kw == "state" || kw == "action" || kw == "param") continue;
        if (kw == "gamma") {
            expect_arity(line, 2);
            if (have_gamma) throw ModelError("duplicate gamma", line.number);
            m.gamma = rational_at(line, 1);
            if (m.gamma <= 0 || m.gamma >= 1) throw ModelError("gamma must lie strictly between 0 and 1", line.number);
            have_gamma = true;
        } else if (kw == "rmax") {
            expect_arity(line, 2);
            if (have_rmax) throw ModelError("duplicate rmax", line.number);
            m.rmax = rational_at(line, 1);
            if (m.rmax < 0) throw ModelError("rmax must be non-negative", line.number);
            have_rmax = true;
        } else if (kw == "initial") {
            expect_arity(line, 2);
            if (have_initial) throw ModelError("duplicate initial", line.number);
            m.initial = lookup(states, line.tokens[1], "state", line.number);
            have_initial = true;
        } else if (kw == "split") {
            expect_arity(line, 2);
            m.split[lookup(states, line.tokens[1], "state", line.number)] = true;
        } else if (kw == "reward") {
            expect_arity(line, 4);
            const std::size_t s = lookup(states, line.tokens[1], "state", line.number);
            const std::size_t a = lookup(actions, line.tokens[2], "action", line.number);
            if (reward_set[s * nA + a]) throw ModelError("duplicate reward", line.number);
            reward_set[s * nA + a] = 1;
            m.reward[s * nA + a] = rational_at(line, 3);
        } else if (kw == "trans") {
            if (line.tokens.size() < 5) throw ModelError("'trans' expects <state> <action> <state'> <polynomial>", line.number);
            const std::size_t s = lookup(states, line.tokens[1], "state", line.number);
            const std::size_t a = lookup(actions, line.tokens[2], "action", line.number);
            const std::size_t t = lookup(states, line.tokens[3], "state", line.number);
            Polynomial p;
            try {
                p = parse_polynomial(tail_after(line, 4));
            } catch (const ModelError& e) {
                throw ModelError(e.what(), line.number);
            }
            if (p.is_zero()) throw ModelError("transition label is the zero polynomial", line.number);
            for (const auto& x : p.variables())
                if (!seen_param.count(x)) throw ModelError("undeclared parameter '" + x + "'", line.number);
            if (!trans[s][a].emplace(t, std::move(p)).second)
                throw ModelError("duplicate transition", line.number);
        } else {
            throw ModelError("unknown directive '" + std::string(kw) + "'", line.number);
        }
    }
    if (!have_gamma) throw ModelError("missing gamma");
    if (!have_initial) throw ModelError("missing initial state");
    if (!have_rmax) {
        for (const auto& r : m.reward) m.rmax = std::max(m.rmax, r < 0 ? Rational(-r) : r);
    }
    for (std::size_t s = 0; s < m.states.size(); ++s) {
        for (auto& [a, row] : trans[s]) {
            Choice c{a, {}};
            for (auto& [t, p] : row) c.edges.push_back({t, std::move(p)});
            m.choices[s].push_back(std::move(c));
        }
    }
    validate(m);
    return m;
}

std::string serialize_pmdp(const PMdp& m) {
    validate(m);
    check_name(m.name, "model");
    for (const auto& s : m.states) check_name(s, "state");
    for (const auto& a : m.actions) check_name(a, "action");
    std::ostringstream out;
    out << "pmdp " << m.name << "\n";
    out << "gamma " << to_string(m.gamma) << "\n";
    out << "rmax " << to_string(m.rmax) << "\n";
    for (const auto& x : m.params) out << "param " << x << "\n";
    for (const auto& s : m.states) out << "state " << s << "\n";
    for (std::size_t s = 0; s < m.n_states(); ++s)
        if (m.split[s]) out << "split " << m.states[s] << "\n";
    out << "initial " << m.states[m.initial] << "\n";
    for (const auto& a : m.actions) out << "action " << a << "\n";
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (std::size_t a = 0; a < m.n_actions(); ++a)
            if (m.r(s, a) != 0)
                out << "reward " << m.states[s] << " " << m.actions[a] << " " << to_string(m.r(s, a)) << "\n";
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (const Choice& c : m.choices[s])
            for (const Edge& e : c.edges)
                out << "trans " << m.states[s] << " " << m.actions[c.action] << " " << m.states[e.target] << " "
                    << e.label.to_string() << "\n";
    return out.str();
}

Dataset parse_dataset(std::string_view text, const PMdp& m) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines.front().tokens[0] != "dataset")
        throw ModelError("missing 'dataset <env> <seed>' header", 1);
    const auto states = make_index(m.states), actions = make_index(m.actions);
    Dataset d;
    for (const Line& line : lines) {
        const std::string_view kw = line.tokens[0];
        if (kw == "dataset") {
            if (&line != &lines.front()) throw ModelError("duplicate header", line.number);
            expect_arity(line, 3);
            d.env = std::string(line.tokens[1]);
            const auto tok = line.tokens[2];
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d.seed);
            if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ModelError("malformed seed", line.number);
        } else if (kw == "episode") {
            expect_arity(line, 1);
            if (d.episode_starts.empty() || d.episode_starts.back() != d.steps.size())
                d.episode_starts.push_back(d.steps.size());
        } else if (kw == "step") {
            expect_arity(line, 4);
            d.steps.push_back({lookup(states, line.tokens[1], "state", line.number),
                               lookup(actions, line.tokens[2], "action", line.number),
                               lookup(states, line.tokens[3], "state", line.number)});
        } else {
            throw ModelError("unknown directive '" + std::string(kw) + "'", line.number);
        }
    }
    return d;
}

std::string serialize_dataset(const Dataset& d, const PMdp& m) {
    std::ostringstream out;
    out << "dataset " << (d.env.empty() ? m.name : d.env) << " " << d.seed << "\n";
    std::size_t next_episode = 0;
    for (std::size_t i = 0; i < d.steps.size(); ++i) {
        while (next_episode < d.episode_starts.size() && d.episode_starts[next_episode] <= i) {
            if (d.episode_starts[next_episode] == i) out << "episode\n";
            ++next_episode;
        }
        const Step& st = d.steps[i];
        out << "step " << m.states[st.s] << " " << m.actions[st.a] << " " << m.states[st.next] << "\n";
    }
    return out.str();
}

Policy parse_policy(std::string_view text, const PMdp& m) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines.front().tokens[0] != "policy") throw ModelError("missing 'policy <name>' header", 1);
    const auto states = make_index(m.states), actions = make_index(m.actions);
    Policy pi(m.n_states(), m.n_actions());
    for (const Line& line : lines) {
        const std::string_view kw = line.tokens[0];
        if (kw == "policy") {
            if (&line != &lines.front()) throw ModelError("duplicate header", line.number);
            continue;
        }
        if (kw != "prob") throw ModelError("unknown directive '" + std::string(kw) + "'", line.number);
        expect_arity(line, 4);
        const std::size_t s = lookup(states, line.tokens[1], "state", line.number);
        const std::size_t a = lookup(actions, line.tokens[2], "action", line.number);
        double p = 0.0;
        try {
            p = to_double(parse_rational(line.tokens[3]));
        } catch (const std::invalid_argument& e) {
            throw ModelError(e.what(), line.number);
        }
        if (p < 0.0 || p > 1.0) throw ModelError("probability outside [0,1]", line.number);
        pi.at(s, a) = p;
    }
    return pi;
}

std::string serialize_policy(const Policy& pi, const PMdp& m, const std::string& name) {
    std::ostringstream out;
    out << "policy " << name << "\n";
    for (std::size_t s = 0; s < pi.n_states; ++s)
        for (std::size_t a = 0; a < pi.n_actions; ++a)
            if (pi(s, a) > 0.0)
                out << "prob " << m.states[s] << " " << m.actions[a] << " " << format_double(pi(s, a)) << "\n";
    return out.str();
}

Valuation parse_valuation(std::string_view text) {
    Valuation v;
    std::string buf(text);
    std::replace(buf.begin(), buf.end(), ',', ' ');
    std::istringstream in(buf);
    std::string item;
    while (in >> item) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ValuationError("expected name=value, got '" + item + "'");
        try {
            v[item.substr(0, eq)] = to_double(parse_rational(item.substr(eq + 1)));
        } catch (const std::invalid_argument&) {
            throw ValuationError("malformed value in '" + item + "'");
        }
    }
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

} // namespace pspi
