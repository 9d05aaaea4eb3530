#include "pspi/bench.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace pspi {

namespace {

// Accumulates a pMDP; labels of repeated targets are summed.
class ModelBuilder {
public:
    ModelBuilder(std::string name, std::vector<std::string> actions) {
        m_.name = std::move(name);
        m_.actions = std::move(actions);
        m_.gamma = Rational(19, 20);
    }

    std::size_t add_state(std::string name) {
        m_.states.push_back(std::move(name));
        rows_.emplace_back();
        rewards_.emplace_back(m_.n_actions(), Rational(0));
        return m_.states.size() - 1;
    }

    void add_param(std::string x) { m_.params.push_back(std::move(x)); }

    void add(std::size_t s, std::size_t a, Rational reward, const std::vector<std::pair<std::size_t, Polynomial>>& out) {
        std::map<std::size_t, Polynomial> merged;
        for (const auto& [t, p] : out) merged[t] += p;
        Choice c{a, {}};
        for (auto& [t, p] : merged) c.edges.push_back(Edge{t, std::move(p)});
        rows_[s].push_back(std::move(c));
        rewards_[s][a] = std::move(reward);
    }

    PMdp finish(std::size_t initial) {
        m_.initial = initial;
        m_.rmax = 0;
        for (std::size_t s = 0; s < m_.n_states(); ++s) {
            auto& row = rows_[s];
            std::sort(row.begin(), row.end(), [](const Choice& x, const Choice& y) { return x.action < y.action; });
            m_.choices.push_back(std::move(row));
            for (auto& r : rewards_[s]) {
                m_.rmax = std::max<Rational>(m_.rmax, abs(r));
                m_.reward.push_back(std::move(r));
            }
        }
        m_.split.assign(m_.n_states(), false);
        validate(m_);
        return std::move(m_);
    }

private:
    PMdp m_;
    std::vector<std::vector<Choice>> rows_;
    std::vector<std::vector<Rational>> rewards_;
};

Polynomial constant(Rational r) { return Polynomial(std::move(r)); }
Polynomial var(const std::string& x) { return Polynomial::variable(x); }

std::vector<bool> flags(std::size_t n, std::initializer_list<std::size_t> on) {
    std::vector<bool> out(n, false);
    for (auto s : on) out[s] = true;
    return out;
}

// Row, column offsets for north, south, west, east.
constexpr std::array<int, 4> kDr{-1, 1, 0, 0};
constexpr std::array<int, 4> kDc{0, 0, -1, 1};

} // namespace

Benchmark build_gridworld(std::size_t n) {
    if (n < 2) throw std::invalid_argument("gridworld needs n >= 2");
    ModelBuilder b("gridworld", {"north", "south", "west", "east"});
    b.add_param("x");
    const auto id = [n](std::size_t r, std::size_t c) { return r * n + c; };
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) b.add_state("r" + std::to_string(r) + "c" + std::to_string(c));
    const std::size_t goal = id(n - 1, n - 1);
    const Polynomial slip = var("x"), move = constant(1) - var("x");
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t s = id(r, c);
            for (std::size_t a = 0; a < 4; ++a) {
                if (s == goal) {
                    b.add(s, a, 1, {{id(0, 0), constant(1)}});
                    continue;
                }
                const long nr = static_cast<long>(r) + kDr[a], nc = static_cast<long>(c) + kDc[a];
                if (nr < 0 || nc < 0 || nr >= static_cast<long>(n) || nc >= static_cast<long>(n))
                    b.add(s, a, 0, {{s, constant(1)}});
                else
                    b.add(s, a, 0, {{id(nr, nc), move}, {s, slip}});
            }
        }
    }
    Benchmark out;
    out.model = b.finish(id(0, 0));
    auto& spec = out.spec;
    spec.name = "gridworld";
    spec.builder_params = {{"size", std::to_string(n)}, {"slip", "0.1"}};
    spec.expected_states = n == 5 ? 25 : n * n;
    spec.expected_actions = 4;
    spec.expected_params = 1;
    spec.alpha = 0.5;
    spec.truth = {{"x", 0.1}};
    spec.terminal.assign(out.model.n_states(), false);
    spec.construction =
        "Start in the top-left corner, goal in the bottom-right corner. Any action at the goal pays 1 and returns "
        "to the start; every other reward is 0. "
        "A move reaches the neighbor with 1-x and stays put with x; moving into the border stays with probability 1. "
        "The slip x is shared by every movement distribution.";
    return out;
}

Benchmark build_resource_gathering() {
    // G gold, D gem, E enemy, H home, # wall.
    static const std::array<const char*, 10> kMap{
        "...G....D.", "...E....E.", "..........", ".....E....", ".##.......",
        ".......##.", "...##.....", "..........", "..........", ".....H....",
    };
    constexpr int kSize = 10;
    ModelBuilder b("resource-gathering", {"north", "south", "west", "east"});
    b.add_param("x");
    std::map<std::pair<int, int>, std::size_t> cell;
    std::pair<int, int> home{};
    for (int r = 0; r < kSize; ++r)
        for (int c = 0; c < kSize; ++c) {
            if (kMap[r][c] == '#') continue;
            const std::size_t k = cell.size();
            cell[{r, c}] = k;
            if (kMap[r][c] == 'H') home = {r, c};
        }
    // State = cell * 4 + inventory (bit 0 gold, bit 1 gem).
    std::vector<std::pair<int, int>> pos(cell.size());
    for (const auto& [rc, k] : cell) pos[k] = rc;
    for (std::size_t k = 0; k < pos.size(); ++k)
        for (int inv = 0; inv < 4; ++inv)
            b.add_state("r" + std::to_string(pos[k].first) + "c" + std::to_string(pos[k].second) + "_" +
                        ((inv & 1) ? "g" : "-") + ((inv & 2) ? "d" : "-"));
    const auto id = [&](std::pair<int, int> rc, int inv) { return cell.at(rc) * 4 + static_cast<std::size_t>(inv); };
    const Polynomial attack = var("x"), pass = constant(1) - var("x");
    for (std::size_t k = 0; k < pos.size(); ++k) {
        for (int inv = 0; inv < 4; ++inv) {
            const std::size_t s = k * 4 + static_cast<std::size_t>(inv);
            for (std::size_t a = 0; a < 4; ++a) {
                const std::pair<int, int> to{pos[k].first + kDr[a], pos[k].second + kDc[a]};
                if (!cell.count(to)) {
                    b.add(s, a, 0, {{s, constant(1)}});
                    continue;
                }
                const char what = kMap[to.first][to.second];
                int next_inv = inv;
                if (what == 'G') next_inv |= 1;
                if (what == 'D') next_inv |= 2;
                if (what == 'H') {
                    const int value = (inv & 1) + 2 * ((inv & 2) >> 1);
                    b.add(s, a, value, {{id(to, 0), constant(1)}});
                } else if (what == 'E') {
                    b.add(s, a, 0, {{id(to, next_inv), pass}, {id(home, 0), attack}});
                } else {
                    b.add(s, a, 0, {{id(to, next_inv), constant(1)}});
                }
            }
        }
    }
    Benchmark out;
    out.model = b.finish(id(home, 0));
    auto& spec = out.spec;
    spec.name = "resource-gathering";
    spec.builder_params = {{"size", "10"}, {"walls", "6"}, {"enemies", "3"}, {"attack", "0.1"}};
    spec.expected_states = 376;
    spec.expected_actions = 4;
    spec.expected_params = 1;
    spec.alpha = 0.2;
    spec.truth = {{"x", 0.1}};
    spec.terminal.assign(out.model.n_states(), false);
    spec.construction =
        "10x10 grid with 6 walls (94 cells) times a gold/gem inventory. Entering the gold or gem cell collects it; "
        "entering home pays 1 per gold and 2 per gem and empties the inventory. Entering an enemy cell gets the agent "
        "attacked with probability x, which sends it home empty-handed. The attack probability x is shared by all "
        "enemy cells. Continuing task: rollouts only reset at the horizon.";
    return out;
}

Benchmark build_taxi() {
    // Wall between (r, c) and (r, c+1).
    const auto wall_east = [](int r, int c) {
        static const std::array<std::pair<int, int>, 6> kWalls{{{0, 1}, {1, 1}, {3, 0}, {4, 0}, {3, 2}, {4, 2}}};
        return std::find(kWalls.begin(), kWalls.end(), std::pair<int, int>{r, c}) != kWalls.end();
    };
    // Directions 0 south, 1 north, 2 east, 3 west (the move actions).
    constexpr std::array<int, 4> dr{1, -1, 0, 0}, dc{0, 0, 1, -1};
    constexpr std::array<char, 4> dname{'s', 'n', 'e', 'w'};
    constexpr std::array<int, 4> left{2, 3, 1, 0}, right{3, 2, 0, 1}, back{1, 0, 3, 2};
    const auto blocked = [&](int r, int c, int d) {
        const int nr = r + dr[d], nc = c + dc[d];
        if (nr < 0 || nc < 0 || nr > 4 || nc > 4) return true;
        if (d == 2) return wall_east(r, c);
        if (d == 3) return wall_east(r, c - 1);
        return false;
    };
    static const std::array<std::pair<int, int>, 4> kLoc{{{0, 0}, {0, 4}, {4, 0}, {4, 3}}};
    static const char* kLocName = "RGYB";

    ModelBuilder b("taxi", {"south", "north", "east", "west", "pickup", "dropoff"});
    // State = (cell * 5 + passenger) * 4 + destination; passenger 4 is in the taxi.
    for (int cell = 0; cell < 25; ++cell)
        for (int p = 0; p < 5; ++p)
            for (int d = 0; d < 4; ++d)
                b.add_state("r" + std::to_string(cell / 5) + "c" + std::to_string(cell % 5) + "_" +
                            (p == 4 ? 'T' : kLocName[p]) + "_" + kLocName[d]);
    const std::size_t done = b.add_state("done");
    const auto id = [](int cell, int p, int d) { return static_cast<std::size_t>((cell * 5 + p) * 4 + d); };

    // Per cell and direction: the four outcomes (intended, left, right, back)
    // in the order o1..o4 with P(o1)=1-a, P(o2)=a(1-b), P(o3)=ab(1-c), P(o4)=abc.
    // o4 is a blocked outcome when there is one and o3 is free, so that no
    // parameter cancels out when blocked outcomes merge into "stay".
    struct MoveLabels {
        std::vector<std::pair<int, Polynomial>> outcome;  // resulting cell, label
    };
    std::vector<MoveLabels> moves(100);
    Valuation truth;
    for (int cell = 0; cell < 25; ++cell) {
        const int r = cell / 5, c = cell % 5;
        for (int d = 0; d < 4; ++d) {
            const std::array<int, 4> natural{d, left[d], right[d], back[d]};
            const std::array<double, 4> prob{0.85, 0.05, 0.05, 0.05};
            int o4 = 3;
            for (int i = 0; i < 4; ++i)
                if (blocked(r, c, natural[i])) {
                    o4 = i;
                    break;
                }
            int o3 = -1;
            for (int i = 0; i < 4; ++i)
                if (i != o4 && !blocked(r, c, natural[i])) {
                    o3 = i;
                    break;
                }
            std::vector<int> order;
            for (int i = 0; i < 4; ++i)
                if (i != o3 && i != o4) order.push_back(i);
            order.push_back(o3);
            order.push_back(o4);

            const std::string stem = "m_r" + std::to_string(r) + "c" + std::to_string(c) + "_" + dname[d] + "_";
            const std::string pa = stem + "a", pb = stem + "b", pc = stem + "c";
            for (const auto& x : {pa, pb, pc}) b.add_param(x);
            const Polynomial A = var(pa), B = var(pb), C = var(pc), one = constant(1);
            const std::array<Polynomial, 4> label{one - A, A * (one - B), A * B * (one - C), A * B * C};
            const double q1 = prob[order[0]], q2 = prob[order[1]], q4 = prob[order[3]];
            const double ta = 1.0 - q1, tb = 1.0 - q2 / ta, tc = q4 / (ta * tb);
            truth[pa] = ta;
            truth[pb] = tb;
            truth[pc] = tc;

            auto& mv = moves[static_cast<std::size_t>(cell * 4 + d)];
            for (int k = 0; k < 4; ++k) {
                const int dir = natural[order[k]];
                const int to = blocked(r, c, dir) ? cell : (r + dr[dir]) * 5 + c + dc[dir];
                mv.outcome.emplace_back(to, label[k]);
            }
        }
    }

    for (int cell = 0; cell < 25; ++cell) {
        const std::pair<int, int> rc{cell / 5, cell % 5};
        for (int p = 0; p < 5; ++p) {
            for (int d = 0; d < 4; ++d) {
                const std::size_t s = id(cell, p, d);
                for (int a = 0; a < 4; ++a) {
                    std::vector<std::pair<std::size_t, Polynomial>> out;
                    for (const auto& [to, label] : moves[static_cast<std::size_t>(cell * 4 + a)].outcome)
                        out.emplace_back(id(to, p, d), label);
                    b.add(s, static_cast<std::size_t>(a), -1, out);
                }
                if (p < 4 && kLoc[p] == rc)
                    b.add(s, 4, -1, {{id(cell, 4, d), constant(1)}});
                else
                    b.add(s, 4, -10, {{s, constant(1)}});
                if (p == 4 && kLoc[d] == rc)
                    b.add(s, 5, 20, {{done, constant(1)}});
                else
                    b.add(s, 5, -10, {{s, constant(1)}});
            }
        }
    }
    for (std::size_t a = 0; a < 6; ++a) b.add(done, a, 0, {{done, constant(1)}});

    Benchmark out;
    out.model = b.finish(id(11, 2, 1));
    auto& spec = out.spec;
    spec.name = "taxi";
    spec.builder_params = {{"map", "classic 5x5"}, {"intended", "0.85"}, {"other", "0.05"}};
    spec.expected_states = 501;
    spec.expected_actions = 6;
    spec.expected_params = 300;
    spec.alpha = 1.0 / 20.0;
    spec.truth = std::move(truth);
    spec.terminal = flags(out.model.n_states(), {done});
    spec.construction =
        "Classic 5x5 taxi map with stands R, G, Y, B: 25 cells x 5 passenger locations x 4 destinations plus an "
        "absorbing terminal reached by a correct dropoff (+20). Moves cost 1, illegal pickup or dropoff cost 10. "
        "A move ends in the intended, left, right or backward neighbor (blocked outcomes stay put) with the "
        "sequential labels 1-a, a(1-b), ab(1-c), abc; the three parameters of a cell and direction are shared by "
        "all 20 passenger/destination configurations. True outcome probabilities are 0.85 intended, 0.05 otherwise. "
        "Start: taxi at r2c1, passenger at Y, destination G.";
    return out;
}

Benchmark build_pacman() {
    constexpr int kRows = 5, kCols = 7;
    const auto pillar = [](int r, int c) {
        return (r == 1 && c == 3) || (r == 3 && c == 3) || (r == 2 && c == 0) || (r == 2 && c == 6);
    };
    std::vector<std::pair<int, int>> ring;
    for (int c = 1; c <= 5; ++c) ring.emplace_back(0, c);
    for (int r = 1; r <= 4; ++r) ring.emplace_back(r, 5);
    for (int c = 4; c >= 1; --c) ring.emplace_back(4, c);
    for (int r = 3; r >= 1; --r) ring.emplace_back(r, 1);
    const int n_ring = static_cast<int>(ring.size());

    std::map<std::pair<int, int>, int> pac_cell;
    std::vector<std::pair<int, int>> pac_pos;
    for (int r = 0; r < kRows; ++r)
        for (int c = 0; c < kCols; ++c)
            if (!pillar(r, c)) {
                pac_cell[{r, c}] = static_cast<int>(pac_pos.size());
                pac_pos.emplace_back(r, c);
            }
    const std::pair<int, int> food{0, 0}, start{2, 3};
    const int ghost_start = 8;

    ModelBuilder b("pacman", {"north", "south", "west", "east", "stay"});
    for (const auto& [r, c] : pac_pos)
        for (int g = 0; g < n_ring; ++g)
            b.add_state("p" + std::to_string(r) + std::to_string(c) + "_g" + std::to_string(ring[g].first) +
                        std::to_string(ring[g].second));
    const std::size_t won = b.add_state("won"), lost = b.add_state("lost");
    const auto id = [&](int pc, int g) { return static_cast<std::size_t>(pc * n_ring + g); };
    const auto dist = [](std::pair<int, int> x, std::pair<int, int> y) {
        return std::abs(x.first - y.first) + std::abs(x.second - y.second);
    };

    for (int pc = 0; pc < static_cast<int>(pac_pos.size()); ++pc) {
        for (int g = 0; g < n_ring; ++g) {
            const std::size_t s = id(pc, g);
            for (std::size_t a = 0; a < 5; ++a) {
                std::pair<int, int> to = pac_pos[pc];
                if (a < 4) {
                    const std::pair<int, int> t{to.first + kDr[a], to.second + kDc[a]};
                    if (pac_cell.count(t)) to = t;
                }
                if (to == food) {
                    b.add(s, a, 9, {{won, constant(1)}});
                    continue;
                }
                if (to == ring[g]) {
                    b.add(s, a, -11, {{lost, constant(1)}});
                    continue;
                }
                const int to_cell = pac_cell.at(to);
                const int cw = (g + 1) % n_ring, ccw = (g + n_ring - 1) % n_ring;
                const int toward = dist(ring[ccw], to) < dist(ring[cw], to) ? ccw : cw;
                const int away = toward == cw ? ccw : cw;
                // Chase probability, distinct for every (pac cell, ghost cell) configuration.
                const Rational p = Rational(1, 2) + Rational(to_cell * n_ring + g + 1, 1250);
                Rational caught = 0;
                std::vector<std::pair<std::size_t, Polynomial>> out;
                const std::array<std::pair<int, Rational>, 2> moves{{{toward, p}, {away, Rational(1) - p}}};
                for (const auto& [gn, prob] : moves) {
                    if (ring[gn] == to) {
                        caught += prob;
                        out.emplace_back(lost, constant(prob));
                    } else {
                        out.emplace_back(id(to_cell, gn), constant(prob));
                    }
                }
                b.add(s, a, Rational(-1) - 10 * caught, out);
            }
        }
    }
    for (std::size_t a = 0; a < 5; ++a) {
        b.add(won, a, 0, {{won, constant(1)}});
        b.add(lost, a, 0, {{lost, constant(1)}});
    }

    Benchmark out;
    out.model = b.finish(id(pac_cell.at(start), ghost_start));
    auto& spec = out.spec;
    spec.name = "pacman";
    spec.builder_params = {{"grid", "5x7"}, {"ring", "16"}, {"food", "r0c0"}};
    spec.expected_states = 498;
    spec.expected_actions = 5;
    spec.expected_params = 0;
    spec.alpha = 1.0 / 20.0;
    spec.terminal = flags(out.model.n_states(), {won, lost});
    spec.construction =
        "5x7 maze with 4 pillars (31 cells) and a ghost patrolling the 16-cell ring around the center, plus "
        "absorbing won and lost states. Pac-Man moves first; reaching the food pays +10 and wins, meeting the "
        "ghost loses. The ghost then steps to the ring neighbor closer to Pac-Man with probability p and the other "
        "one otherwise, where p = 1/2 + (i+1)/1250 is distinct per configuration i. Every step costs 1 and the "
        "expected capture costs 10. Constant labels only.";
    return out;
}

Benchmark build_rps(double bias) {
    if (!(bias >= 0.0 && bias < 2.0 / 3.0)) throw std::invalid_argument("rps bias must lie in [0, 2/3)");
    constexpr int kRounds = 20;
    static const char* kMove = "RPS";
    // beats[x] is the move that beats x.
    constexpr std::array<int, 3> beats{1, 2, 0};
    const auto outcome = [&](int a, int o) { return a == o ? 0 : (beats[o] == a ? 1 : -1); };

    ModelBuilder b("rps", {"rock", "paper", "scissors"});
    Valuation truth;
    for (int m = 0; m < 3; ++m)
        for (int o = 0; o < 3; ++o) {
            const std::string x = std::string("o_") + kMove[m] + "_" + kMove[o];
            b.add_param(x);
            truth[x] = 1.0 / 3.0 + (o == beats[m] ? bias : -bias / 2.0);
        }
    const auto param = [&](int m, int o) { return var(std::string("o_") + kMove[m] + "_" + kMove[o]); };

    // Layer t holds the states before round t: previous move m and score difference d.
    const std::size_t start = b.add_state("start");
    std::map<std::tuple<int, int, int>, std::size_t> id;
    for (int t = 2; t <= kRounds + 1; ++t)
        for (int m = 0; m < 3; ++m)
            for (int d = -(t - 1); d <= t - 1; ++d)
                id[{t, m, d}] = b.add_state("t" + std::to_string(t) + "_" + kMove[m] + "_" + std::to_string(d));

    // First round without history: fixed, pairwise distinct probabilities.
    const std::array<Rational, 3> opening{Rational(2, 5), Rational(7, 20), Rational(1, 4)};
    for (std::size_t a = 0; a < 3; ++a) {
        std::vector<std::pair<std::size_t, Polynomial>> out;
        for (int o = 0; o < 3; ++o)
            out.emplace_back(id.at({2, static_cast<int>(a), outcome(static_cast<int>(a), o)}), constant(opening[o]));
        b.add(start, a, 0, out);
    }
    for (const auto& [key, s] : id) {
        const auto [t, m, d] = key;
        if (t == kRounds + 1) {
            // Final score, then a new game.
            b.add(s, 0, d > 0 ? 1 : (d < 0 ? -1 : 0), {{start, constant(1)}});
            continue;
        }
        for (int a = 0; a < 3; ++a) {
            std::vector<std::pair<std::size_t, Polynomial>> out;
            for (int o = 0; o < 3; ++o) out.emplace_back(id.at({t + 1, a, d + outcome(a, o)}), param(m, o));
            b.add(s, static_cast<std::size_t>(a), 0, out);
        }
    }

    Benchmark out;
    out.model = b.finish(start);
    auto& spec = out.spec;
    spec.name = "rps";
    std::ostringstream bias_text;
    bias_text << bias;
    spec.builder_params = {{"rounds", std::to_string(kRounds)}, {"bias", bias_text.str()}};
    spec.expected_states = 1321;
    spec.expected_actions = 3;
    spec.expected_params = 9;
    spec.alpha = 1.0 / 20.0;
    spec.truth = std::move(truth);
    // 20 decisions and the payout step of the end state.
    spec.horizon = kRounds + 1;
    spec.terminal.assign(out.model.n_states(), false);
    spec.construction =
        "20 rounds of rock-paper-scissors. A state records the round, the player's previous move and the score "
        "difference. The opponent plays o after the player's move m with probability o_m_o (9 parameters, each row "
        "summing to 1); in the first round it plays rock, paper, scissors with 2/5, 7/20, 1/4. After round 20 the single action of the end state pays the sign "
        "of the score difference and restarts the game. The truth adds the bias to the play that beats m and "
        "removes half of it from the other two.";
    return out;
}

std::vector<std::string> benchmark_names() { return {"gridworld", "resource-gathering", "taxi", "pacman", "rps"}; }

Benchmark build_benchmark(const std::string& name) {
    if (name == "gridworld") return build_gridworld();
    if (name == "resource-gathering") return build_resource_gathering();
    if (name == "taxi") return build_taxi();
    if (name == "pacman") return build_pacman();
    if (name == "rps") return build_rps();
    throw std::invalid_argument("unknown benchmark '" + name + "'");
}

bool dims_match(const Benchmark& b) {
    return b.model.n_states() == b.spec.expected_states && b.model.n_actions() == b.spec.expected_actions &&
           b.model.params.size() == b.spec.expected_params;
}

std::string spec_report(const Benchmark& b) {
    std::ostringstream out;
    out.precision(17);
    const auto& s = b.spec;
    out << "benchmark " << s.name << "\n";
    for (const auto& [k, v] : s.builder_params) out << "param " << k << " " << v << "\n";
    out << "states " << b.model.n_states() << " expected " << s.expected_states << "\n";
    out << "actions " << b.model.n_actions() << " expected " << s.expected_actions << "\n";
    out << "parameters " << b.model.params.size() << " expected " << s.expected_params << "\n";
    out << "dims " << (dims_match(b) ? "ok" : "MISMATCH") << "\n";
    out << "pairs " << b.model.n_pairs() << " transitions " << b.model.n_transitions() << "\n";
    out << "gamma " << to_string(b.model.gamma) << " rmax " << to_string(b.model.rmax) << "\n";
    out << "alpha " << s.alpha << "\nhorizon " << s.horizon << "\n";
    std::size_t n_terminal = 0;
    for (bool t : s.terminal) n_terminal += t;
    out << "terminal " << n_terminal << "\n";
    out << "graph-preserving " << (is_graph_preserving(b.model, s.truth) ? "yes" : "no") << "\n";
    for (const auto& [x, v] : s.truth) out << "truth " << x << " " << v << "\n";
    out << "construction " << s.construction << "\n";
    return out.str();
}

Policy behavior_policy(const Mdp& m, const std::vector<std::size_t>& optimal, double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
    Policy pi(m.n_states(), m.n_actions());
    for (std::size_t s = 0; s < m.n_states(); ++s) {
        const auto& row = m.choices[s];
        if (row.empty()) continue;
        if (row.size() == 1) {
            pi.at(s, row[0].action) = 1.0;
            continue;
        }
        const double rest = alpha / static_cast<double>(row.size() - 1);
        for (const auto& c : row) pi.at(s, c.action) = c.action == optimal[s] ? 1.0 - alpha : rest;
    }
    return pi;
}

Policy behavior_policy(const Mdp& m, double alpha) {
    const auto [opt, table] = policy_iteration(m);
    std::vector<std::size_t> choice(m.n_states(), npos);
    for (std::size_t s = 0; s < m.n_states(); ++s)
        for (std::size_t a = 0; a < m.n_actions(); ++a)
            if (opt(s, a) > 0.5) choice[s] = a;
    return behavior_policy(m, choice, alpha);
}

} // namespace pspi
