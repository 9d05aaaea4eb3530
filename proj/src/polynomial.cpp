#include "pspi/polynomial.hpp"

#include "pspi/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace pspi {

bool MonomialOrder::operator()(const Monomial& lhs, const Monomial& rhs) const {
    unsigned dl = 0, dr = 0;
    for (const auto& [_, e] : lhs) dl += e;
    for (const auto& [_, e] : rhs) dr += e;
    if (dl != dr) return dl > dr;
    const std::size_t n = std::min(lhs.size(), rhs.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (lhs[i].first != rhs[i].first) return lhs[i].first < rhs[i].first;
        if (lhs[i].second != rhs[i].second) return lhs[i].second > rhs[i].second;
    }
    return lhs.size() < rhs.size();
}

Polynomial::Polynomial(const Rational& constant) {
    if (constant != 0) terms_.emplace(Monomial{}, constant);
}

Polynomial Polynomial::variable(const std::string& name) {
    Polynomial p;
    p.terms_.emplace(Monomial{{name, 1u}}, Rational(1));
    return p;
}

bool Polynomial::is_constant() const noexcept {
    return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
}

Rational Polynomial::constant_term() const {
    auto it = terms_.find(Monomial{});
    return it == terms_.end() ? Rational(0) : it->second;
}

std::set<std::string> Polynomial::variables() const {
    std::set<std::string> out;
    for (const auto& [m, _] : terms_)
        for (const auto& [name, _e] : m) out.insert(name);
    return out;
}

unsigned Polynomial::degree() const noexcept {
    unsigned d = 0;
    for (const auto& [m, _] : terms_) {
        unsigned md = 0;
        for (const auto& [_n, e] : m) md += e;
        d = std::max(d, md);
    }
    return d;
}

double Polynomial::evaluate(const Valuation& v) const {
    double total = 0.0;
    for (const auto& [m, c] : terms_) {
        double term = to_double(c);
        for (const auto& [name, e] : m) {
            auto it = v.find(name);
            if (it == v.end()) throw ValuationError("parameter '" + name + "' is not assigned");
            term *= std::pow(it->second, static_cast<int>(e));
        }
        total += term;
    }
    return total;
}

Rational Polynomial::evaluate_exact(const std::map<std::string, Rational>& v) const {
    Rational total = 0;
    for (const auto& [m, c] : terms_) {
        Rational term = c;
        for (const auto& [name, e] : m) {
            auto it = v.find(name);
            if (it == v.end()) throw ValuationError("parameter '" + name + "' is not assigned");
            for (unsigned k = 0; k < e; ++k) term *= it->second;
        }
        total += term;
    }
    return total;
}

void Polynomial::add_term(const Monomial& m, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (inserted) return;
    it->second += c;
    if (it->second == 0) terms_.erase(it);
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
    for (const auto& [m, c] : rhs.terms_) add_term(m, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& rhs) {
    for (const auto& [m, c] : rhs.terms_) add_term(m, -c);
    return *this;
}

namespace {

Monomial multiply(const Monomial& a, const Monomial& b) {
    Monomial out;
    out.reserve(a.size() + b.size());
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() || j != b.end()) {
        if (j == b.end() || (i != a.end() && i->first < j->first)) {
            out.push_back(*i++);
        } else if (i == a.end() || j->first < i->first) {
            out.push_back(*j++);
        } else {
            out.emplace_back(i->first, i->second + j->second);
            ++i;
            ++j;
        }
    }
    return out;
}

} // namespace

Polynomial& Polynomial::operator*=(const Polynomial& rhs) {
    Polynomial result;
    for (const auto& [ma, ca] : terms_)
        for (const auto& [mb, cb] : rhs.terms_) result.add_term(multiply(ma, mb), ca * cb);
    *this = std::move(result);
    return *this;
}

Polynomial Polynomial::operator-() const {
    Polynomial out;
    for (const auto& [m, c] : terms_) out.terms_.emplace(m, -c);
    return out;
}

Polynomial Polynomial::pow(unsigned exponent) const {
    Polynomial result(Rational(1));
    Polynomial base = *this;
    while (exponent > 0) {
        if (exponent & 1u) result *= base;
        exponent >>= 1u;
        if (exponent > 0) base *= base;
    }
    return result;
}

bool operator<(const Polynomial& lhs, const Polynomial& rhs) {
    return std::lexicographical_compare(
        lhs.terms_.begin(), lhs.terms_.end(), rhs.terms_.begin(), rhs.terms_.end(),
        [](const auto& a, const auto& b) {
            if (a.first != b.first) return MonomialOrder{}(a.first, b.first);
            return a.second < b.second;
        });
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        const bool negative = c < 0;
        const Rational mag = negative ? Rational(-c) : c;
        if (first) {
            if (negative) out += "-";
        } else {
            out += negative ? " - " : " + ";
        }
        first = false;
        std::string factors;
        for (const auto& [name, e] : m) {
            if (!factors.empty()) factors += "*";
            factors += name;
            if (e > 1) factors += "^" + std::to_string(e);
        }
        if (factors.empty()) {
            out += pspi::to_string(mag);
        } else if (mag == 1) {
            out += factors;
        } else {
            out += pspi::to_string(mag) + "*" + factors;
        }
    }
    return out;
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr parse() {
        Expr e = expression();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    using Ptr = std::shared_ptr<const Expr>;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ModelError("polynomial '" + std::string(text_) + "': " + msg);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static Expr binary(Expr::Kind kind, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = kind;
        e.args = {std::make_shared<const Expr>(std::move(lhs)), std::make_shared<const Expr>(std::move(rhs))};
        return e;
    }

    Expr expression() {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) lhs = binary(Expr::Kind::Add, std::move(lhs), term());
            else if (accept('-')) lhs = binary(Expr::Kind::Sub, std::move(lhs), term());
            else return lhs;
        }
    }

    Expr term() {
        Expr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = binary(Expr::Kind::Mul, std::move(lhs), unary());
            else if (accept('/')) lhs = binary(Expr::Kind::Div, std::move(lhs), unary());
            else return lhs;
        }
    }

    Expr unary() {
        if (accept('-')) {
            Expr e;
            e.kind = Expr::Kind::Neg;
            e.args = {std::make_shared<const Expr>(unary())};
            return e;
        }
        if (accept('+')) return unary();
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (!accept('^')) return base;
        skip_space();
        const std::size_t start = pos_;
        unsigned long exponent = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            exponent = exponent * 10 + static_cast<unsigned long>(text_[pos_] - '0');
            if (exponent > 1000) fail("exponent too large");
            ++pos_;
        }
        if (pos_ == start) fail("exponent must be a non-negative integer literal");
        Expr e;
        e.kind = Expr::Kind::Pow;
        e.exponent = static_cast<unsigned>(exponent);
        e.args = {std::make_shared<const Expr>(std::move(base))};
        return e;
    }

    Expr atom() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = expression();
            if (!accept(')')) fail("missing ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
                ++pos_;
            Expr e;
            e.kind = Expr::Kind::Constant;
            try {
                e.value = parse_rational(text_.substr(start, pos_ - start));
            } catch (const std::invalid_argument& err) {
                fail(err.what());
            }
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            Expr e;
            e.kind = Expr::Kind::Variable;
            e.name = std::string(text_.substr(start, pos_ - start));
            return e;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace

Expr parse_expression(std::string_view text) { return Parser(text).parse(); }

Polynomial canonicalize(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Constant: return Polynomial(e.value);
    case Expr::Kind::Variable: return Polynomial::variable(e.name);
    case Expr::Kind::Add: return canonicalize(*e.args[0]) + canonicalize(*e.args[1]);
    case Expr::Kind::Sub: return canonicalize(*e.args[0]) - canonicalize(*e.args[1]);
    case Expr::Kind::Mul: return canonicalize(*e.args[0]) * canonicalize(*e.args[1]);
    case Expr::Kind::Neg: return -canonicalize(*e.args[0]);
    case Expr::Kind::Pow: return canonicalize(*e.args[0]).pow(e.exponent);
    case Expr::Kind::Div: {
        Polynomial divisor = canonicalize(*e.args[1]);
        if (!divisor.is_constant()) throw ModelError("division by a non-constant is not a polynomial");
        if (divisor.is_zero()) throw ModelError("division by zero");
        return canonicalize(*e.args[0]) * Polynomial(Rational(1) / divisor.constant_term());
    }
    }
    throw ModelError("corrupt expression");
}

double evaluate(const Expr& e, const Valuation& v) {
    switch (e.kind) {
    case Expr::Kind::Constant: return to_double(e.value);
    case Expr::Kind::Variable: {
        auto it = v.find(e.name);
        if (it == v.end()) throw ValuationError("parameter '" + e.name + "' is not assigned");
        return it->second;
    }
    case Expr::Kind::Add: return evaluate(*e.args[0], v) + evaluate(*e.args[1], v);
    case Expr::Kind::Sub: return evaluate(*e.args[0], v) - evaluate(*e.args[1], v);
    case Expr::Kind::Mul: return evaluate(*e.args[0], v) * evaluate(*e.args[1], v);
    case Expr::Kind::Div: return evaluate(*e.args[0], v) / evaluate(*e.args[1], v);
    case Expr::Kind::Neg: return -evaluate(*e.args[0], v);
    case Expr::Kind::Pow: return std::pow(evaluate(*e.args[0], v), static_cast<int>(e.exponent));
    }
    return 0.0;
}

Polynomial parse_polynomial(std::string_view text) { return canonicalize(parse_expression(text)); }

} // namespace pspi
