#pragma once

#include "pspi/rational.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pspi {

/// Parameter assignment. Must cover every parameter a polynomial mentions.
using Valuation = std::map<std::string, double>;

/// Product of parameter powers, kept sorted by parameter name with positive exponents.
using Monomial = std::vector<std::pair<std::string, unsigned>>;

/// Graded order: higher total degree first, then lexicographic.
struct MonomialOrder {
    bool operator()(const Monomial& lhs, const Monomial& rhs) const;
};

/// Multivariate polynomial with exact rational coefficients in canonical form:
/// no zero coefficients, unique monomials, deterministic term order.
/// Two labels are identical iff their canonical forms compare equal.
class Polynomial {
public:
    using Terms = std::map<Monomial, Rational, MonomialOrder>;

    Polynomial() = default;
    Polynomial(const Rational& constant);  // NOLINT(google-explicit-constructor)
    static Polynomial variable(const std::string& name);

    const Terms& terms() const noexcept { return terms_; }
    bool is_zero() const noexcept { return terms_.empty(); }
    bool is_constant() const noexcept;
    /// Constant term (zero when absent).
    Rational constant_term() const;
    std::set<std::string> variables() const;
    unsigned degree() const noexcept;

    double evaluate(const Valuation& v) const;
    Rational evaluate_exact(const std::map<std::string, Rational>& v) const;

    Polynomial& operator+=(const Polynomial& rhs);
    Polynomial& operator-=(const Polynomial& rhs);
    Polynomial& operator*=(const Polynomial& rhs);
    friend Polynomial operator+(Polynomial lhs, const Polynomial& rhs) { return lhs += rhs; }
    friend Polynomial operator-(Polynomial lhs, const Polynomial& rhs) { return lhs -= rhs; }
    friend Polynomial operator*(Polynomial lhs, const Polynomial& rhs) { return lhs *= rhs; }
    Polynomial operator-() const;
    Polynomial pow(unsigned exponent) const;

    friend bool operator==(const Polynomial&, const Polynomial&) = default;
    friend bool operator<(const Polynomial& lhs, const Polynomial& rhs);

    /// Canonical text, e.g. "-x - y + 1" or "-1/2*x^2*y + 3". Re-parses to an equal polynomial.
    std::string to_string() const;

private:
    void add_term(const Monomial& m, const Rational& c);
    Terms terms_;
};

/// Raw (uncanonicalized) polynomial expression as written in model files.
struct Expr {
    enum class Kind { Constant, Variable, Add, Sub, Mul, Div, Pow, Neg };
    Kind kind = Kind::Constant;
    Rational value;               // Constant
    std::string name;             // Variable
    unsigned exponent = 0;        // Pow
    std::vector<std::shared_ptr<const Expr>> args;
};

/// Grammar: rationals (`3/4`, `0.25`), identifiers, `+ - * / ^`, parentheses.
/// Exponents must be non-negative integer literals. Throws ModelError on syntax errors.
Expr parse_expression(std::string_view text);

/// Expands and merges into canonical form. Division is only allowed by a
/// non-zero constant; anything else is rejected with ModelError.
Polynomial canonicalize(const Expr& e);

/// Direct floating-point evaluation of the raw tree.
double evaluate(const Expr& e, const Valuation& v);

/// parse_expression followed by canonicalize.
Polynomial parse_polynomial(std::string_view text);

} // namespace pspi
