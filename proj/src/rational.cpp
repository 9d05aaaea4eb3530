#include "pspi/rational.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace pspi {

namespace {

using boost::multiprecision::cpp_int;

cpp_int pow10(unsigned n) {
    cpp_int r = 1;
    for (unsigned i = 0; i < n; ++i) r *= 10;
    return r;
}

// Decimal literal with optional fraction and exponent, no sign.
Rational parse_decimal(std::string_view t) {
    if (t.empty()) throw std::invalid_argument("empty number");
    std::size_t i = 0;
    cpp_int digits = 0;
    bool any = false;
    int scale = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) {
        digits = digits * 10 + (t[i] - '0');
        ++i;
        any = true;
    }
    if (i < t.size() && t[i] == '.') {
        ++i;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) {
            digits = digits * 10 + (t[i] - '0');
            --scale;
            ++i;
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("malformed number '" + std::string(t) + "'");
    if (i < t.size() && (t[i] == 'e' || t[i] == 'E')) {
        ++i;
        bool neg = false;
        if (i < t.size() && (t[i] == '+' || t[i] == '-')) neg = t[i++] == '-';
        if (i == t.size()) throw std::invalid_argument("malformed exponent in '" + std::string(t) + "'");
        int e = 0;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) {
            e = e * 10 + (t[i] - '0');
            if (e > 4000) throw std::invalid_argument("exponent too large");
            ++i;
        }
        scale += neg ? -e : e;
    }
    if (i != t.size()) throw std::invalid_argument("malformed number '" + std::string(t) + "'");
    if (scale >= 0) return Rational(digits * pow10(static_cast<unsigned>(scale)));
    return Rational(digits, pow10(static_cast<unsigned>(-scale)));
}

} // namespace

Rational parse_rational(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    bool neg = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
        neg = text.front() == '-';
        text.remove_prefix(1);
    }
    Rational r;
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        Rational den = parse_decimal(text.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("zero denominator");
        r = parse_decimal(text.substr(0, slash)) / den;
    } else {
        r = parse_decimal(text);
    }
    return neg ? Rational(-r) : r;
}

std::string to_string(const Rational& r) {
    const auto num = boost::multiprecision::numerator(r);
    const auto den = boost::multiprecision::denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

Rational from_double(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite double");
    int exp = 0;
    double mant = std::frexp(x, &exp);
    // 53 significant bits
    auto scaled = static_cast<long long>(std::ldexp(mant, 53));
    exp -= 53;
    Rational r{cpp_int(scaled)};
    cpp_int p = 1;
    p <<= static_cast<unsigned>(std::abs(exp));
    if (exp >= 0) return r * p;
    return r / p;
}

} // namespace pspi
