#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace pspi {

using Rational = boost::multiprecision::cpp_rational;

/// Parses "3", "-3/4", "0.25", "1e-3" exactly. Throws std::invalid_argument.
Rational parse_rational(std::string_view text);

/// "3", "-3/4"; always a reduced quotient, never a decimal.
std::string to_string(const Rational& r);

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Exact rational value of a finite double.
Rational from_double(double x);

} // namespace pspi
