#pragma once

#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace dyndisc {

using Rational = boost::multiprecision::cpp_rational;

/// base^exp with the convention 0^0 = 1.
[[nodiscard]] Rational ipow(const Rational& base, int exp);

/// Solves the square system A x = b exactly by Gaussian elimination.
/// Throws Error(SingularMatrix) if A is singular.
[[nodiscard]] std::vector<Rational> solve_exact(std::vector<std::vector<Rational>> A,
                                                std::vector<Rational> b);

[[nodiscard]] double to_double(const Rational& r);
[[nodiscard]] std::vector<double> to_double(const std::vector<Rational>& rs);
[[nodiscard]] std::string to_string(const Rational& r);

}  // namespace dyndisc
