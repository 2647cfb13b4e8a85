#include "dyndisc/rational.hpp"

#include <utility>

#include "dyndisc/error.hpp"

namespace dyndisc {

Rational ipow(const Rational& base, int exp) {
  Rational out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

std::vector<Rational> solve_exact(std::vector<std::vector<Rational>> A, std::vector<Rational> b) {
  const std::size_t n = b.size();
  if (A.size() != n) throw Error(ErrorCode::InvalidArgument, "solve_exact: shape mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && A[pivot][col] == 0) ++pivot;
    if (pivot == n) throw Error(ErrorCode::SingularMatrix, "solve_exact: singular system");
    std::swap(A[pivot], A[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t row = col + 1; row < n; ++row) {
      if (A[row][col] == 0) continue;
      const Rational factor = A[row][col] / A[col][col];
      for (std::size_t k = col; k < n; ++k) A[row][k] -= factor * A[col][k];
      b[row] -= factor * b[col];
    }
  }
  std::vector<Rational> x(n);
  for (std::size_t i = n; i-- > 0;) {
    Rational acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= A[i][k] * x[k];
    x[i] = acc / A[i][i];
  }
  return x;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::vector<double> to_double(const std::vector<Rational>& rs) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(to_double(r));
  return out;
}

std::string to_string(const Rational& r) { return r.str(); }

}  // namespace dyndisc
