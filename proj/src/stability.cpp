#include "dyndisc/stability.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dyndisc/error.hpp"

namespace dyndisc {

std::complex<double> CharPolynomial::operator()(std::complex<double> z) const {
  std::complex<double> acc = 0.0;
  for (double c : coeffs) acc = acc * z + c;
  return acc;
}

std::string_view to_string(StabilityClass c) noexcept {
  switch (c) {
    case StabilityClass::Stable: return "Stable";
    case StabilityClass::Marginal: return "Marginal";
    case StabilityClass::Unstable: return "Unstable";
  }
  return "?";
}

CharPolynomial characteristic_polynomial(const LmmScheme& scheme) {
  // s and N - e(N) do not depend on N; any admissible N will do.
  const int N = 4 * scheme.steps + 8;
  const auto idx = scheme_indices(scheme, N);
  const int top = scheme.steps - idx.first;
  const int tail = N - idx.last;
  const auto beta = scheme.beta_values();
  CharPolynomial poly;
  for (int i = tail; i <= top; ++i) poly.coeffs.push_back(beta[i]);
  poly.degree = top - tail;
  return poly;
}

std::vector<std::complex<double>> polynomial_roots(const CharPolynomial& poly) {
  // Strip vanishing leading coefficients so the companion matrix is well defined.
  std::size_t lead = 0;
  while (lead < poly.coeffs.size() && poly.coeffs[lead] == 0.0) ++lead;
  if (lead + 1 >= poly.coeffs.size()) return {};
  const int n = static_cast<int>(poly.coeffs.size() - lead - 1);
  const double a0 = poly.coeffs[lead];
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) companion(0, j) = -poly.coeffs[lead + 1 + j] / a0;
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<std::complex<double>> roots;
  for (int i = 0; i < n; ++i) roots.push_back(solver.eigenvalues()(i));
  std::sort(roots.begin(), roots.end(), [](auto a, auto b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a.imag() < b.imag();
  });
  return roots;
}

StabilityReport classify(const LmmScheme& scheme) {
  StabilityReport report;
  report.scheme_id = scheme.id();
  report.roots = polynomial_roots(characteristic_polynomial(scheme));
  for (const auto& r : report.roots) report.max_modulus = std::max(report.max_modulus, std::abs(r));
  if (report.roots.empty() || report.max_modulus < 1.0 - kRootTolerance) {
    report.classification = StabilityClass::Stable;
  } else if (report.max_modulus <= 1.0 + kRootTolerance) {
    report.classification = StabilityClass::Marginal;
  } else {
    report.classification = StabilityClass::Unstable;
  }
  return report;
}

namespace {

double largest_singular_value(const Eigen::MatrixXd& M) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

void normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<double> start_vector(int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + 0.7 * i);
  normalize(v);
  return v;
}

// Largest eigenvalue of a symmetric positive operator by power iteration.
template <class Apply>
double power_iteration(int n, Apply&& apply, double rtol, int max_iter) {
  auto v = start_vector(n);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    auto w = apply(v);
    const double next = dot(v, w);
    if (!std::isfinite(next)) return std::numeric_limits<double>::infinity();
    v = std::move(w);
    normalize(v);
    if (it > 0 && std::abs(next - lambda) <= rtol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace

double condition_number_exact(const BandedLowerMatrix& A) {
  if (!A.square()) throw Error(ErrorCode::InvalidArgument, "condition number needs a square matrix");
  const int n = A.rows();
  const Eigen::MatrixXd dense = A.to_dense();
  Eigen::MatrixXd inverse(n, n);
  std::vector<double> e(n, 0.0);
  for (int c = 0; c < n; ++c) {
    std::fill(e.begin(), e.end(), 0.0);
    e[c] = 1.0;
    const auto col = A.solve_lower(e);
    for (int r = 0; r < n; ++r) inverse(r, c) = col[r];
  }
  return largest_singular_value(dense) * largest_singular_value(inverse);
}

double condition_number_iterative(const BandedLowerMatrix& A, double rtol, int max_iter) {
  if (!A.square()) throw Error(ErrorCode::InvalidArgument, "condition number needs a square matrix");
  const int n = A.rows();
  // The eigenvalue estimates converge in their Rayleigh quotients; the stopping
  // threshold on successive changes is kept well below rtol.
  const double inner_tol = rtol * 1e-3;
  const double lmax = power_iteration(
      n, [&](const std::vector<double>& v) { return A.multiply_transpose(A.multiply(v)); }, inner_tol,
      max_iter);
  const double lmin_inv = power_iteration(
      n, [&](const std::vector<double>& v) { return A.solve_lower(A.solve_lower_transpose(v)); },
      inner_tol, max_iter);
  const double kappa = std::sqrt(lmax) * std::sqrt(lmin_inv);
  return std::isfinite(kappa) ? kappa : std::numeric_limits<double>::infinity();
}

double condition_number(const BandedLowerMatrix& A) {
  return A.rows() <= kExactConditionLimit ? condition_number_exact(A) : condition_number_iterative(A);
}

double condition_number(const AugmentedSystem& system) { return condition_number(system.matrix); }

std::vector<ConditionSample> boundedness_scan(const LmmScheme& scheme, const std::vector<int>& Ns) {
  if (!std::is_sorted(Ns.begin(), Ns.end())) throw Error(ErrorCode::InvalidArgument, "Ns must be ascending");
  const int count = static_cast<int>(Ns.size());
  std::vector<ConditionSample> out(count);
  std::vector<std::exception_ptr> failures(count);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      out[i] = ConditionSample{Ns[i], condition_number(assemble_A(scheme, Ns[i]))};
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

}  // namespace dyndisc
