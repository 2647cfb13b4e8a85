#pragma once

// Root-condition classification of discovery schemes and empirical
// 2-norm condition numbers of the augmented matrix A_h.

#include <complex>
#include <string>
#include <vector>

#include "dyndisc/assembly.hpp"
#include "dyndisc/lmm.hpp"

namespace dyndisc {

/// p_h(z) = Σ_{i=N-e(N)}^{M-s} β_i z^{M-s-i}, coefficients highest degree first.
struct CharPolynomial {
  std::vector<double> coeffs;
  int degree = 0;

  [[nodiscard]] std::complex<double> operator()(std::complex<double> z) const;
};

enum class StabilityClass { Stable, Marginal, Unstable };

[[nodiscard]] std::string_view to_string(StabilityClass c) noexcept;

inline constexpr double kRootTolerance = 1e-8;

struct StabilityReport {
  std::string scheme_id;
  std::vector<std::complex<double>> roots;
  double max_modulus = 0.0;
  StabilityClass classification = StabilityClass::Stable;
};

struct ConditionSample {
  int N = 0;
  double kappa2 = 1.0;
};

[[nodiscard]] CharPolynomial characteristic_polynomial(const LmmScheme& scheme);

/// All complex roots, as eigenvalues of the companion matrix. Empty for degree 0.
[[nodiscard]] std::vector<std::complex<double>> polynomial_roots(const CharPolynomial& poly);

[[nodiscard]] StabilityReport classify(const LmmScheme& scheme);

/// Largest square size for which the exact dense route is used.
inline constexpr int kExactConditionLimit = 512;

/// κ₂ via dense singular values: σ_max from A, σ_min as 1/σ_max(A⁻¹) with A⁻¹
/// formed by forward substitution.
[[nodiscard]] double condition_number_exact(const BandedLowerMatrix& A);

/// κ₂ via power iteration on AᵀA and inverse iteration through two
/// triangular solves per step.
[[nodiscard]] double condition_number_iterative(const BandedLowerMatrix& A, double rtol = 1e-6,
                                                int max_iter = 200000);

/// Dispatches on size: exact for n <= 512, iterative otherwise.
[[nodiscard]] double condition_number(const BandedLowerMatrix& A);
[[nodiscard]] double condition_number(const AugmentedSystem& system);

/// κ₂(A_h) for each N; samples are computed in parallel.
[[nodiscard]] std::vector<ConditionSample> boundedness_scan(const LmmScheme& scheme, const std::vector<int>& Ns);

}  // namespace dyndisc
