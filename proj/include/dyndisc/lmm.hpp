#pragma once

// Linear multistep coefficient families and one-sided finite-difference
// stencils. All coefficients are generated from their moment conditions in
// exact rational arithmetic.

#include <string>
#include <string_view>
#include <vector>

#include "dyndisc/rational.hpp"
#include "dyndisc/types.hpp"

namespace dyndisc {

enum class SchemeFamily { AdamsBashforth, AdamsMoulton, BDF };

/// Short tag used on the command line and in CSV output: "ab", "am", "bdf".
[[nodiscard]] std::string_view family_tag(SchemeFamily family) noexcept;
[[nodiscard]] SchemeFamily parse_family(std::string_view tag);

inline constexpr int kMaxSteps = 6;
inline constexpr int kMaxFdmOrder = 7;

/// Σ α_m x_{n-m} = h Σ β_m f(x_{n-m}), normalized so that α_0 = 1.
struct LmmScheme {
  SchemeFamily family;
  int steps;                   // M
  std::vector<Rational> alpha; // α_0..α_M
  std::vector<Rational> beta;  // β_0..β_M
  int order;                   // p

  [[nodiscard]] std::vector<double> alpha_values() const { return to_double(alpha); }
  [[nodiscard]] std::vector<double> beta_values() const { return to_double(beta); }
  /// e.g. "AB2", "AM1", "BDF4".
  [[nodiscard]] std::string id() const;
};

/// First/last involved grid index of the unknown field values, their count
/// and the number of auxiliary conditions needed for a unique solution.
struct SchemeIndices {
  int first;      // s
  int last;       // e(N)
  int count;      // t(N)
  int aux_count;  // N_a
};

struct FdmStencil {
  int order;                    // p
  std::vector<Rational> gamma;  // γ_0..γ_p

  [[nodiscard]] std::vector<double> values() const { return to_double(gamma); }
};

/// Where auxiliary conditions are placed. Only the leading one-sided stencil
/// is implemented.
enum class AuxPlacement { Initial };

/// Generates the M-step scheme of `family` by solving its order conditions.
/// Throws Error(UnsupportedSteps) unless 1 <= M <= 6.
[[nodiscard]] LmmScheme build_scheme(SchemeFamily family, int steps);

/// C_0..C_{k_max}: C_0 = Σ α_m, C_k = Σ (-m)^k α_m - k Σ (-m)^{k-1} β_m.
[[nodiscard]] std::vector<Rational> order_condition_residuals(const std::vector<Rational>& alpha,
                                                              const std::vector<Rational>& beta,
                                                              int k_max);
[[nodiscard]] std::vector<Rational> order_condition_residuals(const LmmScheme& scheme, int k_max);

/// Largest p with C_0 = ... = C_p = 0 (0 if the scheme is inconsistent).
[[nodiscard]] int empirical_order(const LmmScheme& scheme);

/// Throws Error(TooFewSamples) if N < M.
[[nodiscard]] SchemeIndices scheme_indices(const LmmScheme& scheme, int N);

/// Forward one-sided first-derivative stencil of order p on p+1 points.
/// Throws Error(UnsupportedOrder) unless 1 <= p <= 7.
[[nodiscard]] FdmStencil fdm_stencil(int order);

/// τ_{h,n} = (1/h) Σ α_m x(t_{n-m}) - Σ β_m f(x(t_{n-m})), with t_j = j h.
[[nodiscard]] State local_truncation_error(const LmmScheme& scheme, const StatePath& x,
                                           const VectorField& f, double h, int n);

}  // namespace dyndisc
