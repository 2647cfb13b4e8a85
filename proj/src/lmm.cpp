#include "dyndisc/lmm.hpp"

#include <cstddef>

#include "dyndisc/error.hpp"

namespace dyndisc {

std::string_view family_tag(SchemeFamily family) noexcept {
  switch (family) {
    case SchemeFamily::AdamsBashforth: return "ab";
    case SchemeFamily::AdamsMoulton: return "am";
    case SchemeFamily::BDF: return "bdf";
  }
  return "?";
}

SchemeFamily parse_family(std::string_view tag) {
  if (tag == "ab" || tag == "AB") return SchemeFamily::AdamsBashforth;
  if (tag == "am" || tag == "AM") return SchemeFamily::AdamsMoulton;
  if (tag == "bdf" || tag == "BDF") return SchemeFamily::BDF;
  throw Error(ErrorCode::InvalidArgument, "unknown scheme family '" + std::string(tag) + "'");
}

std::string LmmScheme::id() const {
  switch (family) {
    case SchemeFamily::AdamsBashforth: return "AB" + std::to_string(steps);
    case SchemeFamily::AdamsMoulton: return "AM" + std::to_string(steps);
    case SchemeFamily::BDF: return "BDF" + std::to_string(steps);
  }
  return "?";
}

namespace {

// Coefficient of α_m and β_m in C_k.
Rational alpha_weight(int m, int k) { return ipow(Rational(-m), k); }
Rational beta_weight(int m, int k) {
  if (k == 0) return 0;
  return -Rational(k) * ipow(Rational(-m), k - 1);
}

int table_order(SchemeFamily family, int steps) {
  return family == SchemeFamily::AdamsMoulton ? steps + 1 : steps;
}

}  // namespace

LmmScheme build_scheme(SchemeFamily family, int steps) {
  if (steps < 1 || steps > kMaxSteps) {
    throw Error(ErrorCode::UnsupportedSteps,
                "steps must lie in [1, " + std::to_string(kMaxSteps) + "], got " + std::to_string(steps));
  }
  const int M = steps;
  const int p = table_order(family, M);

  // Unknown coefficients are addressed as (is_beta, m); the rest are fixed.
  struct Slot {
    bool is_beta;
    int m;
  };
  std::vector<Slot> unknowns;
  std::vector<Rational> alpha(M + 1, 0), beta(M + 1, 0);
  int first_condition = 1;
  switch (family) {
    case SchemeFamily::AdamsBashforth:
      alpha[0] = 1;
      alpha[1] = -1;
      for (int m = 1; m <= M; ++m) unknowns.push_back({true, m});
      break;
    case SchemeFamily::AdamsMoulton:
      alpha[0] = 1;
      alpha[1] = -1;
      for (int m = 0; m <= M; ++m) unknowns.push_back({true, m});
      break;
    case SchemeFamily::BDF:
      alpha[0] = 1;
      for (int m = 1; m <= M; ++m) unknowns.push_back({false, m});
      unknowns.push_back({true, 0});
      first_condition = 0;
      break;
  }

  const auto n = unknowns.size();
  std::vector<std::vector<Rational>> A(n, std::vector<Rational>(n));
  std::vector<Rational> rhs(n);
  for (std::size_t row = 0; row < n; ++row) {
    const int k = first_condition + static_cast<int>(row);
    Rational fixed = 0;
    for (int m = 0; m <= M; ++m) {
      fixed += alpha_weight(m, k) * alpha[m] + beta_weight(m, k) * beta[m];
    }
    rhs[row] = -fixed;
    for (std::size_t col = 0; col < n; ++col) {
      const auto& u = unknowns[col];
      A[row][col] = u.is_beta ? beta_weight(u.m, k) : alpha_weight(u.m, k);
    }
  }
  const auto solution = solve_exact(std::move(A), std::move(rhs));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = unknowns[i];
    (u.is_beta ? beta : alpha)[u.m] = solution[i];
  }
  return LmmScheme{family, M, std::move(alpha), std::move(beta), p};
}

std::vector<Rational> order_condition_residuals(const std::vector<Rational>& alpha,
                                                const std::vector<Rational>& beta, int k_max) {
  if (k_max < 0) throw Error(ErrorCode::InvalidArgument, "k_max must be non-negative");
  std::vector<Rational> out;
  out.reserve(k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    Rational c = 0;
    for (std::size_t m = 0; m < alpha.size(); ++m) c += alpha_weight(static_cast<int>(m), k) * alpha[m];
    for (std::size_t m = 0; m < beta.size(); ++m) c += beta_weight(static_cast<int>(m), k) * beta[m];
    out.push_back(c);
  }
  return out;
}

std::vector<Rational> order_condition_residuals(const LmmScheme& scheme, int k_max) {
  return order_condition_residuals(scheme.alpha, scheme.beta, k_max);
}

int empirical_order(const LmmScheme& scheme) {
  const int k_max = 2 * scheme.steps + 2;
  const auto c = order_condition_residuals(scheme, k_max);
  if (c[0] != 0) return 0;
  int p = 0;
  while (p + 1 <= k_max && c[p + 1] == 0) ++p;
  return p;
}

SchemeIndices scheme_indices(const LmmScheme& scheme, int N) {
  const int M = scheme.steps;
  if (N < M) {
    throw Error(ErrorCode::TooFewSamples,
                "need N >= M (N=" + std::to_string(N) + ", M=" + std::to_string(M) + ")");
  }
  SchemeIndices idx{};
  switch (scheme.family) {
    case SchemeFamily::AdamsBashforth: idx.first = 0; idx.last = N - 1; break;
    case SchemeFamily::AdamsMoulton: idx.first = 0; idx.last = N; break;
    case SchemeFamily::BDF: idx.first = M; idx.last = N; break;
  }
  idx.count = idx.last - idx.first + 1;
  idx.aux_count = idx.count - (N - M + 1);
  return idx;
}

FdmStencil fdm_stencil(int order) {
  if (order < 1 || order > kMaxFdmOrder) {
    throw Error(ErrorCode::UnsupportedOrder,
                "FDM order must lie in [1, " + std::to_string(kMaxFdmOrder) + "], got " + std::to_string(order));
  }
  const int n = order + 1;
  std::vector<std::vector<Rational>> A(n, std::vector<Rational>(n));
  std::vector<Rational> rhs(n, 0);
  for (int k = 0; k < n; ++k) {
    for (int m = 0; m < n; ++m) A[k][m] = ipow(Rational(m), k);
  }
  rhs[1] = 1;
  return FdmStencil{order, solve_exact(std::move(A), std::move(rhs))};
}

State local_truncation_error(const LmmScheme& scheme, const StatePath& x, const VectorField& f,
                             double h, int n) {
  const int M = scheme.steps;
  if (n < M) throw Error(ErrorCode::IndexOutOfRange, "local truncation error needs n >= M");
  const auto alpha = scheme.alpha_values();
  const auto beta = scheme.beta_values();
  State diff, field;
  for (int m = 0; m <= M; ++m) {
    const State xm = x((n - m) * h);
    const State fm = f(xm);
    if (diff.empty()) {
      diff.assign(xm.size(), 0.0);
      field.assign(xm.size(), 0.0);
    }
    for (std::size_t i = 0; i < xm.size(); ++i) {
      diff[i] += alpha[m] * xm[i];
      field[i] += beta[m] * fm[i];
    }
  }
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = diff[i] / h - field[i];
  return diff;
}

}  // namespace dyndisc
