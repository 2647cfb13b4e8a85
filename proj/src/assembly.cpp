#include "dyndisc/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "dyndisc/error.hpp"

namespace dyndisc {

namespace {

// Width of the β window (M-s)-(N-e(N))+1; independent of N.
int window_width(const SchemeIndices& idx, int M, int N) {
  return (M - idx.first) - (N - idx.last) + 1;
}

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

BandedLowerMatrix assemble_B(const LmmScheme& scheme, int N) {
  const auto idx = scheme_indices(scheme, N);
  const int M = scheme.steps;
  const int width = window_width(idx, M, N);
  const auto beta = scheme.beta_values();
  BandedLowerMatrix B(N - M + 1, idx.count, width, 0, BandStructure::LmmBlock);
  for (int r = 0; r < B.rows(); ++r) {
    for (int j = 0; j < width; ++j) B.band(r, j) = beta[M - idx.first - j];
  }
  return B;
}

BandedLowerMatrix assemble_A(const LmmScheme& scheme, int N) {
  const auto idx = scheme_indices(scheme, N);
  const int M = scheme.steps;
  const int width = window_width(idx, M, N);
  // The augmented matrix is square lower triangular only when the auxiliary
  // block exactly fills the leading band offset.
  if (idx.aux_count != width - 1) {
    throw Error(ErrorCode::InvalidArgument, "augmented system of " + scheme.id() + " is not square-banded");
  }
  const auto beta = scheme.beta_values();
  BandedLowerMatrix A(idx.count, idx.count, width, -(width - 1), BandStructure::Augmented);
  for (int r = 0; r < idx.aux_count; ++r) A.band(r, width - 1) = 1.0;
  for (int q = 0; q < N - M + 1; ++q) {
    const int r = idx.aux_count + q;
    for (int j = 0; j < width; ++j) A.band(r, j) = beta[M - idx.first - j];
  }
  return A;
}

namespace {

void check_data(const LmmScheme& scheme, const TrajectoryData& data, std::size_t component) {
  if (component >= data.dim()) throw Error(ErrorCode::IndexOutOfRange, "component out of range");
  if (static_cast<int>(data.states.size()) != data.N + 1) {
    throw Error(ErrorCode::InvalidArgument, "trajectory must hold N+1 samples");
  }
  (void)scheme_indices(scheme, data.N);
}

}  // namespace

std::vector<double> assemble_lmm_rhs(const LmmScheme& scheme, const TrajectoryData& data, std::size_t component) {
  check_data(scheme, data, component);
  const int N = data.N;
  const int M = scheme.steps;
  const auto alpha = scheme.alpha_values();
  std::vector<double> q(N - M + 1);
  for (int n = M; n <= N; ++n) {
    double acc = 0.0;
    for (int m = 0; m <= M; ++m) acc += alpha[m] * data.at(n - m, component);
    q[n - M] = acc / data.h;
  }
  return q;
}

std::vector<double> assemble_aux_rhs(const LmmScheme& scheme, const TrajectoryData& data, std::size_t component) {
  check_data(scheme, data, component);
  const int N = data.N;
  const auto idx = scheme_indices(scheme, N);
  if (idx.aux_count == 0) return {};
  const auto stencil = fdm_stencil(scheme.order);
  const auto gamma = stencil.values();
  const int last_needed = idx.first + idx.aux_count - 1 + stencil.order;
  if (last_needed > N) {
    throw Error(ErrorCode::IndexOutOfRange,
                "auxiliary stencil of order " + std::to_string(stencil.order) + " reaches sample " +
                    std::to_string(last_needed) + " > N=" + std::to_string(N));
  }
  std::vector<double> c(idx.aux_count);
  for (int a = 0; a < idx.aux_count; ++a) {
    const int n = idx.first + a;
    double acc = 0.0;
    for (int m = 0; m <= stencil.order; ++m) acc += gamma[m] * data.at(n + m, component);
    c[a] = acc / data.h;
  }
  return c;
}

RhsParts assemble_rhs(const LmmScheme& scheme, const TrajectoryData& data, std::size_t component) {
  return RhsParts{assemble_aux_rhs(scheme, data, component), assemble_lmm_rhs(scheme, data, component)};
}

AugmentedSystem assemble_system(const LmmScheme& scheme, const TrajectoryData& data,
                                std::size_t component) {
  AugmentedSystem sys;
  sys.matrix = assemble_A(scheme, data.N);
  auto parts = assemble_rhs(scheme, data, component);
  sys.aux_count = static_cast<int>(parts.aux.size());
  sys.rhs = std::move(parts.aux);
  sys.rhs.insert(sys.rhs.end(), parts.lmm.begin(), parts.lmm.end());
  sys.scheme_id = scheme.id();
  sys.h = data.h;
  return sys;
}

std::vector<double> solve_forward_substitution(const AugmentedSystem& system) {
  return system.matrix.solve_lower(system.rhs);
}

GmresResult solve_gmres(const BandedLowerMatrix& A, const std::vector<double>& b,
                        const GmresOptions& options) {
  const int n = static_cast<int>(b.size());
  if (!A.square() || A.rows() != n) throw Error(ErrorCode::InvalidArgument, "GMRES needs a square system");
  const int max_iter = options.max_iter > 0 ? options.max_iter : 10 * n;
  const int restart = std::max(1, std::min(options.restart, n));

  GmresResult result;
  result.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    result.converged = true;
    return result;
  }

  std::vector<double> x(n, 0.0);
  std::vector<double> r = b;
  double beta = bnorm;
  result.relative_residual = 1.0;

  std::vector<std::vector<double>> V(restart + 1, std::vector<double>(n));
  std::vector<std::vector<double>> H(restart + 1, std::vector<double>(restart, 0.0));
  std::vector<double> cs(restart), sn(restart), g(restart + 1);

  int total = 0;
  while (total < max_iter) {
    for (auto& row : H) std::fill(row.begin(), row.end(), 0.0);
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    for (int i = 0; i < n; ++i) V[0][i] = r[i] / beta;

    int k = 0;
    bool breakdown = false;
    while (k < restart && total < max_iter) {
      std::vector<double> w = A.multiply(V[k]);
      for (int i = 0; i <= k; ++i) {
        const double hik = std::inner_product(w.begin(), w.end(), V[i].begin(), 0.0);
        H[i][k] = hik;
        for (int t = 0; t < n; ++t) w[t] -= hik * V[i][t];
      }
      const double wnorm = norm2(w);
      H[k + 1][k] = wnorm;
      if (wnorm > 0.0) {
        for (int t = 0; t < n; ++t) V[k + 1][t] = w[t] / wnorm;
      } else {
        breakdown = true;
      }
      for (int i = 0; i < k; ++i) {
        const double tmp = cs[i] * H[i][k] + sn[i] * H[i + 1][k];
        H[i + 1][k] = -sn[i] * H[i][k] + cs[i] * H[i + 1][k];
        H[i][k] = tmp;
      }
      const double denom = std::hypot(H[k][k], H[k + 1][k]);
      cs[k] = denom == 0.0 ? 1.0 : H[k][k] / denom;
      sn[k] = denom == 0.0 ? 0.0 : H[k + 1][k] / denom;
      H[k][k] = cs[k] * H[k][k] + sn[k] * H[k + 1][k];
      H[k + 1][k] = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++k;
      ++total;
      if (breakdown || std::abs(g[k]) <= options.tol * bnorm) break;
    }

    std::vector<double> y(k, 0.0);
    for (int i = k - 1; i >= 0; --i) {
      double acc = g[i];
      for (int j = i + 1; j < k; ++j) acc -= H[i][j] * y[j];
      y[i] = H[i][i] != 0.0 ? acc / H[i][i] : 0.0;
    }
    for (int i = 0; i < k; ++i) {
      for (int t = 0; t < n; ++t) x[t] += y[i] * V[i][t];
    }

    const auto Ax = A.multiply(x);
    for (int t = 0; t < n; ++t) r[t] = b[t] - Ax[t];
    beta = norm2(r);
    const double rel = beta / bnorm;
    if (!std::isfinite(rel)) break;
    if (rel < result.relative_residual || total == k) {
      result.x = x;
      result.relative_residual = rel;
    }
    result.iterations = total;
    if (rel <= options.tol) {
      result.converged = true;
      return result;
    }
    if (beta == 0.0) break;
  }
  result.iterations = total;
  return result;
}

GmresResult solve_gmres(const AugmentedSystem& system, const GmresOptions& options) {
  return solve_gmres(system.matrix, system.rhs, options);
}

GridDiscovery grid_discovery(const LmmScheme& scheme, const TrajectoryData& data, const SolverSpec& solver) {
  GridDiscovery out;
  out.indices = scheme_indices(scheme, data.N);
  const int d = static_cast<int>(data.dim());
  out.components.resize(d);
  // Components are independent; exceptions are collected and rethrown serially.
  std::vector<std::exception_ptr> failures(d);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < d; ++j) {
    try {
      const auto sys = assemble_system(scheme, data, static_cast<std::size_t>(j));
      ComponentSolve cs;
      if (solver.kind == SolverKind::Forward) {
        cs.values = solve_forward_substitution(sys);
        const auto Ax = sys.matrix.multiply(cs.values);
        double rn = 0.0, bn = 0.0;
        for (std::size_t i = 0; i < Ax.size(); ++i) {
          rn += (Ax[i] - sys.rhs[i]) * (Ax[i] - sys.rhs[i]);
          bn += sys.rhs[i] * sys.rhs[i];
        }
        cs.relative_residual = bn > 0.0 ? std::sqrt(rn / bn) : std::sqrt(rn);
      } else {
        auto res = solve_gmres(sys, solver.gmres);
        cs.values = std::move(res.x);
        cs.iterations = res.iterations;
        cs.relative_residual = res.relative_residual;
        cs.converged = res.converged;
      }
      out.components[j] = std::move(cs);
    } catch (...) {
      failures[j] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

}  // namespace dyndisc
