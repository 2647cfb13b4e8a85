#pragma once

// Discovery as a linear solve: the LMM block B_h, the augmented square system
// A_h f = [c_h; q_h] and its direct and Krylov solvers.

#include <string>
#include <vector>

#include "dyndisc/banded.hpp"
#include "dyndisc/lmm.hpp"
#include "dyndisc/trajectory.hpp"

namespace dyndisc {

struct AugmentedSystem {
  BandedLowerMatrix matrix;
  std::vector<double> rhs;  // [c_h; q_h]
  int aux_count = 0;
  std::string scheme_id;
  double h = 0.0;
};

struct RhsParts {
  std::vector<double> aux;  // c_h, length N_a
  std::vector<double> lmm;  // q_h, length N-M+1
};

/// (N-M+1) × t(N) Toeplitz band; row r holds β_{M-s-j} at column r+j.
[[nodiscard]] BandedLowerMatrix assemble_B(const LmmScheme& scheme, int N);

/// [I_{N_a} O; B_h], square and lower triangular.
[[nodiscard]] BandedLowerMatrix assemble_A(const LmmScheme& scheme, int N);

/// q_h: (1/h) Σ α_m x_{n-m} for n = M..N.
[[nodiscard]] std::vector<double> assemble_lmm_rhs(const LmmScheme& scheme, const TrajectoryData& data,
                                                   std::size_t component);

/// c_h: one-sided stencil values of order p at n = s..s+N_a-1.
/// Throws Error(IndexOutOfRange) if the stencil reaches past N.
[[nodiscard]] std::vector<double> assemble_aux_rhs(const LmmScheme& scheme, const TrajectoryData& data,
                                                   std::size_t component);

/// q_h and the initial one-sided stencil values c_h for one state component.
[[nodiscard]] RhsParts assemble_rhs(const LmmScheme& scheme, const TrajectoryData& data,
                                    std::size_t component);

[[nodiscard]] AugmentedSystem assemble_system(const LmmScheme& scheme, const TrajectoryData& data,
                                              std::size_t component);

[[nodiscard]] std::vector<double> solve_forward_substitution(const AugmentedSystem& system);

struct GmresOptions {
  double tol = 1e-8;
  int max_iter = 0;  // 0 selects 10·n
  int restart = 50;
};

struct GmresResult {
  std::vector<double> x;       // converged iterate, or the best one seen
  double relative_residual = 0.0;
  int iterations = 0;
  bool converged = false;      // false: the NotConverged flag
};

/// Restarted GMRES from a zero initial guess; stops once ‖b - Ax‖₂ / ‖b‖₂ <= tol.
[[nodiscard]] GmresResult solve_gmres(const BandedLowerMatrix& A, const std::vector<double>& b,
                                      const GmresOptions& options);
[[nodiscard]] GmresResult solve_gmres(const AugmentedSystem& system, const GmresOptions& options);

enum class SolverKind { Forward, Gmres };

struct SolverSpec {
  SolverKind kind = SolverKind::Forward;
  GmresOptions gmres;

  [[nodiscard]] static SolverSpec forward() { return {}; }
  [[nodiscard]] static SolverSpec gmres_with(double tol, int restart = 50, int max_iter = 0) {
    return {SolverKind::Gmres, GmresOptions{tol, max_iter, restart}};
  }
};

struct ComponentSolve {
  std::vector<double> values;  // f_s..f_{e(N)}
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = true;
};

struct GridDiscovery {
  SchemeIndices indices{};
  std::vector<ComponentSolve> components;
};

/// Solves the augmented system for every component of `data`.
[[nodiscard]] GridDiscovery grid_discovery(const LmmScheme& scheme, const TrajectoryData& data,
                                           const SolverSpec& solver);

}  // namespace dyndisc
