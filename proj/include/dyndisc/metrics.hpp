#pragma once

// Relative ℓ² errors at grid points, along a trajectory and over a region,
// and log-log convergence-order fits.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dyndisc/assembly.hpp"
#include "dyndisc/integrate.hpp"
#include "dyndisc/lmm.hpp"
#include "dyndisc/models.hpp"
#include "dyndisc/trajectory.hpp"
#include "dyndisc/types.hpp"

namespace dyndisc {

struct ErrorRecord {
  std::string scheme_id;
  double h = 0.0;
  double grid_error = 0.0;
  double test_error = 0.0;
  std::vector<double> grid_per_component;
  std::vector<double> test_per_component;
};

/// Accumulated Σ|approx - truth|² and Σ|truth|² per component.
struct ErrorSums {
  std::vector<double> diff;
  std::vector<double> norm;

  explicit ErrorSums(std::size_t d = 0) : diff(d, 0.0), norm(d, 0.0) {}
  void add(const State& approx, const State& truth, double weight = 1.0);
  void merge(const ErrorSums& other);
  /// sqrt(mean_j diff_j / norm_j). Throws Error(ZeroDenominator).
  [[nodiscard]] double combined() const;
  [[nodiscard]] std::vector<double> per_component() const;
};

/// Relative ℓ² error of `approx` over the involved grid points s..e(N).
[[nodiscard]] double grid_error(const VectorField& approx, const VectorField& truth, const TrajectoryData& data,
                                const LmmScheme& scheme);
/// Sums over every trajectory before forming the ratio.
[[nodiscard]] double grid_error(const VectorField& approx, const VectorField& truth,
                                const MultiTrajectoryData& data, const LmmScheme& scheme);
/// Grid-function values from a linear solve against the truth at x_s..x_{e(N)}.
[[nodiscard]] double grid_error(const GridDiscovery& discovered, const VectorField& truth,
                                const TrajectoryData& data);
[[nodiscard]] ErrorSums grid_error_sums(const GridDiscovery& discovered, const VectorField& truth,
                                        const TrajectoryData& data);

struct QuadratureOptions {
  int panels = 200;
  int nodes = 5;
};

/// Ratio of ∫ |f̂ - f|² ‖f‖₂ dt to ∫ |f|² ‖f‖₂ dt along the dense trajectory,
/// by composite Gauss-Legendre quadrature.
[[nodiscard]] double test_error_trajectory(const VectorField& approx, const VectorField& truth,
                                           const DenseTrajectory& dense, const QuadratureOptions& options = {});

/// Monte Carlo estimate of the same ratio over the region, sampling (u, t)
/// uniformly in [0, 1] × [0, T]. Samples are drawn in blocks of 64 with one
/// seeded stream per block.
[[nodiscard]] double test_error_region(const VectorField& approx, const VectorField& truth,
                                       const RegionSampler& sampler, int n_samples, std::uint64_t seed);

inline constexpr int kMonteCarloBlock = 64;

struct OrderFit {
  std::vector<std::pair<double, double>> points;  // (h, error)
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::pair<int, int> window{0, 0};  // half-open index range used

  [[nodiscard]] std::string window_label() const;
};

/// Least-squares line through (log₁₀ h, log₁₀ e). Throws Error(DegenerateFit)
/// when all h in the window coincide.
[[nodiscard]] OrderFit convergence_order(const std::vector<std::pair<double, double>>& points,
                                         std::optional<std::pair<int, int>> window = std::nullopt);

/// Gauss-Legendre nodes and weights on [-1, 1] (1 <= n <= 8).
[[nodiscard]] std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

}  // namespace dyndisc
