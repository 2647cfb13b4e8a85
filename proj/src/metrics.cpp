#include "dyndisc/metrics.hpp"

#include <cmath>
#include <exception>
#include <numbers>
#include <random>

#include "dyndisc/error.hpp"

namespace dyndisc {

void ErrorSums::add(const State& approx, const State& truth, double weight) {
  for (std::size_t j = 0; j < diff.size(); ++j) {
    const double e = approx[j] - truth[j];
    diff[j] += weight * e * e;
    norm[j] += weight * truth[j] * truth[j];
  }
}

void ErrorSums::merge(const ErrorSums& other) {
  for (std::size_t j = 0; j < diff.size(); ++j) {
    diff[j] += other.diff[j];
    norm[j] += other.norm[j];
  }
}

std::vector<double> ErrorSums::per_component() const {
  std::vector<double> out(diff.size());
  for (std::size_t j = 0; j < diff.size(); ++j) {
    if (norm[j] == 0.0) {
      throw Error(ErrorCode::ZeroDenominator, "component " + std::to_string(j + 1) + " of the field vanishes");
    }
    out[j] = std::sqrt(diff[j] / norm[j]);
  }
  return out;
}

double ErrorSums::combined() const {
  if (diff.empty()) throw Error(ErrorCode::InvalidArgument, "no components");
  double acc = 0.0;
  for (double e : per_component()) acc += e * e;
  return std::sqrt(acc / static_cast<double>(diff.size()));
}

namespace {

ErrorSums grid_sums(const VectorField& approx, const VectorField& truth, const TrajectoryData& data,
                    const LmmScheme& scheme) {
  const auto idx = scheme_indices(scheme, data.N);
  ErrorSums sums(data.dim());
  for (int n = idx.first; n <= idx.last; ++n) sums.add(approx(data.states[n]), truth(data.states[n]));
  return sums;
}

}  // namespace

double grid_error(const VectorField& approx, const VectorField& truth, const TrajectoryData& data,
                  const LmmScheme& scheme) {
  return grid_sums(approx, truth, data, scheme).combined();
}

double grid_error(const VectorField& approx, const VectorField& truth, const MultiTrajectoryData& data,
                  const LmmScheme& scheme) {
  ErrorSums sums(data.dim());
  for (const auto& traj : data.trajectories) sums.merge(grid_sums(approx, truth, traj, scheme));
  return sums.combined();
}

ErrorSums grid_error_sums(const GridDiscovery& discovered, const VectorField& truth, const TrajectoryData& data) {
  const auto& idx = discovered.indices;
  const std::size_t d = discovered.components.size();
  if (d != data.dim()) throw Error(ErrorCode::InvalidArgument, "component count mismatch");
  ErrorSums sums(d);
  State approx(d);
  for (int n = idx.first; n <= idx.last; ++n) {
    for (std::size_t j = 0; j < d; ++j) approx[j] = discovered.components[j].values[n - idx.first];
    sums.add(approx, truth(data.states[n]));
  }
  return sums;
}

double grid_error(const GridDiscovery& discovered, const VectorField& truth, const TrajectoryData& data) {
  return grid_error_sums(discovered, truth, data).combined();
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1 || n > 64) throw Error(ErrorCode::InvalidArgument, "Gauss-Legendre order must lie in [1, 64]");
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[n - 1 - i] = z;
    w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

double test_error_trajectory(const VectorField& approx, const VectorField& truth, const DenseTrajectory& dense,
                             const QuadratureOptions& options) {
  if (options.panels < 1) throw Error(ErrorCode::InvalidArgument, "panels must be positive");
  const auto [nodes, weights] = gauss_legendre(options.nodes);
  const double T = dense.final_time();
  const double width = T / options.panels;
  ErrorSums sums(dense.dim());
  for (int p = 0; p < options.panels; ++p) {
    const double a = p * width;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double t = a + 0.5 * width * (nodes[k] + 1.0);
      const State x = dense(t);
      const State f = truth(x);
      double speed = 0.0;
      for (double v : f) speed += v * v;
      sums.add(approx(x), f, 0.5 * width * weights[k] * std::sqrt(speed));
    }
  }
  return sums.combined();
}

double test_error_region(const VectorField& approx, const VectorField& truth, const RegionSampler& sampler,
                         int n_samples, std::uint64_t seed) {
  if (n_samples < 100) throw Error(ErrorCode::InvalidArgument, "at least 100 Monte Carlo samples are required");
  const int n_blocks = (n_samples + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<ErrorSums> partial(n_blocks);
  std::vector<std::exception_ptr> failures(n_blocks);
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < n_blocks; ++b) {
    try {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(b)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const int count = std::min(kMonteCarloBlock, n_samples - b * kMonteCarloBlock);
      ErrorSums sums;
      for (int i = 0; i < count; ++i) {
        const double u = unit(rng);
        const double t = unit(rng) * sampler.T;
        const State x = sampler.state(u, t);
        if (sums.diff.empty()) sums = ErrorSums(x.size());
        sums.add(approx(x), truth(x));
      }
      partial[b] = std::move(sums);
    } catch (...) {
      failures[b] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  ErrorSums total = partial.front();
  for (int b = 1; b < n_blocks; ++b) total.merge(partial[b]);
  return total.combined();
}

std::string OrderFit::window_label() const {
  return "[" + std::to_string(window.first) + "," + std::to_string(window.second) + ")";
}

OrderFit convergence_order(const std::vector<std::pair<double, double>>& points,
                           std::optional<std::pair<int, int>> window) {
  OrderFit fit;
  fit.points = points;
  fit.window = window.value_or(std::pair<int, int>{0, static_cast<int>(points.size())});
  const auto [lo, hi] = fit.window;
  if (lo < 0 || hi > static_cast<int>(points.size()) || hi - lo < 2) {
    throw Error(ErrorCode::InvalidArgument, "fit window needs at least two points");
  }
  std::vector<double> X, Y;
  for (int i = lo; i < hi; ++i) {
    const auto [h, e] = points[i];
    if (!(h > 0.0) || !(e > 0.0) || !std::isfinite(e)) {
      throw Error(ErrorCode::InvalidArgument, "step sizes and errors must be positive and finite");
    }
    X.push_back(std::log10(h));
    Y.push_back(std::log10(e));
  }
  const double n = static_cast<double>(X.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    mx += X[i];
    my += Y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    sxx += (X[i] - mx) * (X[i] - mx);
    sxy += (X[i] - mx) * (Y[i] - my);
    syy += (Y[i] - my) * (Y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::DegenerateFit, "all step sizes coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace dyndisc
