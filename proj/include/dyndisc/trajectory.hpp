#pragma once

#include <cstddef>
#include <vector>

#include "dyndisc/types.hpp"

namespace dyndisc {

enum class DataOrigin { Analytic, Integrated, Synthetic };

/// Equidistant samples x_0..x_N of one trajectory with step h = T/N.
struct TrajectoryData {
  double h = 0.0;
  int N = 0;
  std::vector<State> states;  // N+1 rows of dimension d
  DataOrigin origin = DataOrigin::Synthetic;

  [[nodiscard]] std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }
  [[nodiscard]] double T() const { return h * N; }
  [[nodiscard]] double time(int n) const { return n * h; }
  [[nodiscard]] double at(int n, std::size_t component) const { return states[n][component]; }
};

/// N' trajectories sharing h and N, e.g. the flow of a segment of initial points.
struct MultiTrajectoryData {
  std::vector<TrajectoryData> trajectories;

  [[nodiscard]] std::size_t size() const { return trajectories.size(); }
  [[nodiscard]] std::size_t dim() const {
    return trajectories.empty() ? 0 : trajectories.front().dim();
  }
};

/// Samples t ↦ x(t) at t_n = nT/N.
[[nodiscard]] TrajectoryData sample_path(const StatePath& path, double T, int N,
                                         DataOrigin origin = DataOrigin::Analytic);

}  // namespace dyndisc
