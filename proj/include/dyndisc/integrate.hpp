#pragma once

// Trajectory generation: an embedded 5(4) Runge-Kutta pair with continuous
// output for reference data, and fixed-step RK4 for re-integrating
// discovered (piecewise linear) fields.

#include <vector>

#include "dyndisc/trajectory.hpp"
#include "dyndisc/types.hpp"

namespace dyndisc {

struct AdaptiveOptions {
  double reltol = 1e-13;
  double abstol = 1e-13;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  long max_steps = 20'000'000;
};

/// Accepted steps of an adaptive run plus the quartic interpolant on each step.
class DenseTrajectory {
 public:
  DenseTrajectory() = default;

  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] const std::vector<State>& states() const { return states_; }
  [[nodiscard]] std::size_t dim() const { return states_.empty() ? 0 : states_.front().size(); }
  [[nodiscard]] double final_time() const { return times_.back(); }
  [[nodiscard]] std::size_t steps() const { return times_.empty() ? 0 : times_.size() - 1; }

  /// Continuous output at t ∈ [0, T].
  [[nodiscard]] State operator()(double t) const;

  void start(double t0, State x0);
  void append(double t1, State x1, std::vector<State> coeffs);

 private:
  std::vector<double> times_;
  std::vector<State> states_;
  // Per step: 5 interpolation vectors (dense output of the Dormand-Prince pair).
  std::vector<std::vector<State>> coeffs_;
};

/// Throws Error(StepUnderflow) when the controller needs a step below 1e-14·T.
[[nodiscard]] DenseTrajectory integrate_adaptive(const VectorField& f, const State& x0, double T,
                                                 const AdaptiveOptions& options = {});

/// States at t_n = nT/N from the continuous output.
[[nodiscard]] TrajectoryData sample_equidistant(const DenseTrajectory& traj, int N);

/// Classical RK4 with `steps` equal steps; every step is returned (N = steps).
/// Throws Error(NonFiniteState) if any component becomes non-finite.
[[nodiscard]] TrajectoryData integrate_fixed_rk4(const VectorField& f, const State& x0, double T, int steps);

/// RK4 run that stops at the first non-finite state instead of throwing.
struct Rk4Run {
  TrajectoryData data;  // the steps completed before termination
  bool terminated_early = false;
};

[[nodiscard]] Rk4Run integrate_fixed_rk4_partial(const VectorField& f, const State& x0, double T, int steps);

}  // namespace dyndisc
