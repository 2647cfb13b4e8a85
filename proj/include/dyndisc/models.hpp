#pragma once

// Benchmark systems with ground-truth fields, the network-governed system and
// the flow of a segment of initial points.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyndisc/fnn.hpp"
#include "dyndisc/integrate.hpp"
#include "dyndisc/trajectory.hpp"
#include "dyndisc/types.hpp"

namespace dyndisc {

using ParamMap = std::map<std::string, double>;

struct DynamicalModel {
  std::string name;
  int dim = 0;
  VectorField field;
  std::optional<StatePath> analytic_state;
  double default_T = 1.0;
  State default_x0;
  ParamMap params;
};

/// Segment Γ of initial points and the horizon of their trajectories.
struct RegionSpec {
  State start;
  State end;
  int n_trajectories = 10;  // N'
  double T = 1.0;

  void validate() const;
  /// Γ(u) = start + u (end - start), u ∈ [0, 1].
  [[nodiscard]] State point(double u) const;
};

/// x' = (x_2, -x_1, 1/x_2²), x(t) = (sin t, cos t, tan t).
[[nodiscard]] DynamicalModel trig_model();
[[nodiscard]] DynamicalModel lorenz_model();
/// Seven-species yeast glycolysis oscillator; unknown keys in `overrides` are rejected.
[[nodiscard]] DynamicalModel glycolytic_model(const ParamMap& overrides = {});
/// x' = (2 x_1 x_2, x_1 + x_2).
[[nodiscard]] DynamicalModel planar_model();
[[nodiscard]] RegionSpec planar_region();

/// Field given componentwise by d scalar networks with input dimension d.
[[nodiscard]] DynamicalModel network_governed_model(std::vector<FnnParams> nets);

/// trig | lorenz | glycolytic | planar. Overrides apply to glycolytic only.
[[nodiscard]] DynamicalModel model_by_name(const std::string& name, const ParamMap& overrides = {});
[[nodiscard]] std::vector<std::string> model_names();

/// Samples one trajectory: analytic when the model has a closed-form state
/// and `x0` is the default, otherwise by the adaptive integrator.
[[nodiscard]] TrajectoryData generate_trajectory(const DynamicalModel& model, int N,
                                                 std::optional<double> T = std::nullopt,
                                                 std::optional<State> x0 = std::nullopt,
                                                 const AdaptiveOptions& options = {});

/// N' initial points equidistant on Γ (endpoints included; Γ(0) alone when N' = 1), each integrated
/// and sampled at N+1 equidistant times.
[[nodiscard]] MultiTrajectoryData region_dataset(const DynamicalModel& model, const RegionSpec& spec, int N,
                                                 const AdaptiveOptions& options = {});

/// State at chart coordinates (u, t): the flow from Γ(u) evaluated at time t.
struct RegionSampler {
  std::function<State(double u, double t)> state;
  double T = 1.0;
};

[[nodiscard]] RegionSampler region_sampler(const DynamicalModel& model, const RegionSpec& spec,
                                           const AdaptiveOptions& options = {1e-10, 1e-10});

}  // namespace dyndisc
