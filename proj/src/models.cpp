#include "dyndisc/models.hpp"

#include <cmath>
#include <exception>

#include "dyndisc/error.hpp"

namespace dyndisc {

void RegionSpec::validate() const {
  if (start.size() != end.size() || start.empty()) throw Error(ErrorCode::InvalidArgument, "segment endpoints");
  if (start == end) throw Error(ErrorCode::InvalidArgument, "segment endpoints must be distinct");
  if (n_trajectories < 1) throw Error(ErrorCode::InvalidArgument, "region needs at least one trajectory");
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "region horizon must be positive");
}

State RegionSpec::point(double u) const {
  State x(start.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = start[i] + u * (end[i] - start[i]);
  return x;
}

DynamicalModel trig_model() {
  DynamicalModel m;
  m.name = "trig";
  m.dim = 3;
  m.field = [](const State& x) -> State {
    if (x[1] == 0.0) throw Error(ErrorCode::DomainError, "trig field is singular at x_2 = 0");
    return {x[1], -x[0], 1.0 / (x[1] * x[1])};
  };
  m.analytic_state = [](double t) -> State { return {std::sin(t), std::cos(t), std::tan(t)}; };
  m.default_T = 1.0;
  m.default_x0 = {0.0, 1.0, 0.0};
  return m;
}

DynamicalModel lorenz_model() {
  DynamicalModel m;
  m.name = "lorenz";
  m.dim = 3;
  m.params = {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
  const double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
  m.field = [=](const State& x) -> State {
    return {sigma * (x[1] - x[0]), x[0] * (rho - x[2]) - x[1], x[0] * x[1] - beta * x[2]};
  };
  m.default_T = 25.0;
  m.default_x0 = {-8.0, 7.0, 27.0};
  return m;
}

DynamicalModel glycolytic_model(const ParamMap& overrides) {
  ParamMap p = {{"J0", 2.5}, {"k1", 100.0}, {"k2", 6.0},   {"k3", 16.0},    {"k4", 100.0},
                {"k5", 1.28}, {"k6", 12.0},  {"K1", 0.52}, {"q", 4.0},      {"N", 1.0},
                {"A", 4.0},   {"kappa", 13.0}, {"psi", 0.1}, {"k", 1.8}};
  for (const auto& [key, value] : overrides) {
    const auto it = p.find(key);
    if (it == p.end()) throw Error(ErrorCode::InvalidArgument, "unknown glycolytic parameter '" + key + "'");
    it->second = value;
  }
  DynamicalModel m;
  m.name = "glycolytic";
  m.dim = 7;
  m.params = p;
  const double J0 = p["J0"], k1 = p["k1"], k2 = p["k2"], k3 = p["k3"], k4 = p["k4"], k5 = p["k5"],
               k6 = p["k6"], K1 = p["K1"], q = p["q"], Ntot = p["N"], Atot = p["A"], kappa = p["kappa"],
               psi = p["psi"], k = p["k"];
  m.field = [=](const State& S) -> State {
    const double denom = 1.0 + std::pow(S[5] / K1, q);
    if (denom == 0.0) throw Error(ErrorCode::DomainError, "glycolytic inhibition term vanishes");
    const double v1 = k1 * S[0] * S[5] / denom;
    const double v2 = k2 * S[1] * (Ntot - S[4]);
    const double v3 = k3 * S[2] * (Atot - S[5]);
    const double v4 = k4 * S[3] * S[4];
    const double v6 = k6 * S[1] * S[4];
    const double flux = kappa * (S[3] - S[6]);
    return {J0 - v1,
            2.0 * v1 - v2 - v6,
            v2 - v3,
            v3 - v4 - flux,
            v2 - v4 - v6,
            -2.0 * v1 + 2.0 * v3 - k5 * S[5],
            psi * flux - k * S[6]};
  };
  m.default_T = 10.0;
  m.default_x0 = {1.125, 0.95, 0.075, 0.16, 0.265, 0.7, 0.092};
  return m;
}

DynamicalModel planar_model() {
  DynamicalModel m;
  m.name = "planar";
  m.dim = 2;
  m.field = [](const State& x) -> State { return {2.0 * x[0] * x[1], x[0] + x[1]}; };
  m.default_T = 1.0;
  m.default_x0 = {-0.5, 0.5};
  return m;
}

RegionSpec planar_region() { return RegionSpec{{-0.5, 0.5}, {-0.5, 1.0}, 10, 1.0}; }

DynamicalModel network_governed_model(std::vector<FnnParams> nets) {
  if (nets.empty()) throw Error(ErrorCode::InvalidArgument, "need one network per component");
  const int d = static_cast<int>(nets.size());
  for (const auto& net : nets) {
    if (net.arch.input_dim != d) throw Error(ErrorCode::InvalidArgument, "network input dimension must equal d");
  }
  DynamicalModel m;
  m.name = "network";
  m.dim = d;
  m.field = [nets = std::move(nets)](const State& x) -> State {
    State out(nets.size());
    for (std::size_t j = 0; j < nets.size(); ++j) out[j] = forward(nets[j], x);
    return out;
  };
  m.default_T = 1.0;
  m.default_x0 = {0.0, 1.0, 0.0};
  m.default_x0.resize(d, 0.0);
  return m;
}

std::vector<std::string> model_names() { return {"trig", "lorenz", "glycolytic", "planar"}; }

DynamicalModel model_by_name(const std::string& name, const ParamMap& overrides) {
  if (name == "glycolytic") return glycolytic_model(overrides);
  if (!overrides.empty()) throw Error(ErrorCode::InvalidArgument, "model '" + name + "' takes no parameters");
  if (name == "trig") return trig_model();
  if (name == "lorenz") return lorenz_model();
  if (name == "planar") return planar_model();
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + name + "'");
}

TrajectoryData generate_trajectory(const DynamicalModel& model, int N, std::optional<double> T,
                                   std::optional<State> x0, const AdaptiveOptions& options) {
  const double horizon = T.value_or(model.default_T);
  const State start = x0.value_or(model.default_x0);
  if (static_cast<int>(start.size()) != model.dim) throw Error(ErrorCode::InvalidArgument, "x0 dimension");
  if (model.analytic_state && start == model.default_x0) {
    return sample_path(*model.analytic_state, horizon, N, DataOrigin::Analytic);
  }
  return sample_equidistant(integrate_adaptive(model.field, start, horizon, options), N);
}

MultiTrajectoryData region_dataset(const DynamicalModel& model, const RegionSpec& spec, int N,
                                   const AdaptiveOptions& options) {
  spec.validate();
  if (static_cast<int>(spec.start.size()) != model.dim) throw Error(ErrorCode::InvalidArgument, "Γ dimension");
  const int count = spec.n_trajectories;
  MultiTrajectoryData out;
  out.trajectories.resize(count);
  std::vector<std::exception_ptr> failures(count);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      const State x0 = spec.point(count == 1 ? 0.0 : static_cast<double>(i) / (count - 1));
      out.trajectories[i] = sample_equidistant(integrate_adaptive(model.field, x0, spec.T, options), N);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

RegionSampler region_sampler(const DynamicalModel& model, const RegionSpec& spec, const AdaptiveOptions& options) {
  spec.validate();
  RegionSampler sampler;
  sampler.T = spec.T;
  sampler.state = [field = model.field, spec, options](double u, double t) -> State {
    const State x0 = spec.point(u);
    if (t <= 0.0) return x0;
    return integrate_adaptive(field, x0, t, options).states().back();
  };
  return sampler;
}

}  // namespace dyndisc
