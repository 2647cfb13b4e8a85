#include "dyndisc/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dyndisc/error.hpp"

namespace dyndisc {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

State combine(const State& x, double h, std::initializer_list<std::pair<double, const State*>> terms) {
  State out = x;
  for (const auto& [w, k] : terms) {
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += h * w * (*k)[i];
  }
  return out;
}

bool all_finite(const State& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double scaled_norm(const State& v, const State& ref, const AdaptiveOptions& opt) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double sc = opt.abstol + opt.reltol * std::abs(ref[i]);
    acc = std::max(acc, std::abs(v[i]) / sc);
  }
  return acc;
}

// Initial step heuristic (Hairer, Nørsett & Wanner, II.4).
double initial_step(const VectorField& f, const State& x0, const State& f0, double T,
                    const AdaptiveOptions& opt) {
  const double d0 = scaled_norm(x0, x0, opt);
  const double d1 = scaled_norm(f0, x0, opt);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, T);
  const State x1 = combine(x0, h0, {{1.0, &f0}});
  const State f1 = f(x1);
  State df(f0.size());
  for (std::size_t i = 0; i < df.size(); ++i) df[i] = f1[i] - f0[i];
  const double d2 = scaled_norm(df, x0, opt) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                              : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  return std::min({100.0 * h0, h1, T});
}

}  // namespace

void DenseTrajectory::start(double t0, State x0) {
  times_ = {t0};
  states_ = {std::move(x0)};
  coeffs_.clear();
}

void DenseTrajectory::append(double t1, State x1, std::vector<State> coeffs) {
  times_.push_back(t1);
  states_.push_back(std::move(x1));
  coeffs_.push_back(std::move(coeffs));
}

State DenseTrajectory::operator()(double t) const {
  if (times_.empty()) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  if (t <= times_.front()) return states_.front();
  if (t >= times_.back()) return states_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double h = times_[k + 1] - times_[k];
  const double theta = (t - times_[k]) / h;
  const double theta1 = 1.0 - theta;
  const auto& r = coeffs_[k];
  State out(r[0].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
  }
  return out;
}

DenseTrajectory integrate_adaptive(const VectorField& f, const State& x0, double T, const AdaptiveOptions& opt) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "integration horizon must be positive");
  if (!(opt.reltol > 0.0 && opt.reltol <= 1e-2 && opt.abstol > 0.0 && opt.abstol <= 1e-2)) {
    throw Error(ErrorCode::InvalidArgument, "tolerances must lie in (0, 1e-2]");
  }
  DenseTrajectory traj;
  traj.start(0.0, x0);

  State x = x0;
  State k1 = f(x);
  double t = 0.0;
  double h = initial_step(f, x, k1, T, opt);
  const double h_min = 1e-14 * T;
  bool last_rejected = false;

  for (long step = 0; step < opt.max_steps; ++step) {
    if (t >= T) return traj;
    bool final_step = false;
    if (t + 1.01 * h >= T) {
      h = T - t;
      final_step = true;
    }
    if (h < h_min) {
      throw Error(ErrorCode::StepUnderflow, "step size " + std::to_string(h) + " at t=" + std::to_string(t));
    }

    const State k2 = f(combine(x, h, {{a21, &k1}}));
    const State k3 = f(combine(x, h, {{a31, &k1}, {a32, &k2}}));
    const State k4 = f(combine(x, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const State k5 = f(combine(x, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const State k6 = f(combine(x, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    State x1 = combine(x, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
    const State k7 = f(x1);

    State err(x.size());
    double err_norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = opt.abstol + opt.reltol * std::max(std::abs(x[i]), std::abs(x1[i]));
      err_norm = std::max(err_norm, std::abs(err[i]) / sc);
    }
    if (!std::isfinite(err_norm) || !all_finite(x1)) err_norm = 1e10;

    const double raw = err_norm == 0.0 ? opt.max_factor : opt.safety * std::pow(err_norm, -0.2);
    double factor = std::clamp(raw, opt.min_factor, opt.max_factor);

    if (err_norm <= 1.0) {
      std::vector<State> rc(5, State(x.size()));
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double dy = x1[i] - x[i];
        const double bspl = h * k1[i] - dy;
        rc[0][i] = x[i];
        rc[1][i] = dy;
        rc[2][i] = bspl;
        rc[3][i] = dy - h * k7[i] - bspl;
        rc[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      t = final_step ? T : t + h;
      traj.append(t, x1, std::move(rc));
      x = std::move(x1);
      k1 = k7;
      if (last_rejected) factor = std::min(factor, 1.0);
      last_rejected = false;
      if (final_step) return traj;
    } else {
      factor = std::min(factor, 1.0);
      last_rejected = true;
    }
    h *= factor;
  }
  throw Error(ErrorCode::StepUnderflow, "maximum number of steps exceeded");
}

TrajectoryData sample_equidistant(const DenseTrajectory& traj, int N) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  const double T = traj.final_time();
  TrajectoryData out;
  out.N = N;
  out.h = T / N;
  out.origin = DataOrigin::Integrated;
  out.states.reserve(N + 1);
  for (int n = 0; n <= N; ++n) out.states.push_back(n == N ? traj.states().back() : traj(n * T / N));
  return out;
}

Rk4Run integrate_fixed_rk4_partial(const VectorField& f, const State& x0, double T, int steps) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be positive");
  Rk4Run run;
  auto& out = run.data;
  out.N = steps;
  out.h = T / steps;
  out.origin = DataOrigin::Integrated;
  out.states.reserve(steps + 1);
  out.states.push_back(x0);
  const double h = out.h;
  State x = x0;
  for (int n = 0; n < steps; ++n) {
    const State k1 = f(x);
    const State k2 = f(combine(x, h, {{0.5, &k1}}));
    const State k3 = f(combine(x, h, {{0.5, &k2}}));
    const State k4 = f(combine(x, h, {{1.0, &k3}}));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!all_finite(x)) {
      run.terminated_early = true;
      out.N = n;
      return run;
    }
    out.states.push_back(x);
  }
  return run;
}

TrajectoryData integrate_fixed_rk4(const VectorField& f, const State& x0, double T, int steps) {
  auto run = integrate_fixed_rk4_partial(f, x0, T, steps);
  if (run.terminated_early) {
    throw Error(ErrorCode::NonFiniteState, "non-finite state at step " + std::to_string(run.data.N + 1));
  }
  return std::move(run.data);
}

TrajectoryData sample_path(const StatePath& path, double T, int N, DataOrigin origin) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  TrajectoryData out;
  out.N = N;
  out.h = T / N;
  out.origin = origin;
  out.states.reserve(N + 1);
  for (int n = 0; n <= N; ++n) out.states.push_back(path(n == N ? T : static_cast<double>(n) * T / N));
  return out;
}

}  // namespace dyndisc
