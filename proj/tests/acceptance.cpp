// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion...]   (no argument runs all twelve)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dyndisc/discovery.hpp"
#include "dyndisc/error.hpp"
#include "dyndisc/experiments.hpp"
#include "dyndisc/fnn.hpp"
#include "dyndisc/lmm.hpp"
#include "dyndisc/metrics.hpp"
#include "dyndisc/models.hpp"
#include "dyndisc/stability.hpp"

using namespace dyndisc;
using namespace dyndisc::experiments;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

const SchemeFamily kFamilies[] = {SchemeFamily::AdamsBashforth, SchemeFamily::AdamsMoulton, SchemeFamily::BDF};

int table_order(SchemeFamily f, int M) { return f == SchemeFamily::AdamsMoulton ? M + 1 : M; }

Verdict coefficient_exactness() {
  Verdict v;
  int checked = 0;
  for (auto f : kFamilies) {
    for (int M = 1; M <= 6; ++M) {
      const auto s = build_scheme(f, M);
      const auto C = order_condition_residuals(s, s.order + 1);
      bool zero = true;
      for (int k = 0; k <= s.order; ++k) zero = zero && C[k] == 0;
      v.require(zero, s.id() + " has a nonzero residual up to p");
      v.require(C[s.order + 1] != 0, s.id() + " has C_{p+1} = 0");
      v.require(s.order == table_order(f, M), s.id() + " order " + std::to_string(s.order));
      ++checked;
    }
  }
  v.detail = std::to_string(checked) + " schemes" + (v.detail.empty() ? "" : ": " + v.detail);
  return v;
}

Verdict fdm_stencils() {
  Verdict v;
  for (int p = 1; p <= 7; ++p) {
    const auto st = fdm_stencil(p);
    for (int k = 0; k <= p; ++k) {
      Rational acc(0);
      for (int j = 0; j <= p; ++j) acc += st.gamma[j] * ipow(Rational(j), k);
      v.require(acc == (k == 1 ? 1 : 0), "p=" + std::to_string(p) + " fails t^" + std::to_string(k));
    }
  }
  return v;
}

Verdict truncation_order() {
  Verdict v;
  const auto m = trig_model();
  std::ostringstream slopes;
  for (auto f : kFamilies) {
    for (int M = 1; M <= 4; ++M) {
      const auto s = build_scheme(f, M);
      std::vector<std::pair<double, double>> pts;
      for (int k = 3; k <= 8; ++k) {
        const double h = std::ldexp(1.0, -k);
        const int N = 1 << k;
        double worst = 0.0;
        for (int n = M; n <= N; ++n) {
          for (double e : local_truncation_error(s, *m.analytic_state, m.field, h, n)) worst = std::max(worst, std::abs(e));
        }
        pts.emplace_back(h, worst);
      }
      const double slope = convergence_order(pts).slope;
      slopes << s.id() << '=' << fmt(slope, 3) << ' ';
      v.require(std::abs(slope - s.order) <= 0.1, s.id() + " slope " + fmt(slope) + " vs p=" + std::to_string(s.order));
    }
  }
  if (v.pass) v.detail = slopes.str();
  return v;
}

std::string fit_summary(const ConvergenceResult& r) {
  std::ostringstream out;
  for (const auto& f : r.fits) out << f.label << '=' << (f.ok ? fmt(f.fit.slope, 3) : "n/a") << ' ';
  return out.str();
}

Verdict grid_convergence() {
  Verdict v;
  auto c = default_config(ExperimentKind::GridConverge);
  c.families = {SchemeFamily::AdamsBashforth, SchemeFamily::BDF};
  c.steps = {1, 2, 3, 4};
  c.hs.clear();
  for (int k = 3; k <= 9; ++k) c.hs.push_back(std::ldexp(1.0, -k));
  const auto r = grid_converge(c);
  const auto schemes = c.schemes();
  for (std::size_t i = 0; i < r.fits.size(); ++i) {
    const auto& f = r.fits[i];
    v.require(f.ok && std::abs(f.fit.slope - schemes[i].steps) <= 0.2,
              f.label + " slope " + (f.ok ? fmt(f.fit.slope) : "n/a"));
  }
  v.detail = fit_summary(r) + (v.detail.empty() ? "" : "| outside +-0.2: " + v.detail);
  return v;
}

Verdict stability_classes() {
  Verdict v;
  for (int M = 1; M <= 6; ++M) {
    v.require(classify(build_scheme(SchemeFamily::AdamsBashforth, M)).classification == StabilityClass::Stable,
              "AB" + std::to_string(M));
    const auto b = classify(build_scheme(SchemeFamily::BDF, M));
    v.require(b.classification == StabilityClass::Stable && b.roots.empty(), "BDF" + std::to_string(M));
  }
  const auto am1 = classify(build_scheme(SchemeFamily::AdamsMoulton, 1));
  v.require(am1.classification == StabilityClass::Marginal && am1.roots.size() == 1 &&
                std::abs(am1.roots[0] + 1.0) <= 1e-10,
            "AM1");
  for (int M = 2; M <= 4; ++M) {
    v.require(classify(build_scheme(SchemeFamily::AdamsMoulton, M)).classification == StabilityClass::Unstable,
              "AM" + std::to_string(M));
  }
  const double am2 = classify(build_scheme(SchemeFamily::AdamsMoulton, 2)).max_modulus;
  v.require(std::abs(am2 - 1.71652) <= 1e-3, "AM2 modulus " + fmt(am2, 8));
  if (v.pass) v.detail = "AM2 max |root| = " + fmt(am2, 8);
  return v;
}

Verdict kappa_growth() {
  Verdict v;
  const std::vector<int> Ns{64, 128, 256, 512, 1024};
  double worst_spread = 0.0;
  for (auto f : {SchemeFamily::AdamsBashforth, SchemeFamily::BDF}) {
    for (int M = 1; M <= 6; ++M) {
      const auto s = build_scheme(f, M);
      const auto scan = boundedness_scan(s, Ns);
      double lo = INFINITY, hi = 0.0;
      for (const auto& c : scan) {
        lo = std::min(lo, c.kappa2);
        hi = std::max(hi, c.kappa2);
      }
      worst_spread = std::max(worst_spread, hi / lo - 1.0);
      v.require(hi / lo - 1.0 < 0.25, s.id() + " varies " + fmt(100 * (hi / lo - 1.0)) + "%");
    }
  }
  const auto am1 = boundedness_scan(build_scheme(SchemeFamily::AdamsMoulton, 1), Ns);
  double am1_dev = 0.0;
  for (const auto& c : am1) {
    const double linear = am1.front().kappa2 * c.N / am1.front().N;
    am1_dev = std::max(am1_dev, std::abs(c.kappa2 / linear - 1.0));
  }
  v.require(am1_dev <= 0.3, "AM1 deviates " + fmt(100 * am1_dev) + "% from linear");
  const auto am2 = boundedness_scan(build_scheme(SchemeFamily::AdamsMoulton, 2), {16, 32, 64});
  const double g1 = am2[1].kappa2 / am2[0].kappa2, g2 = am2[2].kappa2 / am2[1].kappa2;
  v.require(g1 >= 4.0 && g2 >= 4.0, "AM2 growth " + fmt(g1) + ", " + fmt(g2));
  if (v.pass) {
    v.detail = "stable spread " + fmt(100 * worst_spread, 3) + "%, AM1 max deviation from linear " +
               fmt(100 * am1_dev, 3) + "%, AM2 growth per doubling " + fmt(g1, 3) + ", " + fmt(g2, 3);
  }
  return v;
}

Verdict appendix_contrast() {
  Verdict v;
  auto c = default_config(ExperimentKind::AppendixUnstable);
  c.hs.clear();
  for (int k = 3; k <= 9; ++k) c.hs.push_back(std::ldexp(1.0, -k));
  c.tols = {1e-4, 1e-8};
  const auto r = appendix_unstable(c);
  std::vector<std::string> labels;  // fs, then one GMRES setting per tolerance
  for (const auto& cell : r.cells) {
    if (std::find(labels.begin(), labels.end(), cell.solver) == labels.end()) labels.push_back(cell.solver);
  }
  if (labels.size() != 3) {
    v.require(false, "expected three solver settings");
    return v;
  }
  auto series = [&](const std::string& label) {
    std::vector<std::pair<double, double>> out;
    for (const auto& cell : r.cells) {
      if (cell.solver == label) out.emplace_back(cell.h, cell.error);
    }
    return out;
  };
  auto at = [](const std::vector<std::pair<double, double>>& s, double h) {
    for (const auto& [hh, e] : s) {
      if (hh == h) return e;
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  const auto fs_errors = series(labels[0]);
  const double ratio = at(fs_errors, std::ldexp(1.0, -9)) / at(fs_errors, std::ldexp(1.0, -5));
  v.require(ratio >= 10.0, "fs growth " + fmt(ratio));

  const auto g4 = series(labels[1]);
  bool decreasing = true;
  for (std::size_t i = 1; i < g4.size(); ++i) decreasing = decreasing && g4[i].second < g4[i - 1].second;
  double slope = std::numeric_limits<double>::quiet_NaN();
  try {
    slope = convergence_order(g4).slope;
  } catch (const Error&) {
  }
  v.require(decreasing, "gmres(1e-4) errors not decreasing");
  v.require(std::abs(slope - 3.0) <= 0.5, "gmres(1e-4) slope " + fmt(slope));

  const auto g8 = series(labels[2]);
  bool monotone = true;
  for (std::size_t i = 1; i < g8.size(); ++i) monotone = monotone && g8[i].second < g8[i - 1].second;
  v.require(!monotone, "gmres(1e-8) decreased monotonically");

  std::ostringstream d;
  d << "fs e(2^-9)/e(2^-5)=" << fmt(ratio, 3) << ", gmres(1e-4) errors";
  for (const auto& [h, e] : g4) d << ' ' << fmt(e, 3);
  d << " slope " << fmt(slope, 3) << ", gmres(1e-8) monotone=" << (monotone ? "yes" : "no");
  v.detail = d.str() + (v.detail.empty() ? "" : " | " + v.detail);
  return v;
}

double min_preactivation(const FnnParams& p, const std::vector<State>& points) {
  double m = INFINITY;
  for (const auto& x : points) {
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    for (int l = 0; l < p.arch.depth(); ++l) {
      const Eigen::VectorXd a = p.weight(l) * z + p.bias(l);
      m = std::min(m, a.cwiseAbs().minCoeff());
      z = a.cwiseMax(0.0);
    }
  }
  return m;
}

double loss_value(const FnnParams& p, const ResidualLoss& loss) {
  std::vector<double> out;
  for (const auto& x : loss.points) out.push_back(forward(p, x));
  return loss.value(out);
}

Verdict gradient_correctness() {
  Verdict v;
  const auto data = generate_trajectory(trig_model(), 32);
  const auto scheme = build_scheme(SchemeFamily::AdamsBashforth, 3);
  MultiTrajectoryData multi;
  multi.trajectories = {data, generate_trajectory(trig_model(), 32, 1.0, State{0.05, 1.1, 0.0})};
  const std::vector<std::pair<std::string, ResidualLoss>> losses{
      {"plain", build_loss(data, 0, LossSpec::make(scheme, false))},
      {"augmented", build_loss(data, 1, LossSpec::make(scheme, true))},
      {"multi", build_loss(multi, 2, LossSpec::make(scheme, true))}};
  double worst = 0.0;
  for (const auto& [name, loss] : losses) {
    std::uint64_t seed = 17;
    FnnParams p = init_params(FnnArchitecture::uniform(3, 2, 8), seed);
    while (min_preactivation(p, loss.points) < 1e-4) p = init_params(FnnArchitecture::uniform(3, 2, 8), ++seed);
    const auto g = loss_gradient(p, loss);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N01;
    int used = 0;
    for (int attempt = 0; attempt < 200 && used < 10; ++attempt) {
      std::vector<double> dir(p.values.size());
      double norm = 0.0;
      for (auto& d : dir) {
        d = N01(rng);
        norm += d * d;
      }
      const double eps = 1e-6 / std::sqrt(norm);
      FnnParams plus = p, minus = p;
      for (std::size_t i = 0; i < dir.size(); ++i) {
        plus.values[i] += eps * dir[i];
        minus.values[i] -= eps * dir[i];
      }
      if (min_preactivation(plus, loss.points) < 1e-5 || min_preactivation(minus, loss.points) < 1e-5) continue;
      const double fd = (loss_value(plus, loss) - loss_value(minus, loss)) / (2 * eps);
      double an = 0.0;
      for (std::size_t i = 0; i < dir.size(); ++i) an += g.grad[i] * dir[i];
      const double rel = std::abs(an - fd) / std::max(std::abs(fd), 1e-300);
      worst = std::max(worst, rel);
      v.require(rel <= 1e-4, name + " relative mismatch " + fmt(rel));
      ++used;
    }
    v.require(used == 10, name + ": only " + std::to_string(used) + " kink-free directions");
  }
  if (v.pass) v.detail = "worst relative mismatch " + fmt(worst, 3);
  return v;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Verdict desk_discovery() {
  Verdict v;
  auto c = default_config(ExperimentKind::NetConverge);
  c.families = {SchemeFamily::BDF};
  c.steps = {2};
  c.hs = {std::ldexp(1.0, -4), std::ldexp(1.0, -6)};
  c.seeds = {1, 2, 3};
  c.profile = "desk";
  c.with_aux = true;
  const auto cells = net_converge(c);
  std::vector<double> coarse, fine;
  for (const auto& cell : cells) {
    v.require(cell.status == "ok", "cell status " + cell.status);
    (cell.h == c.hs[0] ? coarse : fine).push_back(cell.grid_error);
  }
  const double mc = median(coarse), mf = median(fine);
  v.require(mf <= 1e-2, "median at 2^-6 is " + fmt(mf));
  v.require(mf < mc, "no decrease from 2^-4 to 2^-6");
  v.detail = "median grid error " + fmt(mc, 3) + " at 2^-4, " + fmt(mf, 3) + " at 2^-6" +
             (v.detail.empty() ? "" : " | " + v.detail);
  return v;
}

Verdict optimization_probe() {
  Verdict v;
  auto c = default_config(ExperimentKind::OptErrorProbe);
  const auto r = opt_error_probe(c);
  v.require(r.self_grid_error < r.trig_grid_error, "self-discovery is not below the trig baseline");
  v.detail = "regression " + fmt(r.regression_error, 3) + ", self " + fmt(r.self_grid_error, 4) + " vs trig " +
             fmt(r.trig_grid_error, 4) + " (" + r.scheme_id + ", h=2^-6)" + (v.detail.empty() ? "" : " | " + v.detail);
  return v;
}

Verdict region_discovery() {
  Verdict v;
  auto c = default_config(ExperimentKind::Region);
  c.families = {SchemeFamily::AdamsBashforth, SchemeFamily::BDF};
  c.steps = {1, 2, 3, 4};
  c.n_trajectories = 10;
  c.hs.clear();
  for (int k = 0; k <= 4; ++k) c.hs.push_back(0.1 / std::ldexp(1.0, k));
  const auto r = region_grid_converge(c);
  const auto schemes = c.schemes();
  for (std::size_t i = 0; i < r.fits.size(); ++i) {
    const auto& f = r.fits[i];
    v.require(f.ok && std::abs(f.fit.slope - schemes[i].steps) <= 0.3,
              f.label + " slope " + (f.ok ? fmt(f.fit.slope) : "n/a"));
  }
  v.detail = fit_summary(r) + (v.detail.empty() ? "" : "| outside +-0.3: " + v.detail);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "dyndisc_acceptance_determinism";
  fs::remove_all(root);
  std::vector<ExperimentConfig> configs;
  configs.push_back(default_config(ExperimentKind::Coeffs));
  configs.push_back(default_config(ExperimentKind::Stability));
  configs.push_back(default_config(ExperimentKind::GridConverge));
  configs.push_back(default_config(ExperimentKind::AppendixUnstable));
  configs.push_back(default_config(ExperimentKind::Region));
  {
    auto c = default_config(ExperimentKind::Region);
    c.path = "net";
    c.hs = {0.05};
    c.families = {SchemeFamily::BDF};
    c.steps = {2};
    c.epochs = 300;
    c.width = 16;
    c.depth = 2;
    c.mc_samples = 256;
    c.lattice = 11;
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentKind::Discover);
    c.epochs = 500;
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentKind::NetConverge);
    c.epochs = 300;
    c.compare_aux = true;
    c.seeds = {1, 2};
    configs.push_back(c);
  }
  {
    auto c = default_config(ExperimentKind::Predict);
    c.epochs = 300;
    c.deltas = {0.0, 0.01};
    c.rk4_steps_per_unit = 2000;
    configs.push_back(c);
  }
  configs.push_back(default_config(ExperimentKind::GenData));
  int files = 0;
  double first_time = 0.0, second_time = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto& c = configs[i];
    c.out_dir = root / (kind_name(c.kind) + "_" + std::to_string(i)) / "first";
    const auto t0 = std::chrono::steady_clock::now();
    const auto a = run_experiment(c);
    const auto t1 = std::chrono::steady_clock::now();
    const auto b = rerun_from_manifest(a.manifest, c.out_dir.parent_path() / "second");
    const auto t2 = std::chrono::steady_clock::now();
    first_time += std::chrono::duration<double>(t1 - t0).count();
    second_time += std::chrono::duration<double>(t2 - t1).count();
    v.require(a.files.size() == b.files.size(), kind_name(c.kind) + " file count differs");
    for (std::size_t k = 0; k < std::min(a.files.size(), b.files.size()); ++k) {
      v.require(slurp(a.files[k]) == slurp(b.files[k]), a.files[k].filename().string() + " differs");
      ++files;
    }
  }
  v.detail = std::to_string(configs.size()) + " runs, " + std::to_string(files) + " CSV files identical; run " +
             fmt(first_time, 3) + " s, re-run " + fmt(second_time, 3) + " s" + (v.detail.empty() ? "" : " | " + v.detail);
  return v;
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "coefficient exactness", 1.0, coefficient_exactness},
      {2, "finite-difference stencils", 1.0, fdm_stencils},
      {3, "truncation order", 10.0, truncation_order},
      {4, "grid-discovery convergence", 30.0, grid_convergence},
      {5, "stability classification", 1.0, stability_classes},
      {6, "condition-number growth", 60.0, kappa_growth},
      {7, "forward substitution versus GMRES", 60.0, appendix_contrast},
      {8, "gradient correctness", 10.0, gradient_correctness},
      {9, "desk-scale network discovery", 600.0, desk_discovery},
      {10, "optimization-error probe", 600.0, optimization_probe},
      {11, "region discovery", 60.0, region_discovery},
      {12, "determinism", 1e9, determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) v.require(false, "runtime " + fmt(secs, 3) + " s over budget " + fmt(c.budget_seconds) + " s");
    if (!v.pass) ++failures;
    std::printf("AC%02d %s  %s (%.2f s): %s\n", c.id, v.pass ? "PASS" : "FAIL", c.title, secs, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
