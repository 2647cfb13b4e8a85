// dyndisc: command-line front end for the experiment runners.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dyndisc/error.hpp"
#include "dyndisc/experiments.hpp"

namespace ex = dyndisc::experiments;

namespace {

struct Subcommand {
  CLI::App* app = nullptr;
  ex::ExperimentKind kind{};
  std::map<std::string, std::string> values;  // setting key -> text given on the command line
  std::vector<std::string> params;
  std::vector<std::string> sets;
  std::string config_file;
  bool no_aux = false;
};

void add_setting(Subcommand& sub, const std::string& flag, const std::string& key, const std::string& help) {
  sub.app->add_option(flag, sub.values[key], help);
}

Subcommand& make(CLI::App& app, std::vector<Subcommand>& subs, const std::string& name, ex::ExperimentKind kind,
                 const std::string& help) {
  auto& sub = subs.emplace_back();
  sub.app = app.add_subcommand(name, help);
  sub.kind = kind;
  sub.app->add_option("--config", sub.config_file, "INI config file (key = value, optional [sections])")
      ->check(CLI::ExistingFile);
  sub.app->add_option("--set", sub.sets, "override any config key: key=value (repeatable)");
  add_setting(sub, "--out", "out_dir", "output directory (default $DYNDISC_OUT/<experiment>)");
  return sub;
}

void add_scheme_flags(Subcommand& sub) {
  add_setting(sub, "--family", "families", "scheme families: ab, am, bdf (comma list)");
  add_setting(sub, "--steps", "steps", "step counts, e.g. 2 or 1..4");
}

void add_model_flags(Subcommand& sub) {
  add_setting(sub, "--model", "model", "trig | lorenz | glycolytic | planar");
  sub.app->add_option("--param", sub.params, "model parameter override k=v (repeatable)");
  add_setting(sub, "--T", "T", "time horizon");
  add_setting(sub, "--x0", "x0", "initial state, comma separated");
}

void add_h_flags(Subcommand& sub) {
  add_setting(sub, "--h", "hs", "step sizes, e.g. 2^-6 or 0.1/2^3 (comma list)");
  add_setting(sub, "--h-pow2", "h_pow2", "step sizes 2^-k for the listed k, e.g. 3..9");
}

void add_solver_flags(Subcommand& sub) {
  add_setting(sub, "--solver", "solver", "fs | gmres");
  add_setting(sub, "--tol", "tols", "GMRES tolerance(s)");
  add_setting(sub, "--restart", "restart", "GMRES restart length");
  add_setting(sub, "--max-iter", "max_iter", "GMRES iteration limit (0: 10n)");
}

void add_train_flags(Subcommand& sub) {
  add_setting(sub, "--profile", "profile", "desk | paper");
  add_setting(sub, "--seed", "seeds", "seed(s), comma list");
  add_setting(sub, "--epochs", "epochs", "training epochs (default from profile)");
  add_setting(sub, "--width", "width", "hidden width (default from profile)");
  add_setting(sub, "--depth", "depth", "hidden layers (default from profile)");
  add_setting(sub, "--init", "init", "reciprocal | literal");
  add_setting(sub, "--record-every", "record_every", "history interval in epochs");
  sub.app->add_flag("--no-aux", sub.no_aux, "train without auxiliary conditions");
}

ex::ExperimentConfig build_config(const Subcommand& sub) {
  ex::ExperimentKind kind = sub.kind;
  if (kind == ex::ExperimentKind::GridConverge) {
    const auto it = sub.values.find("path");
    if (it != sub.values.end() && it->second == "net") kind = ex::ExperimentKind::NetConverge;
  }
  auto config = ex::default_config(kind);
  if (!sub.config_file.empty()) ex::apply_config_file(config, sub.config_file);
  config.kind = kind;
  for (const auto& [key, value] : sub.values) {
    if (value.empty()) continue;
    if (sub.kind == ex::ExperimentKind::GridConverge && key == "path") continue;
    ex::apply_setting(config, key, value);
  }
  for (const auto& p : sub.params) ex::apply_setting(config, "param", p);
  for (const auto& s : sub.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw dyndisc::Error(dyndisc::ErrorCode::ParseError, "--set needs key=value");
    ex::apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
  if (sub.no_aux) config.with_aux = false;
  return config;
}

void report(const ex::RunOutcome& outcome, bool echo_first) {
  if (echo_first && !outcome.files.empty()) {
    std::ifstream in(outcome.files.front());
    std::cout << in.rdbuf();
  }
  std::cerr << "output directory: " << outcome.out_dir.string() << '\n';
  for (const auto& f : outcome.files) std::cerr << "  " << f.filename().string() << '\n';
  std::cerr << "manifest: " << outcome.manifest.string() << '\n';
  if (outcome.failed_cells > 0) std::cerr << "failed cells: " << outcome.failed_cells << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyndisc: discovery of dynamics with linear multistep methods"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help and exit");
  std::vector<Subcommand> subs;
  subs.reserve(16);
  using K = ex::ExperimentKind;

  auto& coeffs = make(app, subs, "coeffs", K::Coeffs, "exact scheme coefficients and stencils");
  add_scheme_flags(coeffs);

  auto& stability = make(app, subs, "stability", K::Stability, "root condition and condition-number scan");
  add_scheme_flags(stability);
  add_setting(stability, "--scan", "Ns", "grid sizes N for the condition-number scan");

  auto& gen = make(app, subs, "gen-data", K::GenData, "write trajectory CSV data");
  add_model_flags(gen);
  add_h_flags(gen);
  add_setting(gen, "--N", "Ns", "number of steps");
  add_setting(gen, "--region", "region", "write the region dataset (planar model)");
  add_setting(gen, "--trajectories", "n_trajectories", "trajectories in the region dataset");

  auto& gd = make(app, subs, "grid-discover", K::GridDiscover, "grid-function discovery by a linear solve");
  add_model_flags(gd);
  add_scheme_flags(gd);
  add_h_flags(gd);
  add_solver_flags(gd);
  add_setting(gd, "--data", "data_file", "trajectory CSV instead of generated data");

  auto& disc = make(app, subs, "discover", K::Discover, "network discovery with history and saved networks");
  add_model_flags(disc);
  add_scheme_flags(disc);
  add_h_flags(disc);
  add_train_flags(disc);
  add_setting(disc, "--data", "data_file", "trajectory CSV instead of generated data");

  auto& conv = make(app, subs, "converge", K::GridConverge, "error versus h for the grid or network path");
  add_model_flags(conv);
  add_scheme_flags(conv);
  add_h_flags(conv);
  add_solver_flags(conv);
  add_train_flags(conv);
  add_setting(conv, "--path", "path", "grid | net");
  add_setting(conv, "--compare-aux", "compare_aux", "net path: run with and without auxiliary conditions");
  add_setting(conv, "--fit-window", "fit_window", "index range lo,hi of the cells used in the slope fit");

  auto& size = make(app, subs, "netsize", K::NetSizeSweep, "error versus network width and depth");
  add_model_flags(size);
  add_scheme_flags(size);
  add_h_flags(size);
  add_train_flags(size);
  add_setting(size, "--widths", "sweep_widths", "widths to sweep");
  add_setting(size, "--depths", "sweep_depths", "depths to sweep");

  auto& probe = make(app, subs, "opt-probe", K::OptErrorProbe, "optimization-error probe on the trig model");
  add_scheme_flags(probe);
  add_h_flags(probe);
  add_train_flags(probe);

  auto& predict = make(app, subs, "predict", K::Predict, "RK4 prediction with the discovered field");
  add_model_flags(predict);
  add_scheme_flags(predict);
  add_h_flags(predict);
  add_train_flags(predict);
  add_setting(predict, "--epsilon", "epsilon", "perturbation of the training initial value");
  add_setting(predict, "--delta", "deltas", "perturbation(s) of the prediction initial value");
  add_setting(predict, "--horizon", "predict_T", "prediction horizon (default T)");
  add_setting(predict, "--threshold", "div_threshold", "relative divergence threshold");
  add_setting(predict, "--sustain", "div_steps", "consecutive steps above the threshold");
  add_setting(predict, "--rk4-steps", "rk4_steps_per_unit", "RK4 steps per unit time");
  add_setting(predict, "--networks", "networks_file", "reuse saved networks instead of training");

  auto& region = make(app, subs, "region", K::Region, "discovery on a region of initial values");
  add_model_flags(region);
  add_scheme_flags(region);
  add_h_flags(region);
  add_solver_flags(region);
  add_train_flags(region);
  add_setting(region, "--path", "path", "grid | net | both");
  add_setting(region, "--trajectories", "n_trajectories", "trajectories N'");
  add_setting(region, "--lattice", "lattice", "lattice points per axis for the field dump");
  add_setting(region, "--mc-samples", "mc_samples", "Monte Carlo samples for the test error");

  auto& unstable = make(app, subs, "appendix-unstable", K::AppendixUnstable,
                        "forward substitution versus GMRES on an unstable scheme");
  add_model_flags(unstable);
  add_scheme_flags(unstable);
  add_h_flags(unstable);
  add_setting(unstable, "--tol", "tols", "GMRES tolerances (comma list)");
  add_setting(unstable, "--restart", "restart", "GMRES restart length");
  add_setting(unstable, "--max-iter", "max_iter", "GMRES iteration limit (0: 10n)");

  std::string manifest_path, rerun_out;
  auto* rerun = app.add_subcommand("rerun", "re-run an experiment from its manifest");
  rerun->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  rerun->add_option("--out", rerun_out, "output directory (default: the manifest's directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rerun->parsed()) {
      std::optional<std::filesystem::path> out;
      if (!rerun_out.empty()) out = rerun_out;
      report(ex::rerun_from_manifest(manifest_path, out), false);
      return 0;
    }
    for (const auto& sub : subs) {
      if (!sub.app->parsed()) continue;
      const auto config = build_config(sub);
      report(ex::run_experiment(config), sub.kind == K::Coeffs);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
