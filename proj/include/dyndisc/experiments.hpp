#pragma once

// Experiment runners behind the command-line tool. Every runner writes CSV
// files with '#' header comments plus a JSON manifest that is sufficient to
// re-run it and reproduce the CSV numbers bitwise.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dyndisc/discovery.hpp"
#include "dyndisc/lmm.hpp"
#include "dyndisc/metrics.hpp"
#include "dyndisc/models.hpp"

namespace dyndisc::experiments {

enum class ExperimentKind {
  Coeffs,
  Stability,
  GenData,
  GridDiscover,
  Discover,
  GridConverge,
  NetConverge,
  NetSizeSweep,
  OptErrorProbe,
  Predict,
  Region,
  AppendixUnstable,
};

[[nodiscard]] std::string kind_name(ExperimentKind kind);
[[nodiscard]] ExperimentKind parse_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Coeffs;
  std::string model = "trig";
  ParamMap model_params;
  std::vector<SchemeFamily> families{SchemeFamily::AdamsBashforth, SchemeFamily::AdamsMoulton, SchemeFamily::BDF};
  std::vector<int> steps{1, 2, 3, 4, 5, 6};
  std::vector<double> hs;
  std::optional<double> T;
  std::optional<State> x0;

  std::string profile = "desk";
  std::vector<std::uint64_t> seeds{1};
  int epochs = 0;  // 0: profile default
  int width = 0;
  int depth = 0;
  int record_every = 100;
  std::string init = "reciprocal";  // reciprocal | literal
  bool with_aux = true;
  bool compare_aux = false;         // net-converge: run with and without auxiliary conditions

  std::string solver = "fs";        // fs | gmres
  std::vector<double> tols{1e-4, 1e-8};
  int restart = 50;
  int max_iter = 0;                 // 0: 10·n

  std::string path = "grid";        // converge/region: grid | net | both
  bool region = false;              // gen-data: write the region dataset
  int n_trajectories = 10;
  int lattice = 41;

  std::vector<int> Ns{16, 32, 64, 128, 256, 512, 1024};
  std::vector<int> sweep_widths{16, 32, 64, 128, 256};
  std::vector<int> sweep_depths{1, 2, 3, 4};

  double epsilon = 0.0;                // training data start from x0 + epsilon in every component
  std::optional<double> predict_T;     // prediction horizon, default T
  std::vector<double> deltas{0.0};
  double div_threshold = 0.1;
  int div_steps = 50;
  int rk4_steps_per_unit = 10000;

  int mc_samples = 4096;
  std::uint64_t mc_seed = 12345;
  int quad_panels = 200;
  int quad_nodes = 5;
  std::optional<std::pair<int, int>> fit_window;

  std::string data_file;      // discover/grid-discover: user trajectory CSV
  std::string networks_file;  // predict: reuse trained networks
  std::filesystem::path out_dir;

  void validate() const;
  [[nodiscard]] std::vector<LmmScheme> schemes() const;
  [[nodiscard]] TrainConfig train_config(int input_dim, std::uint64_t seed) const;
};

/// Defaults of one subcommand: scheme grid, h grid and seeds.
[[nodiscard]] ExperimentConfig default_config(ExperimentKind kind);

/// Loads `key = value` settings with optional [sections] into `config`.
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& file);
/// Applies one `key=value` override (same keys as the config file).
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

[[nodiscard]] nlohmann::json config_to_json(const ExperimentConfig& config);
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& j);

/// Output directory: config.out_dir, else $DYNDISC_OUT/<kind>, else ./dyndisc_out/<kind>.
[[nodiscard]] std::filesystem::path resolve_out_dir(const ExperimentConfig& config);

struct RunOutcome {
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> files;  // CSV outputs
  std::filesystem::path manifest;
  int failed_cells = 0;
};

/// Number of grid points N = T/h; throws unless T/h is an integer to 1e-9.
[[nodiscard]] int steps_for(double T, double h);

// Structured results shared by the runners and the acceptance suite.

struct GridCell {
  std::string scheme_id;
  int steps = 0;
  double h = 0.0;
  int N = 0;
  double error = 0.0;
  int iterations = 0;
  bool converged = true;
  std::string solver = "fs";
  std::string status = "ok";
};

struct SchemeFit {
  std::string label;  // scheme id or solver setting
  OrderFit fit;
  bool ok = false;
};

struct ConvergenceResult {
  std::vector<GridCell> cells;
  std::vector<SchemeFit> fits;
};

/// Grid discovery for every (scheme, h): relative ℓ² grid error and fitted orders.
[[nodiscard]] ConvergenceResult grid_converge(const ExperimentConfig& config);

/// A-M 2 style solver comparison: one row set per solver setting ("fs",
/// "gmres(tol)"), error ‖f_h - f‖₂ / ‖f‖₂ over all components stacked.
[[nodiscard]] ConvergenceResult appendix_unstable(const ExperimentConfig& config);

/// Region grid path: per-trajectory linear solves, errors summed over trajectories.
[[nodiscard]] ConvergenceResult region_grid_converge(const ExperimentConfig& config);

struct NetCell {
  std::string scheme_id;
  double h = 0.0;
  int N = 0;
  bool with_aux = true;
  std::uint64_t seed = 0;
  int width = 0;
  int depth = 0;
  double grid_error = 0.0;
  double test_error = 0.0;
  double final_loss = 0.0;
  std::string status = "ok";
};

[[nodiscard]] std::vector<NetCell> net_converge(const ExperimentConfig& config);

struct OptProbeResult {
  double regression_error = 0.0;  // stage 1: grid error of the fitted nets against the trig field
  double self_grid_error = 0.0;   // stage 3 on the network-governed data
  double self_test_error = 0.0;
  double trig_grid_error = 0.0;   // same budget on the original trig data
  double trig_test_error = 0.0;
  std::string scheme_id;
  double h = 0.0;
};

[[nodiscard]] OptProbeResult opt_error_probe(const ExperimentConfig& config);

/// Runs any experiment, writing CSVs and the manifest.
RunOutcome run_experiment(const ExperimentConfig& config);

/// Re-runs the experiment recorded in `manifest`, optionally into another directory.
RunOutcome rerun_from_manifest(const std::filesystem::path& manifest,
                               const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// First time at which some component's error, normalized by that
/// component's largest magnitude on the reference, stays above `threshold`
/// for `sustain` consecutive samples; nullopt if it never does.
[[nodiscard]] std::optional<double> divergence_time(const TrajectoryData& reference, const TrajectoryData& predicted,
                                                    double threshold, int sustain);

}  // namespace dyndisc::experiments
