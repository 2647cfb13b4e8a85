#pragma once

// Network discovery: the plain, augmented and multi-trajectory losses and the
// Adam training driver.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dyndisc/fnn.hpp"
#include "dyndisc/lmm.hpp"
#include "dyndisc/trajectory.hpp"
#include "dyndisc/types.hpp"

namespace dyndisc {

struct LossSpec {
  LmmScheme scheme;
  bool with_aux = true;
  std::optional<FdmStencil> stencil;  // present iff with_aux and N_a > 0

  /// Fills the stencil of order p when the scheme needs auxiliary conditions.
  [[nodiscard]] static LossSpec make(const LmmScheme& scheme, bool with_aux);
};

/// Linear residual rows of the loss of one component over one trajectory.
/// Plain: rows n = M..N weighted 1/(N-M+1). Augmented: the N_a stencil rows
/// first, then the LMM rows, all weighted 1/t(N).
[[nodiscard]] ResidualLoss build_loss(const TrajectoryData& data, std::size_t component, const LossSpec& spec);
/// Mean of the per-trajectory losses. Throws Error(MismatchedGrids).
[[nodiscard]] ResidualLoss build_loss(const MultiTrajectoryData& data, std::size_t component, const LossSpec& spec);

/// Loss value of a pointwise evaluator.
[[nodiscard]] double evaluate_loss(const ResidualLoss& loss, const ScalarEvaluator& u);

[[nodiscard]] double loss_plain(const ScalarEvaluator& u, const TrajectoryData& data, std::size_t component,
                                const LmmScheme& scheme);
[[nodiscard]] double loss_augmented(const ScalarEvaluator& u, const TrajectoryData& data, std::size_t component,
                                    const LossSpec& spec);
[[nodiscard]] double loss_multi(const ScalarEvaluator& u, const MultiTrajectoryData& data, std::size_t component,
                                const LossSpec& spec);

/// Plain least squares Σ_p (u(x_p) - y_p)² / P.
[[nodiscard]] ResidualLoss regression_loss(const std::vector<State>& points, const std::vector<double>& targets);

struct TrainConfig {
  FnnArchitecture architecture;
  int epochs = 5000;  // N_I
  LrSchedule schedule{5000, -2.0, -4.0};
  std::uint64_t seed = 1;
  int record_every = 100;
  InitRange init = InitRange::Reciprocal;

  void validate() const;
};

/// Named presets: "desk" (W=64, L=3, N_I=5000) and "paper" (W=640, L=5, N_I=30000).
[[nodiscard]] TrainConfig train_profile(const std::string& name, int input_dim, std::uint64_t seed = 1);

struct HistoryEntry {
  int epoch = 0;
  double loss = 0.0;  // sum over components
  double grid_error = 0.0;
  double test_error = 0.0;
};

/// Optional per-record evaluation of the current networks.
struct TrainingMonitor {
  std::function<double(const std::vector<FnnParams>&)> grid_error;
  std::function<double(const std::vector<FnnParams>&)> test_error;
};

struct DiscoveryResult {
  std::vector<FnnParams> nets;
  std::vector<double> final_loss;  // per component
  std::vector<HistoryEntry> history;
  TrainConfig config;
  bool aborted = false;
  std::string abort_reason;

  [[nodiscard]] VectorField field() const;
};

/// Trains one network per loss, component j seeded with seed + j. Every
/// component runs its own Adam loop; the loops are interleaved epoch by epoch,
/// which gives the same parameters as running them one after another.
[[nodiscard]] DiscoveryResult train_losses(const std::vector<ResidualLoss>& losses, const TrainConfig& config,
                                           const TrainingMonitor& monitor = {});

[[nodiscard]] DiscoveryResult train_discovery(const TrajectoryData& data, const LossSpec& spec,
                                              const TrainConfig& config, const TrainingMonitor& monitor = {});
[[nodiscard]] DiscoveryResult train_discovery(const MultiTrajectoryData& data, const LossSpec& spec,
                                              const TrainConfig& config, const TrainingMonitor& monitor = {});

}  // namespace dyndisc
