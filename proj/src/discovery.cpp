#include "dyndisc/discovery.hpp"

#include <cmath>

#include "dyndisc/assembly.hpp"
#include "dyndisc/error.hpp"

namespace dyndisc {

LossSpec LossSpec::make(const LmmScheme& scheme, bool with_aux) {
  LossSpec spec{scheme, with_aux, std::nullopt};
  // N_a does not depend on N; any admissible N will do.
  if (with_aux && scheme_indices(scheme, 4 * scheme.steps + 8).aux_count > 0) spec.stencil = fdm_stencil(scheme.order);
  return spec;
}

ResidualLoss build_loss(const TrajectoryData& data, std::size_t component, const LossSpec& spec) {
  const auto& scheme = spec.scheme;
  const int N = data.N;
  const int M = scheme.steps;
  const auto idx = scheme_indices(scheme, N);
  const auto q = assemble_lmm_rhs(scheme, data, component);
  const auto beta = scheme.beta_values();

  ResidualLoss loss;
  loss.points = data.states;
  const bool aux = spec.with_aux && idx.aux_count > 0;
  const double w = spec.with_aux ? 1.0 / idx.count : 1.0 / (N - M + 1);

  if (aux) {
    const auto c = assemble_aux_rhs(scheme, data, component);
    for (int a = 0; a < idx.aux_count; ++a) {
      const std::pair<int, double> term{idx.first + a, 1.0};
      loss.add_row({&term, 1}, c[a], w);
    }
  }
  std::vector<std::pair<int, double>> terms;
  for (int n = M; n <= N; ++n) {
    terms.clear();
    for (int m = 0; m <= M; ++m) {
      if (beta[m] != 0.0) terms.emplace_back(n - m, beta[m]);
    }
    loss.add_row(terms, q[n - M], w);
  }
  return loss;
}

ResidualLoss build_loss(const MultiTrajectoryData& data, std::size_t component, const LossSpec& spec) {
  if (data.size() == 0) throw Error(ErrorCode::InvalidArgument, "no trajectories");
  const auto& first = data.trajectories.front();
  for (const auto& traj : data.trajectories) {
    if (traj.N != first.N || traj.h != first.h) {
      throw Error(ErrorCode::MismatchedGrids, "trajectories must share h and N");
    }
  }
  ResidualLoss loss;
  const double scale = 1.0 / static_cast<double>(data.size());
  for (const auto& traj : data.trajectories) loss.append(build_loss(traj, component, spec), scale);
  return loss;
}

double evaluate_loss(const ResidualLoss& loss, const ScalarEvaluator& u) {
  std::vector<double> outputs(loss.points.size(), 0.0);
  std::vector<bool> used(loss.points.size(), false);
  for (int p : loss.term_point) used[p] = true;
  for (std::size_t p = 0; p < outputs.size(); ++p) {
    if (used[p]) outputs[p] = u(loss.points[p]);
  }
  return loss.value(outputs);
}

double loss_plain(const ScalarEvaluator& u, const TrajectoryData& data, std::size_t component,
                  const LmmScheme& scheme) {
  return evaluate_loss(build_loss(data, component, LossSpec{scheme, false, std::nullopt}), u);
}

double loss_augmented(const ScalarEvaluator& u, const TrajectoryData& data, std::size_t component,
                      const LossSpec& spec) {
  LossSpec aug = spec;
  aug.with_aux = true;
  return evaluate_loss(build_loss(data, component, aug), u);
}

double loss_multi(const ScalarEvaluator& u, const MultiTrajectoryData& data, std::size_t component,
                  const LossSpec& spec) {
  return evaluate_loss(build_loss(data, component, spec), u);
}

ResidualLoss regression_loss(const std::vector<State>& points, const std::vector<double>& targets) {
  if (points.size() != targets.size() || points.empty()) {
    throw Error(ErrorCode::InvalidArgument, "regression needs one target per point");
  }
  ResidualLoss loss;
  loss.points = points;
  const double w = 1.0 / static_cast<double>(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    const std::pair<int, double> term{static_cast<int>(p), 1.0};
    loss.add_row({&term, 1}, targets[p], w);
  }
  return loss;
}

void TrainConfig::validate() const {
  architecture.validate();
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be positive");
  if (record_every < 1) throw Error(ErrorCode::InvalidArgument, "record_every must be positive");
}

TrainConfig train_profile(const std::string& name, int input_dim, std::uint64_t seed) {
  TrainConfig config;
  if (name == "desk") {
    config.architecture = FnnArchitecture::uniform(input_dim, 3, 64);
    config.epochs = 5000;
  } else if (name == "paper") {
    config.architecture = FnnArchitecture::uniform(input_dim, 5, 640);
    config.epochs = 30000;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown profile '" + name + "' (desk|paper)");
  }
  config.schedule = LrSchedule{config.epochs, -2.0, -4.0};
  config.seed = seed;
  return config;
}

VectorField DiscoveryResult::field() const {
  return [nets = nets](const State& x) {
    State out(nets.size());
    for (std::size_t j = 0; j < nets.size(); ++j) out[j] = forward(nets[j], x);
    return out;
  };
}

DiscoveryResult train_losses(const std::vector<ResidualLoss>& losses, const TrainConfig& config,
                             const TrainingMonitor& monitor) {
  config.validate();
  const std::size_t d = losses.size();
  DiscoveryResult result;
  result.config = config;
  std::vector<AdamState> states;
  for (std::size_t j = 0; j < d; ++j) {
    result.nets.push_back(init_params(config.architecture, config.seed + j, config.init));
    states.emplace_back(result.nets.back().values.size());
  }
  result.final_loss.assign(d, 0.0);

  auto record = [&](int epoch, double loss) {
    HistoryEntry entry{epoch, loss, std::nan(""), std::nan("")};
    if (monitor.grid_error) entry.grid_error = monitor.grid_error(result.nets);
    if (monitor.test_error) entry.test_error = monitor.test_error(result.nets);
    result.history.push_back(entry);
  };

  try {
    for (int n = 0; n < config.epochs; ++n) {
      const double rate = lr_at(config.schedule, n);
      double total = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const auto lg = loss_gradient(result.nets[j], losses[j]);
        total += lg.value;
        adam_step(result.nets[j], states[j], lg.grad, rate);
      }
      // The recorded loss belongs to the parameters before this epoch's step.
      if (n % config.record_every == 0) {
        if (!std::isfinite(total)) throw Error(ErrorCode::NonFiniteGradient, "non-finite loss");
        record(n, total);
      }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      result.final_loss[j] = loss_gradient(result.nets[j], losses[j]).value;
      total += result.final_loss[j];
    }
    record(config.epochs, total);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteGradient) throw;
    result.aborted = true;
    result.abort_reason = e.what();
  }
  return result;
}

DiscoveryResult train_discovery(const TrajectoryData& data, const LossSpec& spec, const TrainConfig& config,
                                const TrainingMonitor& monitor) {
  std::vector<ResidualLoss> losses;
  for (std::size_t j = 0; j < data.dim(); ++j) losses.push_back(build_loss(data, j, spec));
  return train_losses(losses, config, monitor);
}

DiscoveryResult train_discovery(const MultiTrajectoryData& data, const LossSpec& spec, const TrainConfig& config,
                                const TrainingMonitor& monitor) {
  std::vector<ResidualLoss> losses;
  for (std::size_t j = 0; j < data.dim(); ++j) losses.push_back(build_loss(data, j, spec));
  return train_losses(losses, config, monitor);
}

}  // namespace dyndisc
