#pragma once

// Scalar-output ReLU feed-forward networks, their reverse-mode gradients for
// losses that are weighted sums of squared linear combinations of network
// outputs, and the Adam optimizer with the exponential rate schedule.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dyndisc/types.hpp"

namespace dyndisc {

struct FnnArchitecture {
  int input_dim = 1;
  std::vector<int> widths;  // W_1..W_L

  [[nodiscard]] int depth() const { return static_cast<int>(widths.size()); }
  [[nodiscard]] std::size_t parameter_count() const;
  void validate() const;

  /// L hidden layers of equal width W.
  [[nodiscard]] static FnnArchitecture uniform(int input_dim, int depth, int width);
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// All parameters in one flat vector. Layer ℓ stores W_ℓ (row-major,
/// W_ℓ × W_{ℓ-1}) followed by b_ℓ; the output vector a comes last.
struct FnnParams {
  FnnArchitecture arch;
  std::vector<double> values;

  FnnParams() = default;
  explicit FnnParams(FnnArchitecture architecture);

  [[nodiscard]] std::size_t weight_offset(int layer) const;
  [[nodiscard]] std::size_t bias_offset(int layer) const;
  [[nodiscard]] std::size_t output_offset() const;

  [[nodiscard]] Eigen::Map<const RowMajorMatrix> weight(int layer) const;
  [[nodiscard]] Eigen::Map<RowMajorMatrix> weight(int layer);
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  [[nodiscard]] Eigen::Map<Eigen::VectorXd> bias(int layer);
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> output() const;
  [[nodiscard]] Eigen::Map<Eigen::VectorXd> output();

  [[nodiscard]] int fan_in(int layer) const {
    return layer == 0 ? arch.input_dim : arch.widths[layer - 1];
  }
};

enum class InitRange {
  Reciprocal,  // U(-1/√W_{ℓ-1}, 1/√W_{ℓ-1})
  Literal,     // U(-√W_{ℓ-1}, √W_{ℓ-1})
};

[[nodiscard]] FnnParams init_params(const FnnArchitecture& arch, std::uint64_t seed,
                                    InitRange range = InitRange::Reciprocal);

/// aᵀ h_L ∘ ... ∘ h_1(x) with h_ℓ(z) = max(0, W_ℓ z + b_ℓ).
[[nodiscard]] double forward(const FnnParams& params, std::span<const double> x);

/// Loss of the form Σ_r w_r (Σ_k c_{r,k} u(x_{p_{r,k}}) - y_r)² over a fixed point set.
struct ResidualLoss {
  std::vector<State> points;
  std::vector<int> row_begin{0};  // CSR offsets into term_point / term_coeff
  std::vector<int> term_point;
  std::vector<double> term_coeff;
  std::vector<double> target;
  std::vector<double> weight;

  [[nodiscard]] std::size_t rows() const { return target.size(); }
  void add_row(std::span<const std::pair<int, double>> terms, double y, double w);
  /// Appends the rows and points of `other`, rescaling its weights by `scale`.
  void append(const ResidualLoss& other, double scale = 1.0);

  /// Loss value for given per-point outputs.
  [[nodiscard]] double value(std::span<const double> outputs) const;
  /// dLoss/du at every point.
  [[nodiscard]] std::vector<double> output_sensitivity(std::span<const double> outputs) const;
};

/// Loss value and gradient with respect to every parameter (same layout as FnnParams::values).
struct LossGradient {
  double value = 0.0;
  std::vector<double> grad;
};

/// Exact loss gradient with ReLU'(0) = 0. Throws Error(NonFiniteGradient).
[[nodiscard]] LossGradient loss_gradient(const FnnParams& params, const ResidualLoss& loss);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(FnnParams& params, AdamState& state, std::span<const double> grad, double rate);

/// δ_n = 10^(start + (end - start) n / N_I).
struct LrSchedule {
  int total_epochs = 1;
  double start_exponent = -2.0;
  double end_exponent = -4.0;
};

[[nodiscard]] double lr_at(const LrSchedule& schedule, int n);

}  // namespace dyndisc
