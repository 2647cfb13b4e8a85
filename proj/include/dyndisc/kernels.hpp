#pragma once

// Batched network evaluation and loss gradients. The serial versions walk one
// point at a time and serve as the reference; the parallel versions process
// fixed-size point blocks with dense matrix products under OpenMP and combine
// block gradients by a pairwise tree, so results do not depend on the thread
// count.

#include <vector>

#include "dyndisc/fnn.hpp"

namespace dyndisc::kernels {

inline constexpr int kMinBlockSize = 32;
inline constexpr int kMaxBlocks = 8;

/// Block size used for `points` samples: depends only on the sample count.
[[nodiscard]] int block_size(std::size_t points);

[[nodiscard]] std::vector<double> forward_serial(const FnnParams& params, const std::vector<State>& points);
[[nodiscard]] std::vector<double> forward_parallel(const FnnParams& params, const std::vector<State>& points);

/// Gradient of Σ_p g_p u(x_p) for given output sensitivities g.
[[nodiscard]] std::vector<double> backprop_serial(const FnnParams& params, const std::vector<State>& points,
                                                  const std::vector<double>& sensitivity);
[[nodiscard]] std::vector<double> backprop_parallel(const FnnParams& params, const std::vector<State>& points,
                                                    const std::vector<double>& sensitivity);

[[nodiscard]] LossGradient loss_gradient_serial(const FnnParams& params, const ResidualLoss& loss);
[[nodiscard]] LossGradient loss_gradient_parallel(const FnnParams& params, const ResidualLoss& loss);

}  // namespace dyndisc::kernels
