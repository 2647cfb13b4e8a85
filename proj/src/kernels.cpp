#include "dyndisc/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "dyndisc/error.hpp"

namespace dyndisc::kernels {

namespace {

void check_inputs(const FnnParams& params, const std::vector<State>& points) {
  for (const auto& x : points) {
    if (static_cast<int>(x.size()) != params.arch.input_dim) {
      throw Error(ErrorCode::InvalidArgument, "input dimension mismatch");
    }
  }
}

void check_finite(const std::vector<double>& grad) {
  for (double g : grad) {
    if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient entry");
  }
}

// Activations of one point: h_0 = x, h_ℓ = relu(W_ℓ h_{ℓ-1} + b_ℓ).
std::vector<std::vector<double>> point_activations(const FnnParams& params, const State& x) {
  std::vector<std::vector<double>> h;
  h.push_back(x);
  for (int l = 0; l < params.arch.depth(); ++l) {
    const int rows = params.arch.widths[l];
    const int cols = params.fan_in(l);
    const double* W = params.values.data() + params.weight_offset(l);
    const double* b = params.values.data() + params.bias_offset(l);
    std::vector<double> out(rows);
    for (int i = 0; i < rows; ++i) {
      double acc = b[i];
      for (int j = 0; j < cols; ++j) acc += W[static_cast<std::size_t>(i) * cols + j] * h.back()[j];
      out[i] = acc > 0.0 ? acc : 0.0;
    }
    h.push_back(std::move(out));
  }
  return h;
}

struct BlockRange {
  int begin;
  int end;
};

std::vector<BlockRange> blocks_for(std::size_t n) {
  const int bs = block_size(n);
  std::vector<BlockRange> out;
  for (int b = 0; b < static_cast<int>(n); b += bs) out.push_back({b, std::min<int>(b + bs, static_cast<int>(n))});
  return out;
}

// Column-major activations H_ℓ (W_ℓ × B) of one block, H_0 = inputs.
std::vector<Eigen::MatrixXd> block_activations(const FnnParams& params, const std::vector<State>& points,
                                               BlockRange range) {
  const int B = range.end - range.begin;
  std::vector<Eigen::MatrixXd> H;
  H.emplace_back(params.arch.input_dim, B);
  for (int c = 0; c < B; ++c) {
    for (int i = 0; i < params.arch.input_dim; ++i) H[0](i, c) = points[range.begin + c][i];
  }
  for (int l = 0; l < params.arch.depth(); ++l) {
    Eigen::MatrixXd Z = params.weight(l) * H.back();
    Z.colwise() += params.bias(l);
    H.push_back(Z.cwiseMax(0.0));
  }
  return H;
}

}  // namespace

int block_size(std::size_t points) {
  const auto n = static_cast<int>(points);
  return std::max(kMinBlockSize, (n + kMaxBlocks - 1) / kMaxBlocks);
}

std::vector<double> forward_serial(const FnnParams& params, const std::vector<State>& points) {
  check_inputs(params, points);
  std::vector<double> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) out[p] = forward(params, points[p]);
  return out;
}

std::vector<double> forward_parallel(const FnnParams& params, const std::vector<State>& points) {
  check_inputs(params, points);
  std::vector<double> out(points.size());
  const auto blocks = blocks_for(points.size());
  const int nb = static_cast<int>(blocks.size());
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; ++b) {
    const auto H = block_activations(params, points, blocks[b]);
    const Eigen::VectorXd u = H.back().transpose() * params.output();
    for (int c = 0; c < u.size(); ++c) out[blocks[b].begin + c] = u(c);
  }
  return out;
}

std::vector<double> backprop_serial(const FnnParams& params, const std::vector<State>& points,
                                    const std::vector<double>& sensitivity) {
  check_inputs(params, points);
  const int L = params.arch.depth();
  std::vector<double> grad(params.values.size(), 0.0);
  const double* a = params.values.data() + params.output_offset();
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double g = sensitivity[p];
    if (g == 0.0) continue;
    const auto h = point_activations(params, points[p]);
    double* ga = grad.data() + params.output_offset();
    std::vector<double> delta(params.arch.widths[L - 1]);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      ga[i] += g * h[L][i];
      delta[i] = h[L][i] > 0.0 ? g * a[i] : 0.0;
    }
    for (int l = L - 1; l >= 0; --l) {
      const int rows = params.arch.widths[l];
      const int cols = params.fan_in(l);
      const double* W = params.values.data() + params.weight_offset(l);
      double* gW = grad.data() + params.weight_offset(l);
      double* gb = grad.data() + params.bias_offset(l);
      for (int i = 0; i < rows; ++i) {
        gb[i] += delta[i];
        for (int j = 0; j < cols; ++j) gW[static_cast<std::size_t>(i) * cols + j] += delta[i] * h[l][j];
      }
      if (l == 0) break;
      std::vector<double> prev(cols, 0.0);
      for (int j = 0; j < cols; ++j) {
        if (h[l][j] <= 0.0) continue;
        double acc = 0.0;
        for (int i = 0; i < rows; ++i) acc += W[static_cast<std::size_t>(i) * cols + j] * delta[i];
        prev[j] = acc;
      }
      delta.swap(prev);
    }
  }
  return grad;
}

std::vector<double> backprop_parallel(const FnnParams& params, const std::vector<State>& points,
                                      const std::vector<double>& sensitivity) {
  check_inputs(params, points);
  const int L = params.arch.depth();
  const auto blocks = blocks_for(points.size());
  const int nb = static_cast<int>(blocks.size());
  std::vector<std::vector<double>> partial(nb);

#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; ++b) {
    const auto range = blocks[b];
    const int B = range.end - range.begin;
    const auto H = block_activations(params, points, range);
    const Eigen::Map<const Eigen::RowVectorXd> g(sensitivity.data() + range.begin, B);

    FnnParams grad(params.arch);
    grad.output() = H[L] * g.transpose();
    // Δ_L = (a gᵀ) ⊙ 1[H_L > 0]
    Eigen::MatrixXd delta = (params.output() * g).cwiseProduct((H[L].array() > 0.0).cast<double>().matrix());
    for (int l = L - 1; l >= 0; --l) {
      grad.weight(l) = delta * H[l].transpose();
      grad.bias(l) = delta.rowwise().sum();
      if (l == 0) break;
      Eigen::MatrixXd prev = params.weight(l).transpose() * delta;
      delta = prev.cwiseProduct((H[l].array() > 0.0).cast<double>().matrix());
    }
    partial[b] = std::move(grad.values);
  }

  // Pairwise tree reduction in a fixed order.
  for (int stride = 1; stride < nb; stride *= 2) {
    for (int i = 0; i + stride < nb; i += 2 * stride) {
      auto& dst = partial[i];
      const auto& src = partial[i + stride];
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  if (nb == 0) return std::vector<double>(params.values.size(), 0.0);
  return std::move(partial[0]);
}

LossGradient loss_gradient_serial(const FnnParams& params, const ResidualLoss& loss) {
  const auto u = forward_serial(params, loss.points);
  LossGradient out;
  out.value = loss.value(u);
  out.grad = backprop_serial(params, loss.points, loss.output_sensitivity(u));
  check_finite(out.grad);
  return out;
}

LossGradient loss_gradient_parallel(const FnnParams& params, const ResidualLoss& loss) {
  const auto u = forward_parallel(params, loss.points);
  LossGradient out;
  out.value = loss.value(u);
  out.grad = backprop_parallel(params, loss.points, loss.output_sensitivity(u));
  check_finite(out.grad);
  return out;
}

}  // namespace dyndisc::kernels
