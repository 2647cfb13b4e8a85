#include "dyndisc/fnn.hpp"

#include <cmath>
#include <random>

#include "dyndisc/error.hpp"
#include "dyndisc/kernels.hpp"

namespace dyndisc {

std::size_t FnnArchitecture::parameter_count() const {
  std::size_t count = 0;
  int prev = input_dim;
  for (int w : widths) {
    count += static_cast<std::size_t>(w) * prev + w;
    prev = w;
  }
  return count + static_cast<std::size_t>(prev);
}

void FnnArchitecture::validate() const {
  if (input_dim < 1) throw Error(ErrorCode::InvalidArgument, "input dimension must be positive");
  if (widths.empty()) throw Error(ErrorCode::InvalidArgument, "network needs at least one hidden layer");
  for (int w : widths) {
    if (w < 1) throw Error(ErrorCode::InvalidArgument, "layer widths must be positive");
  }
}

FnnArchitecture FnnArchitecture::uniform(int input_dim, int depth, int width) {
  FnnArchitecture arch{input_dim, std::vector<int>(static_cast<std::size_t>(std::max(depth, 0)), width)};
  arch.validate();
  return arch;
}

FnnParams::FnnParams(FnnArchitecture architecture) : arch(std::move(architecture)) {
  arch.validate();
  values.assign(arch.parameter_count(), 0.0);
}

std::size_t FnnParams::weight_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) off += static_cast<std::size_t>(arch.widths[l]) * (fan_in(l) + 1);
  return off;
}

std::size_t FnnParams::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<std::size_t>(arch.widths[layer]) * fan_in(layer);
}

std::size_t FnnParams::output_offset() const { return weight_offset(arch.depth()); }

Eigen::Map<const RowMajorMatrix> FnnParams::weight(int layer) const {
  return {values.data() + weight_offset(layer), arch.widths[layer], fan_in(layer)};
}

Eigen::Map<RowMajorMatrix> FnnParams::weight(int layer) {
  return {values.data() + weight_offset(layer), arch.widths[layer], fan_in(layer)};
}

Eigen::Map<const Eigen::VectorXd> FnnParams::bias(int layer) const {
  return {values.data() + bias_offset(layer), arch.widths[layer]};
}

Eigen::Map<Eigen::VectorXd> FnnParams::bias(int layer) {
  return {values.data() + bias_offset(layer), arch.widths[layer]};
}

Eigen::Map<const Eigen::VectorXd> FnnParams::output() const {
  return {values.data() + output_offset(), arch.widths.back()};
}

Eigen::Map<Eigen::VectorXd> FnnParams::output() {
  return {values.data() + output_offset(), arch.widths.back()};
}

FnnParams init_params(const FnnArchitecture& arch, std::uint64_t seed, InitRange range) {
  FnnParams params(arch);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t begin, std::size_t end, int fan) {
    const double r = range == InitRange::Reciprocal ? 1.0 / std::sqrt(static_cast<double>(fan))
                                                    : std::sqrt(static_cast<double>(fan));
    std::uniform_real_distribution<double> dist(-r, r);
    for (std::size_t i = begin; i < end; ++i) params.values[i] = dist(rng);
  };
  for (int l = 0; l < arch.depth(); ++l) {
    fill(params.weight_offset(l), params.weight_offset(l + 1), params.fan_in(l));
  }
  fill(params.output_offset(), params.values.size(), arch.widths.back());
  return params;
}

double forward(const FnnParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.arch.input_dim) {
    throw Error(ErrorCode::InvalidArgument, "input dimension mismatch");
  }
  std::vector<double> in(x.begin(), x.end());
  std::vector<double> out;
  for (int l = 0; l < params.arch.depth(); ++l) {
    const int rows = params.arch.widths[l];
    const int cols = params.fan_in(l);
    const double* W = params.values.data() + params.weight_offset(l);
    const double* b = params.values.data() + params.bias_offset(l);
    out.assign(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
      double acc = b[i];
      for (int j = 0; j < cols; ++j) acc += W[static_cast<std::size_t>(i) * cols + j] * in[j];
      out[i] = acc > 0.0 ? acc : 0.0;
    }
    in.swap(out);
  }
  const double* a = params.values.data() + params.output_offset();
  double u = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) u += a[i] * in[i];
  return u;
}

void ResidualLoss::add_row(std::span<const std::pair<int, double>> terms, double y, double w) {
  for (const auto& [p, c] : terms) {
    if (p < 0 || p >= static_cast<int>(points.size())) throw Error(ErrorCode::IndexOutOfRange, "loss term point");
    term_point.push_back(p);
    term_coeff.push_back(c);
  }
  row_begin.push_back(static_cast<int>(term_point.size()));
  target.push_back(y);
  weight.push_back(w);
}

void ResidualLoss::append(const ResidualLoss& other, double scale) {
  const int point_shift = static_cast<int>(points.size());
  const int term_shift = static_cast<int>(term_point.size());
  points.insert(points.end(), other.points.begin(), other.points.end());
  for (int p : other.term_point) term_point.push_back(p + point_shift);
  term_coeff.insert(term_coeff.end(), other.term_coeff.begin(), other.term_coeff.end());
  for (std::size_t r = 1; r < other.row_begin.size(); ++r) row_begin.push_back(other.row_begin[r] + term_shift);
  target.insert(target.end(), other.target.begin(), other.target.end());
  for (double w : other.weight) weight.push_back(w * scale);
}

double ResidualLoss::value(std::span<const double> outputs) const {
  double acc = 0.0;
  for (std::size_t r = 0; r < rows(); ++r) {
    double res = -target[r];
    for (int k = row_begin[r]; k < row_begin[r + 1]; ++k) res += term_coeff[k] * outputs[term_point[k]];
    acc += weight[r] * res * res;
  }
  return acc;
}

std::vector<double> ResidualLoss::output_sensitivity(std::span<const double> outputs) const {
  std::vector<double> g(points.size(), 0.0);
  for (std::size_t r = 0; r < rows(); ++r) {
    double res = -target[r];
    for (int k = row_begin[r]; k < row_begin[r + 1]; ++k) res += term_coeff[k] * outputs[term_point[k]];
    const double scale = 2.0 * weight[r] * res;
    for (int k = row_begin[r]; k < row_begin[r + 1]; ++k) g[term_point[k]] += scale * term_coeff[k];
  }
  return g;
}

LossGradient loss_gradient(const FnnParams& params, const ResidualLoss& loss) {
  return kernels::loss_gradient_parallel(params, loss);
}

void adam_step(FnnParams& params, AdamState& state, std::span<const double> grad, double rate) {
  const std::size_t n = params.values.size();
  if (grad.size() != n) throw Error(ErrorCode::InvalidArgument, "gradient size mismatch");
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params.values[i] -= rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

double lr_at(const LrSchedule& schedule, int n) {
  if (schedule.total_epochs < 1) throw Error(ErrorCode::InvalidArgument, "schedule needs at least one epoch");
  const double frac = static_cast<double>(n) / schedule.total_epochs;
  return std::pow(10.0, schedule.start_exponent + (schedule.end_exponent - schedule.start_exponent) * frac);
}

}  // namespace dyndisc
