#include "doctest.h"

#include <cmath>
#include <random>

#include <omp.h>

#include "dyndisc/discovery.hpp"
#include "dyndisc/error.hpp"
#include "dyndisc/fnn.hpp"
#include "dyndisc/kernels.hpp"
#include "dyndisc/models.hpp"

using namespace dyndisc;

namespace {

// Straight loops over the flat layout.
double forward_oracle(const FnnParams& p, const State& x) {
  std::vector<double> z(x.begin(), x.end());
  std::size_t off = 0;
  int fan = p.arch.input_dim;
  for (int w : p.arch.widths) {
    std::vector<double> next(w);
    for (int i = 0; i < w; ++i) {
      double acc = p.values[off + static_cast<std::size_t>(w) * fan + i];
      for (int k = 0; k < fan; ++k) acc += p.values[off + static_cast<std::size_t>(i) * fan + k] * z[k];
      next[i] = std::max(0.0, acc);
    }
    off += static_cast<std::size_t>(w) * fan + w;
    fan = w;
    z = next;
  }
  double out = 0.0;
  for (int i = 0; i < fan; ++i) out += p.values[off + i] * z[i];
  return out;
}

std::vector<State> random_points(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<State> pts(n, State(d));
  for (auto& p : pts) {
    for (auto& v : p) v = U(rng);
  }
  return pts;
}

double loss_at(const FnnParams& p, const ResidualLoss& loss) {
  std::vector<double> out;
  for (const auto& x : loss.points) out.push_back(forward(p, x));
  return loss.value(out);
}

// Smallest |pre-activation| over all points and units: kinks are avoided when this stays above the FD step.
double min_preactivation(const FnnParams& p, const std::vector<State>& points) {
  double m = INFINITY;
  for (const auto& x : points) {
    std::vector<double> z(x.begin(), x.end());
    for (int l = 0; l < p.arch.depth(); ++l) {
      Eigen::VectorXd a = p.weight(l) * Eigen::Map<const Eigen::VectorXd>(z.data(), z.size()) + p.bias(l);
      for (int i = 0; i < a.size(); ++i) m = std::min(m, std::abs(a(i)));
      z.assign(a.data(), a.data() + a.size());
      for (auto& v : z) v = std::max(0.0, v);
    }
  }
  return m;
}

void check_gradient(const ResidualLoss& loss, const FnnArchitecture& arch) {
  const FnnParams p = init_params(arch, 99);
  const auto g = loss_gradient(p, loss);
  CHECK(g.value == doctest::Approx(loss_at(p, loss)).epsilon(1e-12));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N01;
  REQUIRE(min_preactivation(p, loss.points) > 1e-5);
  int used = 0;
  for (int attempt = 0; attempt < 100 && used < 10; ++attempt) {
    std::vector<double> dir(p.values.size());
    double norm = 0.0;
    for (auto& v : dir) {
      v = N01(rng);
      norm += v * v;
    }
    for (auto& v : dir) v /= std::sqrt(norm);
    const double eps = 1e-6;
    FnnParams plus = p, minus = p;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      plus.values[i] += eps * dir[i];
      minus.values[i] -= eps * dir[i];
    }
    if (min_preactivation(plus, loss.points) < 1e-5 || min_preactivation(minus, loss.points) < 1e-5) continue;
    const double fd = (loss_at(plus, loss) - loss_at(minus, loss)) / (2 * eps);
    double an = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) an += g.grad[i] * dir[i];
    CHECK(an == doctest::Approx(fd).epsilon(1e-4));
    ++used;
  }
  CHECK(used == 10);
}

TrajectoryData trig_data(int N) { return generate_trajectory(trig_model(), N); }

}  // namespace

TEST_CASE("parameter layout") {
  const auto arch = FnnArchitecture{3, {5, 4}};
  CHECK(arch.parameter_count() == (3 * 5 + 5) + (5 * 4 + 4) + 4);
  FnnParams p(arch);
  CHECK(p.values.size() == arch.parameter_count());
  CHECK(p.weight_offset(0) == 0u);
  CHECK(p.bias_offset(0) == 15u);
  CHECK(p.weight_offset(1) == 20u);
  CHECK(p.bias_offset(1) == 40u);
  CHECK(p.output_offset() == 44u);
  CHECK(p.fan_in(1) == 5);
  CHECK_THROWS_AS((FnnArchitecture{0, {4}}.validate()), Error);
  CHECK_THROWS_AS((FnnArchitecture{2, {}}.validate()), Error);
}

TEST_CASE("forward pass matches plain loops") {
  const auto p = init_params(FnnArchitecture::uniform(3, 3, 7), 3);
  for (const auto& x : random_points(20, 3, 1)) CHECK(forward(p, x) == doctest::Approx(forward_oracle(p, x)).epsilon(1e-13));
}

TEST_CASE("initialization ranges") {
  const auto arch = FnnArchitecture::uniform(2, 2, 16);
  const auto rec = init_params(arch, 1, InitRange::Reciprocal);
  const auto lit = init_params(arch, 1, InitRange::Literal);
  for (int l = 0; l < arch.depth(); ++l) {
    const double r = 1.0 / std::sqrt(static_cast<double>(rec.fan_in(l)));
    CHECK(rec.weight(l).cwiseAbs().maxCoeff() <= r);
    CHECK(rec.bias(l).cwiseAbs().maxCoeff() <= r);
    CHECK(lit.weight(l).cwiseAbs().maxCoeff() <= 1.0 / r);
  }
  CHECK(init_params(arch, 1).values == rec.values);
  CHECK(init_params(arch, 2).values != rec.values);
}

TEST_CASE("serial and parallel kernels agree") {
  const auto p = init_params(FnnArchitecture::uniform(3, 3, 16), 4);
  for (int n : {1, 31, 32, 100, 1000}) {
    const auto pts = random_points(n, 3, n);
    const auto a = kernels::forward_serial(p, pts);
    const auto b = kernels::forward_parallel(p, pts);
    for (int i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
    std::vector<double> sens(n);
    for (int i = 0; i < n; ++i) sens[i] = std::sin(i);
    const auto ga = kernels::backprop_serial(p, pts, sens);
    const auto gb = kernels::backprop_parallel(p, pts, sens);
    double scale = 0.0;
    for (double v : ga) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(std::abs(ga[i] - gb[i]) <= 1e-12 * scale);
  }
}

TEST_CASE("parallel gradients do not depend on the thread count") {
  const auto p = init_params(FnnArchitecture::uniform(3, 2, 16), 4);
  const auto data = trig_data(256);
  const auto loss = build_loss(data, 0, LossSpec::make(build_scheme(SchemeFamily::AdamsBashforth, 3), true));
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = kernels::loss_gradient_parallel(p, loss);
  omp_set_num_threads(4);
  const auto four = kernels::loss_gradient_parallel(p, loss);
  omp_set_num_threads(saved);
  CHECK(one.value == four.value);
  CHECK(one.grad == four.grad);
  CHECK(kernels::block_size(256) == 32);
  CHECK(kernels::block_size(1000) == 125);
  CHECK(kernels::block_size(10) == 32);
}

TEST_CASE("loss gradients match central differences") {
  const auto arch = FnnArchitecture::uniform(3, 2, 8);
  const auto data = trig_data(32);
  const auto scheme = build_scheme(SchemeFamily::AdamsMoulton, 2);
  SUBCASE("plain") { check_gradient(build_loss(data, 1, LossSpec::make(scheme, false)), arch); }
  SUBCASE("augmented") { check_gradient(build_loss(data, 1, LossSpec::make(scheme, true)), arch); }
  SUBCASE("multi") {
    MultiTrajectoryData multi;
    multi.trajectories = {data, generate_trajectory(trig_model(), 32, 1.0, State{0.0, 1.2, 0.1})};
    check_gradient(build_loss(multi, 2, LossSpec::make(scheme, true)), arch);
  }
}

TEST_CASE("non-finite gradients are reported") {
  const auto p = init_params(FnnArchitecture::uniform(1, 1, 4), 1);
  ResidualLoss loss = regression_loss({{0.5}, {0.2}}, {std::nan(""), 1.0});
  try {
    (void)loss_gradient(p, loss);
    FAIL("expected NonFiniteGradient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteGradient);
  }
}

TEST_CASE("Adam first step moves every coordinate by the rate against the gradient sign") {
  FnnParams p(FnnArchitecture::uniform(2, 1, 3));
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = 0.1 * i;
  const auto before = p.values;
  std::vector<double> g(p.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (i % 2 ? -1.0 : 1.0) * (0.5 + i);
  AdamState st(p.values.size());
  adam_step(p, st, g, 0.01);
  CHECK(st.step == 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double expected = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(p.values[i] - before[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("learning-rate schedule") {
  const LrSchedule s{5000, -2.0, -4.0};
  CHECK(lr_at(s, 0) == doctest::Approx(1e-2));
  CHECK(lr_at(s, 2500) == doctest::Approx(1e-3));
  CHECK(lr_at(s, 5000) == doctest::Approx(1e-4));
}
