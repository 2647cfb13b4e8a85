#include "doctest.h"

#include <cmath>

#include "dyndisc/discovery.hpp"
#include "dyndisc/error.hpp"
#include "dyndisc/models.hpp"

using namespace dyndisc;

namespace {

TrajectoryData trig(int N) { return generate_trajectory(trig_model(), N); }

TrainConfig small_config(int epochs, std::uint64_t seed = 1) {
  TrainConfig c;
  c.architecture = FnnArchitecture::uniform(3, 2, 8);
  c.epochs = epochs;
  c.schedule = {epochs, -2.0, -4.0};
  c.seed = seed;
  c.record_every = 50;
  return c;
}

}  // namespace

TEST_CASE("loss rows and weights") {
  const auto data = trig(20);
  for (auto f : {SchemeFamily::AdamsBashforth, SchemeFamily::AdamsMoulton, SchemeFamily::BDF}) {
    for (int M = 1; M <= 4; ++M) {
      const auto s = build_scheme(f, M);
      const auto idx = scheme_indices(s, 20);
      const auto aug = build_loss(data, 0, LossSpec::make(s, true));
      CHECK(aug.rows() == static_cast<std::size_t>(idx.count));
      for (double w : aug.weight) CHECK(w == doctest::Approx(1.0 / idx.count));
      const auto plain = build_loss(data, 0, LossSpec::make(s, false));
      CHECK(plain.rows() == static_cast<std::size_t>(20 - M + 1));
      for (double w : plain.weight) CHECK(w == doctest::Approx(1.0 / (20 - M + 1)));
      CHECK(LossSpec::make(s, true).stencil.has_value() == (idx.aux_count > 0));
    }
  }
}

TEST_CASE("plain loss of the true field is the mean squared truncation error") {
  const auto m = trig_model();
  const auto data = trig(16);
  const auto s = build_scheme(SchemeFamily::AdamsBashforth, 2);
  const ScalarEvaluator u = [&](const State& x) { return m.field(x)[1]; };
  double acc = 0.0;
  for (int n = 2; n <= 16; ++n) {
    const double tau = local_truncation_error(s, *m.analytic_state, m.field, data.h, n)[1];
    acc += tau * tau;
  }
  CHECK(loss_plain(u, data, 1, s) == doctest::Approx(acc / 15).epsilon(1e-9));
}

TEST_CASE("augmented loss adds the stencil rows") {
  const auto m = trig_model();
  const auto data = trig(16);
  const auto s = build_scheme(SchemeFamily::AdamsMoulton, 2);
  const auto spec = LossSpec::make(s, true);
  const ScalarEvaluator zero = [](const State&) { return 0.0; };
  const auto loss = build_loss(data, 0, spec);
  double acc = 0.0;
  for (std::size_t r = 0; r < loss.rows(); ++r) acc += loss.target[r] * loss.target[r] / 17.0;
  CHECK(loss_augmented(zero, data, 0, spec) == doctest::Approx(acc));
  // The first target is the order-3 forward difference at t = 0 of sin: close to cos 0 = 1.
  CHECK(loss.target[0] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("multi loss of one trajectory equals the single-trajectory loss") {
  const auto data = trig(24);
  const auto spec = LossSpec::make(build_scheme(SchemeFamily::BDF, 3), true);
  MultiTrajectoryData one;
  one.trajectories = {data};
  const ScalarEvaluator u = [](const State& x) { return x[0] * x[1] + 0.3; };
  CHECK(loss_multi(u, one, 2, spec) == loss_augmented(u, data, 2, spec));
  MultiTrajectoryData two;
  two.trajectories = {data, generate_trajectory(trig_model(), 24, 1.0, State{0.0, 1.1, 0.0})};
  const double mean = 0.5 * (loss_augmented(u, two.trajectories[0], 2, spec) + loss_augmented(u, two.trajectories[1], 2, spec));
  CHECK(loss_multi(u, two, 2, spec) == doctest::Approx(mean).epsilon(1e-14));
  two.trajectories[1] = trig(12);
  try {
    (void)build_loss(two, 0, spec);
    FAIL("expected MismatchedGrids");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MismatchedGrids);
  }
}

TEST_CASE("training lowers the loss, records history and is reproducible") {
  const auto data = trig(32);
  const auto spec = LossSpec::make(build_scheme(SchemeFamily::BDF, 2), true);
  const auto a = train_discovery(data, spec, small_config(200));
  const auto b = train_discovery(data, spec, small_config(200));
  CHECK_FALSE(a.aborted);
  REQUIRE(a.history.size() == 5u);
  CHECK(a.history.front().epoch == 0);
  CHECK(a.history[1].epoch == 50);
  CHECK(a.history.back().epoch == 200);
  CHECK(a.history.back().loss < a.history.front().loss);
  CHECK(std::isnan(a.history.front().grid_error));
  for (std::size_t j = 0; j < 3; ++j) CHECK(a.nets[j].values == b.nets[j].values);
  const auto c = train_discovery(data, spec, small_config(200, 2));
  CHECK(c.nets[0].values != a.nets[0].values);
}

TEST_CASE("components train independently with seed + j") {
  const auto data = trig(32);
  const auto spec = LossSpec::make(build_scheme(SchemeFamily::BDF, 2), true);
  const auto all = train_discovery(data, spec, small_config(60));
  const auto single = train_losses({build_loss(data, 1, spec)}, small_config(60, 2));
  CHECK(single.nets[0].values == all.nets[1].values);
}

TEST_CASE("monitor values are recorded") {
  const auto data = trig(32);
  TrainingMonitor mon;
  int calls = 0;
  mon.grid_error = [&](const std::vector<FnnParams>& nets) {
    ++calls;
    return static_cast<double>(nets.size());
  };
  const auto r = train_discovery(data, LossSpec::make(build_scheme(SchemeFamily::BDF, 1), true), small_config(100), mon);
  CHECK(calls == static_cast<int>(r.history.size()));
  CHECK(r.history.back().grid_error == 3.0);
}

TEST_CASE("a diverging run aborts and keeps its history") {
  ResidualLoss bad = regression_loss({{0.5, 0.5, 0.5}}, {1e300});
  const auto r = train_losses({bad}, small_config(10));
  CHECK(r.aborted);
  CHECK_FALSE(r.abort_reason.empty());
}

TEST_CASE("profiles") {
  const auto desk = train_profile("desk", 3);
  CHECK(desk.architecture.widths == std::vector<int>{64, 64, 64});
  CHECK(desk.epochs == 5000);
  const auto paper = train_profile("paper", 3);
  CHECK(paper.architecture.widths == std::vector<int>(5, 640));
  CHECK(paper.epochs == 30000);
  CHECK_THROWS_AS((void)train_profile("huge", 3), Error);
}

TEST_CASE("regression loss") {
  const auto loss = regression_loss({{0.0}, {1.0}}, {1.0, 3.0});
  const ScalarEvaluator u = [](const State& x) { return 2.0 * x[0]; };
  CHECK(evaluate_loss(loss, u) == doctest::Approx((1.0 + 1.0) / 2.0));
}
