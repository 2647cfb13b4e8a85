#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dyndisc/error.hpp"
#include "dyndisc/experiments.hpp"

using namespace dyndisc;
using namespace dyndisc::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dyndisc_experiment_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrajectoryData series(const std::vector<double>& xs, double h) {
  TrajectoryData d;
  d.h = h;
  d.N = static_cast<int>(xs.size()) - 1;
  for (double x : xs) d.states.push_back({x});
  return d;
}

}  // namespace

TEST_CASE("settings parse numbers, powers, ranges and lists") {
  auto c = default_config(ExperimentKind::GridConverge);
  apply_setting(c, "h", "2^-3, 0.1/2^2, 0.5");
  CHECK(c.hs == std::vector<double>{0.125, 0.025, 0.5});
  apply_setting(c, "h-pow2", "3..5");
  CHECK(c.hs == std::vector<double>{0.125, 0.0625, 0.03125});
  apply_setting(c, "steps", "1..3,6");
  CHECK(c.steps == std::vector<int>{1, 2, 3, 6});
  apply_setting(c, "family", "am,bdf");
  CHECK(c.families == std::vector<SchemeFamily>{SchemeFamily::AdamsMoulton, SchemeFamily::BDF});
  apply_setting(c, "param", "k1=100");
  apply_setting(c, "param.J0", "2");
  CHECK(c.model_params.at("k1") == 100.0);
  CHECK(c.model_params.at("J0") == 2.0);
  apply_setting(c, "with_aux", "off");
  CHECK_FALSE(c.with_aux);
  CHECK_THROWS_AS(apply_setting(c, "nonsense", "1"), Error);
  CHECK_THROWS_AS(apply_setting(c, "epochs", "ten"), Error);
}

TEST_CASE("config invariants") {
  auto c = default_config(ExperimentKind::GridConverge);
  c.validate();
  c.hs = {0.1, 0.1};
  CHECK_THROWS_AS(c.validate(), Error);
  c.hs = {0.1, -0.2};
  CHECK_THROWS_AS(c.validate(), Error);
  c.hs = {};
  CHECK_THROWS_AS(c.validate(), Error);
  c = default_config(ExperimentKind::GridConverge);
  c.families.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  default_config(ExperimentKind::Coeffs).validate();
}

TEST_CASE("config files and JSON snapshots") {
  const auto dir = scratch("ini");
  fs::create_directories(dir);
  const auto file = dir / "run.ini";
  {
    std::ofstream out(file);
    out << "model = glycolytic\n[schemes]\nfamilies = ab\nsteps = 2..3\nh = 2^-4,2^-5\n[params]\nk1 = 90\n"
        << "[training]\nepochs = 123\nseeds = 4,5\n";
  }
  auto c = default_config(ExperimentKind::NetConverge);
  apply_config_file(c, file);
  CHECK(c.model == "glycolytic");
  CHECK(c.steps == std::vector<int>{2, 3});
  CHECK(c.model_params.at("k1") == 90.0);
  CHECK(c.epochs == 123);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  c.T = 0.3;
  c.x0 = State{0.1, 0.2};
  c.fit_window = std::pair<int, int>{1, 4};
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.hs == c.hs);
  CHECK(*back.fit_window == *c.fit_window);
  const auto train = c.train_config(7, 9);
  CHECK(train.epochs == 123);
  CHECK(train.schedule.total_epochs == 123);
  CHECK(train.seed == 9);
}

TEST_CASE("steps_for") {
  CHECK(steps_for(1.0, 0.125) == 8);
  CHECK(steps_for(1.0, 0.1 / 16) == 160);
  CHECK_THROWS_AS((void)steps_for(1.0, 0.3), Error);
}

TEST_CASE("divergence time") {
  const auto ref = series({1, 1, 1, 1, 1, 1, 1, 1}, 0.5);
  CHECK_FALSE(divergence_time(ref, ref, 0.1, 2).has_value());
  const auto blip = series({1, 1, 1.5, 1, 1, 1, 1, 1}, 0.5);
  CHECK_FALSE(divergence_time(ref, blip, 0.1, 2).has_value());
  const auto drift = series({1, 1, 1, 1.2, 1.3, 1.4, 1.5, 1.6}, 0.5);
  REQUIRE(divergence_time(ref, drift, 0.1, 3).has_value());
  CHECK(*divergence_time(ref, drift, 0.1, 3) == doctest::Approx(1.5));
  // A truncated prediction only diverges inside its own range.
  const auto short_run = series({1, 1, 1.5, 1.5}, 0.5);
  CHECK(*divergence_time(ref, short_run, 0.1, 2) == doctest::Approx(1.0));
  CHECK_FALSE(divergence_time(ref, short_run, 0.1, 3).has_value());
}

TEST_CASE("grid convergence isolates failing cells") {
  auto c = default_config(ExperimentKind::GridConverge);
  c.families = {SchemeFamily::BDF};
  c.steps = {2};
  c.hs = {0.125, 0.3, 0.0625, 0.03125};
  const auto r = grid_converge(c);
  REQUIRE(r.cells.size() == 4u);
  CHECK(r.cells[0].status == "ok");
  CHECK(r.cells[1].status != "ok");
  CHECK(r.cells[2].status == "ok");
  REQUIRE(r.fits.size() == 1u);
  CHECK(r.fits[0].ok);
  CHECK(r.fits[0].fit.points.size() == 3u);
  CHECK(r.fits[0].fit.slope == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("appendix runner labels solver settings") {
  auto c = default_config(ExperimentKind::AppendixUnstable);
  c.hs = {0.125, 0.0625};
  const auto r = appendix_unstable(c);
  CHECK(r.cells.size() == 6u);
  CHECK(r.fits.size() == 3u);
  CHECK(r.fits[0].label == "fs");
  CHECK(r.fits[1].label == "gmres(1e-04)");
}

TEST_CASE("runs write documented CSVs and re-run bitwise from their manifest") {
  for (auto kind : {ExperimentKind::Coeffs, ExperimentKind::Stability, ExperimentKind::GridConverge,
                    ExperimentKind::GridDiscover, ExperimentKind::Discover, ExperimentKind::GenData}) {
    auto c = default_config(kind);
    c.out_dir = scratch(kind_name(kind) + "_a");
    c.Ns = {16, 32};
    if (kind == ExperimentKind::Stability) c.steps = {1, 2};
    if (kind == ExperimentKind::GridConverge) c.hs = {0.125, 0.0625, 0.03125};
    if (kind == ExperimentKind::Discover) {
      c.epochs = 40;
      c.width = 6;
      c.depth = 2;
      c.record_every = 10;
      c.hs = {0.0625};
    }
    const auto first = run_experiment(c);
    CHECK(fs::exists(first.manifest));
    REQUIRE_FALSE(first.files.empty());
    for (const auto& f : first.files) {
      const auto text = slurp(f);
      CHECK(text.rfind("# ", 0) == 0);
    }
    const auto again = rerun_from_manifest(first.manifest, scratch(kind_name(kind) + "_b"));
    REQUIRE(again.files.size() == first.files.size());
    for (std::size_t i = 0; i < first.files.size(); ++i) CHECK(slurp(first.files[i]) == slurp(again.files[i]));
  }
}

TEST_CASE("output directory resolution") {
  auto c = default_config(ExperimentKind::Coeffs);
  c.out_dir = "/tmp/x";
  CHECK(resolve_out_dir(c) == fs::path("/tmp/x"));
  c.out_dir.clear();
  setenv("DYNDISC_OUT", "/tmp/root", 1);
  CHECK(resolve_out_dir(c) == fs::path("/tmp/root/coeffs"));
  unsetenv("DYNDISC_OUT");
  CHECK(resolve_out_dir(c) == fs::path("dyndisc_out/coeffs"));
  CHECK(parse_kind(kind_name(ExperimentKind::AppendixUnstable)) == ExperimentKind::AppendixUnstable);
}
