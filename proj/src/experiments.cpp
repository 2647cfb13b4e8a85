#include "dyndisc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dyndisc/assembly.hpp"
#include "dyndisc/error.hpp"
#include "dyndisc/integrate.hpp"
#include "dyndisc/io.hpp"
#include "dyndisc/stability.hpp"

#ifndef DYNDISC_VERSION
#define DYNDISC_VERSION "0.0.0"
#endif

namespace dyndisc::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<ExperimentKind, std::string>>& kind_table() {
  static const std::vector<std::pair<ExperimentKind, std::string>> table{
      {ExperimentKind::Coeffs, "coeffs"},
      {ExperimentKind::Stability, "stability"},
      {ExperimentKind::GenData, "gen-data"},
      {ExperimentKind::GridDiscover, "grid-discover"},
      {ExperimentKind::Discover, "discover"},
      {ExperimentKind::GridConverge, "grid-converge"},
      {ExperimentKind::NetConverge, "net-converge"},
      {ExperimentKind::NetSizeSweep, "netsize"},
      {ExperimentKind::OptErrorProbe, "opt-probe"},
      {ExperimentKind::Predict, "predict"},
      {ExperimentKind::Region, "region"},
      {ExperimentKind::AppendixUnstable, "appendix-unstable"},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_plain(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad number '" + text + "'");
  }
}

// Accepts plain numbers, powers "2^-5" and quotients "0.1/2^3".
double parse_real(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw Error(ErrorCode::ParseError, "empty number");
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    const double den = parse_real(text.substr(slash + 1));
    if (den == 0.0) throw Error(ErrorCode::ParseError, "division by zero in '" + text + "'");
    return parse_real(text.substr(0, slash)) / den;
  }
  if (const auto caret = text.find('^'); caret != std::string::npos) {
    return std::pow(parse_plain(trim(text.substr(0, caret))), parse_plain(trim(text.substr(caret + 1))));
  }
  return parse_plain(text);
}

long long parse_integer(const std::string& raw) {
  const std::string text = trim(raw);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad integer '" + text + "'");
  }
}

int parse_int(const std::string& text) { return static_cast<int>(parse_integer(text)); }

bool parse_bool(const std::string& raw) {
  std::string t = trim(raw);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw Error(ErrorCode::ParseError, "bad boolean '" + raw + "'");
}

// Comma list of integers; "a..b" expands to an inclusive range.
std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) {
    if (const auto dots = item.find(".."); dots != std::string::npos) {
      const int a = parse_int(item.substr(0, dots));
      const int b = parse_int(item.substr(dots + 2));
      for (int k = a; a <= b ? k <= b : k >= b; k += a <= b ? 1 : -1) out.push_back(k);
    } else {
      out.push_back(parse_int(item));
    }
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_real(item));
  return out;
}

std::vector<double> powers_of_half(int from, int to) {
  std::vector<double> out;
  for (int k = from; k <= to; ++k) out.push_back(std::ldexp(1.0, -k));
  return out;
}

InitRange parse_init(const std::string& name) {
  if (name == "reciprocal") return InitRange::Reciprocal;
  if (name == "literal") return InitRange::Literal;
  throw Error(ErrorCode::InvalidArgument, "init must be reciprocal or literal");
}

// CSV output with a '#' comment block describing every column.
class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::vector<std::string>& comments,
          const std::vector<std::pair<std::string, std::string>>& columns)
      : path_(path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
    for (const auto& c : comments) out_ << "# " << c << '\n';
    for (const auto& [name, meaning] : columns) out_ << "# " << name << ": " << meaning << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i].first;
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string num(double v) { return format_double(v); }
std::string num(int v) { return std::to_string(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

struct Problem {
  DynamicalModel model;
  double T = 1.0;
  State x0;
};

Problem problem_for(const ExperimentConfig& config) {
  Problem p{model_by_name(config.model, config.model_params), 0.0, {}};
  p.T = config.T.value_or(p.model.default_T);
  p.x0 = config.x0.value_or(p.model.default_x0);
  if (static_cast<int>(p.x0.size()) != p.model.dim) {
    throw Error(ErrorCode::InvalidArgument, "x0 needs " + std::to_string(p.model.dim) + " components");
  }
  return p;
}

TrajectoryData sample(const Problem& p, double h) {
  return generate_trajectory(p.model, steps_for(p.T, h), p.T, p.x0);
}

SolverSpec solver_for(const ExperimentConfig& config) {
  if (config.solver == "fs") return SolverSpec::forward();
  return SolverSpec::gmres_with(config.tols.front(), config.restart, config.max_iter);
}

std::string what_of(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown failure";
  }
}

// Runs body(i) for every cell in parallel; returns the failure message per cell (empty on success).
template <class Body>
std::vector<std::string> run_cells(int count, Body&& body) {
  std::vector<std::string> failures(count);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      failures[i] = what_of(std::current_exception());
    }
  }
  return failures;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

double stacked_relative(const ErrorSums& sums) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t j = 0; j < sums.diff.size(); ++j) {
    diff += sums.diff[j];
    norm += sums.norm[j];
  }
  if (norm == 0.0) throw Error(ErrorCode::ZeroDenominator, "the field vanishes on the grid");
  return std::sqrt(diff / norm);
}

std::vector<SchemeFit> fit_by_label(const std::vector<GridCell>& cells, const std::vector<std::string>& labels,
                                    const std::function<std::string(const GridCell&)>& label_of,
                                    const std::optional<std::pair<int, int>>& window) {
  std::vector<SchemeFit> fits;
  for (const auto& label : labels) {
    SchemeFit fit;
    fit.label = label;
    std::vector<std::pair<double, double>> points;
    for (const auto& c : cells) {
      if (label_of(c) == label && c.status == "ok" && std::isfinite(c.error) && c.error > 0.0) {
        points.emplace_back(c.h, c.error);
      }
    }
    try {
      fit.fit = convergence_order(points, window);
      fit.ok = true;
    } catch (const Error&) {
      fit.fit.points = points;
      fit.ok = false;
    }
    fits.push_back(std::move(fit));
  }
  return fits;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  for (const auto& [k, name] : kind_table()) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  for (const auto& [k, n] : kind_table()) {
    if (n == name) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown experiment '" + name + "'");
}

int steps_for(double T, double h) {
  if (!(T > 0.0) || !(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "T and h must be positive");
  const double ratio = T / h;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 1.0) {
    throw Error(ErrorCode::InvalidArgument, "T/h must be an integer (T=" + num(T) + ", h=" + num(h) + ")");
  }
  return static_cast<int>(rounded);
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  using F = SchemeFamily;
  switch (kind) {
    case ExperimentKind::Coeffs:
    case ExperimentKind::Stability:
      break;
    case ExperimentKind::GenData:
      c.Ns = {64};
      break;
    case ExperimentKind::GridDiscover:
    case ExperimentKind::Discover:
    case ExperimentKind::NetSizeSweep:
    case ExperimentKind::Predict:
      c.families = {F::BDF};
      c.steps = {2};
      c.hs = {std::ldexp(1.0, -6)};
      break;
    case ExperimentKind::GridConverge:
      c.families = {F::AdamsBashforth, F::BDF};
      c.steps = {1, 2, 3, 4};
      c.hs = powers_of_half(3, 9);
      break;
    case ExperimentKind::NetConverge:
      c.families = {F::BDF};
      c.steps = {2};
      c.hs = {std::ldexp(1.0, -4), std::ldexp(1.0, -6)};
      c.seeds = {1, 2, 3};
      break;
    case ExperimentKind::OptErrorProbe:
      c.families = {F::BDF};
      c.steps = {4};
      c.hs = {std::ldexp(1.0, -6)};
      break;
    case ExperimentKind::Region:
      c.model = "planar";
      c.families = {F::AdamsBashforth, F::BDF};
      c.steps = {1, 2, 3, 4};
      for (int k = 0; k <= 4; ++k) c.hs.push_back(0.1 / std::ldexp(1.0, k));
      break;
    case ExperimentKind::AppendixUnstable:
      c.families = {F::AdamsMoulton};
      c.steps = {2};
      c.hs = powers_of_half(3, 9);
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (families.empty() || steps.empty()) throw Error(ErrorCode::InvalidArgument, "scheme grid is empty");
  for (int m : steps) {
    if (m < 1 || m > kMaxSteps) throw Error(ErrorCode::UnsupportedSteps, "steps must lie in [1, 6]");
  }
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!(hs[i] > 0.0) || !std::isfinite(hs[i])) throw Error(ErrorCode::InvalidArgument, "h values must be positive");
    for (std::size_t k = 0; k < i; ++k) {
      if (hs[k] == hs[i]) throw Error(ErrorCode::InvalidArgument, "h values must be distinct");
    }
  }
  const bool needs_h = kind != ExperimentKind::Coeffs && kind != ExperimentKind::Stability &&
                       kind != ExperimentKind::GenData;
  if (needs_h && hs.empty()) throw Error(ErrorCode::InvalidArgument, "h grid is empty");
  if (kind == ExperimentKind::GenData && hs.empty() && Ns.empty()) {
    throw Error(ErrorCode::InvalidArgument, "gen-data needs h or N");
  }
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "no seeds");
  if (profile != "desk" && profile != "paper") throw Error(ErrorCode::InvalidArgument, "profile must be desk or paper");
  (void)parse_init(init);
  if (solver != "fs" && solver != "gmres") throw Error(ErrorCode::InvalidArgument, "solver must be fs or gmres");
  if (tols.empty()) throw Error(ErrorCode::InvalidArgument, "no GMRES tolerances");
  for (double t : tols) {
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
  }
  if (restart < 1 || max_iter < 0) throw Error(ErrorCode::InvalidArgument, "bad GMRES restart or iteration limit");
  if (path != "grid" && path != "net" && path != "both") throw Error(ErrorCode::InvalidArgument, "path must be grid, net or both");
  if (n_trajectories < 1 || lattice < 2) throw Error(ErrorCode::InvalidArgument, "bad region sizes");
  if (epochs < 0 || width < 0 || depth < 0 || record_every < 1) throw Error(ErrorCode::InvalidArgument, "bad training sizes");
  if (T && !(*T > 0.0)) throw Error(ErrorCode::InvalidArgument, "T must be positive");
  if (predict_T && !(*predict_T > 0.0)) throw Error(ErrorCode::InvalidArgument, "prediction horizon must be positive");
  if (!(div_threshold > 0.0) || div_steps < 1 || rk4_steps_per_unit < 1) {
    throw Error(ErrorCode::InvalidArgument, "bad prediction settings");
  }
  if (mc_samples < 100) throw Error(ErrorCode::InvalidArgument, "at least 100 Monte Carlo samples are required");
  if (quad_panels < 1 || quad_nodes < 1 || quad_nodes > 64) throw Error(ErrorCode::InvalidArgument, "bad quadrature");
  for (int N : Ns) {
    if (N < 1) throw Error(ErrorCode::InvalidArgument, "N must be positive");
  }
}

std::vector<LmmScheme> ExperimentConfig::schemes() const {
  std::vector<LmmScheme> out;
  for (auto family : families) {
    for (int m : steps) out.push_back(build_scheme(family, m));
  }
  return out;
}

TrainConfig ExperimentConfig::train_config(int input_dim, std::uint64_t seed) const {
  TrainConfig tc = train_profile(profile, input_dim, seed);
  if (epochs > 0) {
    tc.epochs = epochs;
    tc.schedule.total_epochs = epochs;
  }
  if (width > 0 || depth > 0) {
    const int L = depth > 0 ? depth : tc.architecture.depth();
    const int W = width > 0 ? width : tc.architecture.widths.front();
    tc.architecture = FnnArchitecture::uniform(input_dim, L, W);
  }
  tc.record_every = record_every;
  tc.init = parse_init(init);
  return tc;
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string v = trim(raw_value);
  if (key.rfind("param.", 0) == 0) {
    c.model_params[key.substr(6)] = parse_real(v);
  } else if (key == "param") {
    const auto eq = v.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "param needs k=v");
    c.model_params[trim(v.substr(0, eq))] = parse_real(v.substr(eq + 1));
  } else if (key == "kind") {
    c.kind = parse_kind(v);
  } else if (key == "model") {
    c.model = v;
  } else if (key == "families" || key == "family") {
    c.families.clear();
    for (const auto& f : split(v, ',')) c.families.push_back(parse_family(f));
  } else if (key == "steps") {
    c.steps = parse_int_list(v);
  } else if (key == "hs" || key == "h") {
    c.hs = parse_real_list(v);
  } else if (key == "h_pow2") {
    c.hs.clear();
    for (int k : parse_int_list(v)) c.hs.push_back(std::ldexp(1.0, -k));
  } else if (key == "T") {
    c.T = parse_real(v);
  } else if (key == "x0") {
    c.x0 = parse_real_list(v);
  } else if (key == "profile") {
    c.profile = v;
  } else if (key == "seeds" || key == "seed") {
    c.seeds.clear();
    for (const auto& s : split(v, ',')) c.seeds.push_back(static_cast<std::uint64_t>(parse_integer(s)));
  } else if (key == "epochs") {
    c.epochs = parse_int(v);
  } else if (key == "width") {
    c.width = parse_int(v);
  } else if (key == "depth") {
    c.depth = parse_int(v);
  } else if (key == "record_every") {
    c.record_every = parse_int(v);
  } else if (key == "init") {
    c.init = v;
  } else if (key == "with_aux" || key == "aux") {
    c.with_aux = parse_bool(v);
  } else if (key == "compare_aux") {
    c.compare_aux = parse_bool(v);
  } else if (key == "solver") {
    c.solver = v;
  } else if (key == "tols" || key == "tol") {
    c.tols = parse_real_list(v);
  } else if (key == "restart") {
    c.restart = parse_int(v);
  } else if (key == "max_iter") {
    c.max_iter = parse_int(v);
  } else if (key == "path") {
    c.path = v;
  } else if (key == "region") {
    c.region = parse_bool(v);
  } else if (key == "n_trajectories") {
    c.n_trajectories = parse_int(v);
  } else if (key == "lattice") {
    c.lattice = parse_int(v);
  } else if (key == "Ns" || key == "N" || key == "scan") {
    c.Ns = parse_int_list(v);
  } else if (key == "widths" || key == "sweep_widths") {
    c.sweep_widths = parse_int_list(v);
  } else if (key == "depths" || key == "sweep_depths") {
    c.sweep_depths = parse_int_list(v);
  } else if (key == "epsilon") {
    c.epsilon = parse_real(v);
  } else if (key == "predict_T") {
    c.predict_T = parse_real(v);
  } else if (key == "deltas" || key == "delta") {
    c.deltas = parse_real_list(v);
  } else if (key == "div_threshold") {
    c.div_threshold = parse_real(v);
  } else if (key == "div_steps") {
    c.div_steps = parse_int(v);
  } else if (key == "rk4_steps_per_unit") {
    c.rk4_steps_per_unit = parse_int(v);
  } else if (key == "mc_samples") {
    c.mc_samples = parse_int(v);
  } else if (key == "mc_seed") {
    c.mc_seed = static_cast<std::uint64_t>(parse_integer(v));
  } else if (key == "quad_panels") {
    c.quad_panels = parse_int(v);
  } else if (key == "quad_nodes") {
    c.quad_nodes = parse_int(v);
  } else if (key == "fit_window") {
    const auto w = parse_int_list(v);
    if (w.size() != 2) throw Error(ErrorCode::ParseError, "fit_window needs lo,hi");
    c.fit_window = std::pair<int, int>{w[0], w[1]};
  } else if (key == "data" || key == "data_file") {
    c.data_file = v;
  } else if (key == "networks" || key == "networks_file") {
    c.networks_file = v;
  } else if (key == "out" || key == "out_dir") {
    c.out_dir = v;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown setting '" + raw_key + "'");
  }
}

void apply_config_file(ExperimentConfig& config, const fs::path& file) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(file.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      apply_setting(config, key, node.data());
      continue;
    }
    for (const auto& [sub, leaf] : node) {
      if (key == "params") {
        config.model_params[sub] = parse_real(leaf.data());
      } else {
        apply_setting(config, sub, leaf.data());
      }
    }
  }
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = kind_name(c.kind);
  j["model"] = c.model;
  j["model_params"] = c.model_params;
  std::vector<std::string> families;
  for (auto f : c.families) families.emplace_back(family_tag(f));
  j["families"] = families;
  j["steps"] = c.steps;
  j["hs"] = c.hs;
  j["T"] = c.T ? json(*c.T) : json(nullptr);
  j["x0"] = c.x0 ? json(*c.x0) : json(nullptr);
  j["profile"] = c.profile;
  j["seeds"] = c.seeds;
  j["epochs"] = c.epochs;
  j["width"] = c.width;
  j["depth"] = c.depth;
  j["record_every"] = c.record_every;
  j["init"] = c.init;
  j["with_aux"] = c.with_aux;
  j["compare_aux"] = c.compare_aux;
  j["solver"] = c.solver;
  j["tols"] = c.tols;
  j["restart"] = c.restart;
  j["max_iter"] = c.max_iter;
  j["path"] = c.path;
  j["region"] = c.region;
  j["n_trajectories"] = c.n_trajectories;
  j["lattice"] = c.lattice;
  j["Ns"] = c.Ns;
  j["sweep_widths"] = c.sweep_widths;
  j["sweep_depths"] = c.sweep_depths;
  j["epsilon"] = c.epsilon;
  j["predict_T"] = c.predict_T ? json(*c.predict_T) : json(nullptr);
  j["deltas"] = c.deltas;
  j["div_threshold"] = c.div_threshold;
  j["div_steps"] = c.div_steps;
  j["rk4_steps_per_unit"] = c.rk4_steps_per_unit;
  j["mc_samples"] = c.mc_samples;
  j["mc_seed"] = c.mc_seed;
  j["quad_panels"] = c.quad_panels;
  j["quad_nodes"] = c.quad_nodes;
  j["fit_window"] = c.fit_window ? json::array({c.fit_window->first, c.fit_window->second}) : json(nullptr);
  j["data_file"] = c.data_file;
  j["networks_file"] = c.networks_file;
  j["out_dir"] = c.out_dir.string();
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.kind = parse_kind(j.at("kind").get<std::string>());
    c.model = j.at("model").get<std::string>();
    c.model_params = j.at("model_params").get<ParamMap>();
    c.families.clear();
    for (const auto& f : j.at("families")) c.families.push_back(parse_family(f.get<std::string>()));
    c.steps = j.at("steps").get<std::vector<int>>();
    c.hs = j.at("hs").get<std::vector<double>>();
    if (!j.at("T").is_null()) c.T = j.at("T").get<double>();
    if (!j.at("x0").is_null()) c.x0 = j.at("x0").get<State>();
    c.profile = j.at("profile").get<std::string>();
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.epochs = j.at("epochs").get<int>();
    c.width = j.at("width").get<int>();
    c.depth = j.at("depth").get<int>();
    c.record_every = j.at("record_every").get<int>();
    c.init = j.at("init").get<std::string>();
    c.with_aux = j.at("with_aux").get<bool>();
    c.compare_aux = j.at("compare_aux").get<bool>();
    c.solver = j.at("solver").get<std::string>();
    c.tols = j.at("tols").get<std::vector<double>>();
    c.restart = j.at("restart").get<int>();
    c.max_iter = j.at("max_iter").get<int>();
    c.path = j.at("path").get<std::string>();
    c.region = j.at("region").get<bool>();
    c.n_trajectories = j.at("n_trajectories").get<int>();
    c.lattice = j.at("lattice").get<int>();
    c.Ns = j.at("Ns").get<std::vector<int>>();
    c.sweep_widths = j.at("sweep_widths").get<std::vector<int>>();
    c.sweep_depths = j.at("sweep_depths").get<std::vector<int>>();
    c.epsilon = j.at("epsilon").get<double>();
    if (!j.at("predict_T").is_null()) c.predict_T = j.at("predict_T").get<double>();
    c.deltas = j.at("deltas").get<std::vector<double>>();
    c.div_threshold = j.at("div_threshold").get<double>();
    c.div_steps = j.at("div_steps").get<int>();
    c.rk4_steps_per_unit = j.at("rk4_steps_per_unit").get<int>();
    c.mc_samples = j.at("mc_samples").get<int>();
    c.mc_seed = j.at("mc_seed").get<std::uint64_t>();
    c.quad_panels = j.at("quad_panels").get<int>();
    c.quad_nodes = j.at("quad_nodes").get<int>();
    if (!j.at("fit_window").is_null()) {
      c.fit_window = std::pair<int, int>{j.at("fit_window")[0].get<int>(), j.at("fit_window")[1].get<int>()};
    }
    c.data_file = j.at("data_file").get<std::string>();
    c.networks_file = j.at("networks_file").get<std::string>();
    c.out_dir = j.at("out_dir").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
}

fs::path resolve_out_dir(const ExperimentConfig& config) {
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* root = std::getenv("DYNDISC_OUT"); root && *root) return fs::path(root) / kind_name(config.kind);
  return fs::path("dyndisc_out") / kind_name(config.kind);
}

std::optional<double> divergence_time(const TrajectoryData& reference, const TrajectoryData& predicted,
                                      double threshold, int sustain) {
  if (reference.dim() != predicted.dim()) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
  if (sustain < 1) throw Error(ErrorCode::InvalidArgument, "sustain must be positive");
  const std::size_t d = reference.dim();
  std::vector<double> scale(d, 0.0);
  for (const auto& x : reference.states) {
    for (std::size_t j = 0; j < d; ++j) scale[j] = std::max(scale[j], std::abs(x[j]));
  }
  for (auto& s : scale) {
    if (s == 0.0) s = 1.0;
  }
  const int last = std::min(reference.N, predicted.N);
  int run = 0;
  for (int n = 0; n <= last; ++n) {
    bool exceeded = false;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = std::abs(predicted.states[n][j] - reference.states[n][j]) / scale[j];
      if (!(e <= threshold)) exceeded = true;
    }
    run = exceeded ? run + 1 : 0;
    if (run == sustain) return reference.time(n - sustain + 1);
  }
  return std::nullopt;
}

ConvergenceResult grid_converge(const ExperimentConfig& config) {
  config.validate();
  const Problem problem = problem_for(config);
  const auto schemes = config.schemes();
  const auto solver = solver_for(config);
  const int nh = static_cast<int>(config.hs.size());

  std::vector<TrajectoryData> data(nh);
  const auto data_failures = run_cells(nh, [&](int k) { data[k] = sample(problem, config.hs[k]); });

  ConvergenceResult result;
  result.cells.resize(schemes.size() * nh);
  const auto failures = run_cells(static_cast<int>(result.cells.size()), [&](int i) {
    const auto& scheme = schemes[i / nh];
    const int k = i % nh;
    auto& cell = result.cells[i];
    cell.scheme_id = scheme.id();
    cell.steps = scheme.steps;
    cell.h = config.hs[k];
    cell.solver = config.solver;
    cell.error = std::numeric_limits<double>::quiet_NaN();
    if (!data_failures[k].empty()) throw Error(ErrorCode::InvalidArgument, data_failures[k]);
    cell.N = data[k].N;
    const auto found = grid_discovery(scheme, data[k], solver);
    for (const auto& comp : found.components) {
      cell.iterations = std::max(cell.iterations, comp.iterations);
      cell.converged = cell.converged && comp.converged;
    }
    cell.error = grid_error(found, problem.model.field, data[k]);
    if (!std::isfinite(cell.error)) cell.status = "non-finite";
  });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) result.cells[i].status = csv_safe(failures[i]);
  }
  std::vector<std::string> labels;
  for (const auto& s : schemes) labels.push_back(s.id());
  result.fits = fit_by_label(result.cells, labels, [](const GridCell& c) { return c.scheme_id; }, config.fit_window);
  return result;
}

ConvergenceResult appendix_unstable(const ExperimentConfig& config) {
  config.validate();
  const Problem problem = problem_for(config);
  const auto scheme = config.schemes().front();
  std::vector<std::pair<std::string, SolverSpec>> settings{{"fs", SolverSpec::forward()}};
  for (double tol : config.tols) {
    settings.emplace_back("gmres(" + num(tol) + ")", SolverSpec::gmres_with(tol, config.restart, config.max_iter));
  }
  const int nh = static_cast<int>(config.hs.size());
  std::vector<TrajectoryData> data(nh);
  const auto data_failures = run_cells(nh, [&](int k) { data[k] = sample(problem, config.hs[k]); });

  ConvergenceResult result;
  result.cells.resize(settings.size() * nh);
  const auto failures = run_cells(static_cast<int>(result.cells.size()), [&](int i) {
    const auto& [label, solver] = settings[i / nh];
    const int k = i % nh;
    auto& cell = result.cells[i];
    cell.scheme_id = scheme.id();
    cell.steps = scheme.steps;
    cell.h = config.hs[k];
    cell.solver = label;
    cell.error = std::numeric_limits<double>::quiet_NaN();
    if (!data_failures[k].empty()) throw Error(ErrorCode::InvalidArgument, data_failures[k]);
    cell.N = data[k].N;
    const auto found = grid_discovery(scheme, data[k], solver);
    for (const auto& comp : found.components) {
      cell.iterations = std::max(cell.iterations, comp.iterations);
      cell.converged = cell.converged && comp.converged;
    }
    cell.error = stacked_relative(grid_error_sums(found, problem.model.field, data[k]));
    if (!std::isfinite(cell.error)) cell.status = "non-finite";
  });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) result.cells[i].status = csv_safe(failures[i]);
  }
  std::vector<std::string> labels;
  for (const auto& s : settings) labels.push_back(s.first);
  result.fits = fit_by_label(result.cells, labels, [](const GridCell& c) { return c.solver; }, config.fit_window);
  return result;
}

namespace {

RegionSpec region_for(const ExperimentConfig& config, const Problem& problem) {
  if (problem.model.name != "planar") throw Error(ErrorCode::InvalidArgument, "region experiments use the planar model");
  RegionSpec spec = planar_region();
  spec.n_trajectories = config.n_trajectories;
  if (config.T) spec.T = *config.T;
  spec.validate();
  return spec;
}

}  // namespace

ConvergenceResult region_grid_converge(const ExperimentConfig& config) {
  config.validate();
  const Problem problem = problem_for(config);
  const RegionSpec spec = region_for(config, problem);
  const auto schemes = config.schemes();
  const auto solver = solver_for(config);
  const int nh = static_cast<int>(config.hs.size());

  std::vector<MultiTrajectoryData> data(nh);
  std::vector<std::string> data_failures(nh);
  for (int k = 0; k < nh; ++k) {
    try {
      data[k] = region_dataset(problem.model, spec, steps_for(spec.T, config.hs[k]));
    } catch (const std::exception& e) {
      data_failures[k] = e.what();
    }
  }

  ConvergenceResult result;
  result.cells.resize(schemes.size() * nh);
  const auto failures = run_cells(static_cast<int>(result.cells.size()), [&](int i) {
    const auto& scheme = schemes[i / nh];
    const int k = i % nh;
    auto& cell = result.cells[i];
    cell.scheme_id = scheme.id();
    cell.steps = scheme.steps;
    cell.h = config.hs[k];
    cell.solver = config.solver;
    cell.error = std::numeric_limits<double>::quiet_NaN();
    if (!data_failures[k].empty()) throw Error(ErrorCode::InvalidArgument, data_failures[k]);
    cell.N = data[k].trajectories.front().N;
    ErrorSums sums(data[k].dim());
    for (const auto& traj : data[k].trajectories) {
      const auto found = grid_discovery(scheme, traj, solver);
      for (const auto& comp : found.components) {
        cell.iterations = std::max(cell.iterations, comp.iterations);
        cell.converged = cell.converged && comp.converged;
      }
      sums.merge(grid_error_sums(found, problem.model.field, traj));
    }
    cell.error = sums.combined();
    if (!std::isfinite(cell.error)) cell.status = "non-finite";
  });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) result.cells[i].status = csv_safe(failures[i]);
  }
  std::vector<std::string> labels;
  for (const auto& s : schemes) labels.push_back(s.id());
  result.fits = fit_by_label(result.cells, labels, [](const GridCell& c) { return c.scheme_id; }, config.fit_window);
  return result;
}

namespace {

struct NetJob {
  std::size_t scheme = 0;
  int h_index = 0;
  bool with_aux = true;
  std::uint64_t seed = 0;
  int width = 0;
  int depth = 0;
};

std::vector<NetCell> run_net_jobs(const ExperimentConfig& config, const std::vector<NetJob>& jobs) {
  const Problem problem = problem_for(config);
  const auto schemes = config.schemes();
  const int nh = static_cast<int>(config.hs.size());
  std::vector<TrajectoryData> data(nh);
  const auto data_failures = run_cells(nh, [&](int k) { data[k] = sample(problem, config.hs[k]); });
  const DenseTrajectory dense = integrate_adaptive(problem.model.field, problem.x0, problem.T);
  const QuadratureOptions quad{config.quad_panels, config.quad_nodes};

  std::vector<NetCell> cells(jobs.size());
  const auto failures = run_cells(static_cast<int>(jobs.size()), [&](int i) {
    const auto& job = jobs[i];
    const auto& scheme = schemes[job.scheme];
    auto& cell = cells[i];
    cell.scheme_id = scheme.id();
    cell.h = config.hs[job.h_index];
    cell.with_aux = job.with_aux;
    cell.seed = job.seed;
    cell.grid_error = cell.test_error = cell.final_loss = std::numeric_limits<double>::quiet_NaN();
    if (!data_failures[job.h_index].empty()) throw Error(ErrorCode::InvalidArgument, data_failures[job.h_index]);
    const auto& traj = data[job.h_index];
    cell.N = traj.N;
    ExperimentConfig local = config;
    if (job.width > 0) local.width = job.width;
    if (job.depth > 0) local.depth = job.depth;
    const TrainConfig tc = local.train_config(problem.model.dim, job.seed);
    cell.width = tc.architecture.widths.front();
    cell.depth = tc.architecture.depth();
    const auto result = train_discovery(traj, LossSpec::make(scheme, job.with_aux), tc);
    if (result.aborted) cell.status = csv_safe("aborted: " + result.abort_reason);
    cell.final_loss = 0.0;
    for (double l : result.final_loss) cell.final_loss += l;
    const auto field = result.field();
    cell.grid_error = grid_error(field, problem.model.field, traj, scheme);
    cell.test_error = test_error_trajectory(field, problem.model.field, dense, quad);
  });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) cells[i].status = csv_safe(failures[i]);
  }
  return cells;
}

}  // namespace

std::vector<NetCell> net_converge(const ExperimentConfig& config) {
  config.validate();
  const auto n_schemes = config.schemes().size();
  std::vector<bool> aux_flags{config.with_aux};
  if (config.compare_aux) aux_flags = {true, false};
  std::vector<NetJob> jobs;
  for (std::size_t s = 0; s < n_schemes; ++s) {
    for (int k = 0; k < static_cast<int>(config.hs.size()); ++k) {
      for (bool aux : aux_flags) {
        for (auto seed : config.seeds) jobs.push_back({s, k, aux, seed, 0, 0});
      }
    }
  }
  return run_net_jobs(config, jobs);
}

OptProbeResult opt_error_probe(const ExperimentConfig& config) {
  config.validate();
  const Problem problem = problem_for(config);
  if (problem.model.name != "trig") throw Error(ErrorCode::InvalidArgument, "the optimization-error probe uses the trig model");
  const auto scheme = config.schemes().front();
  const double h = config.hs.front();
  const std::uint64_t seed = config.seeds.front();
  const int d = problem.model.dim;
  const QuadratureOptions quad{config.quad_panels, config.quad_nodes};

  OptProbeResult out;
  out.scheme_id = scheme.id();
  out.h = h;

  // Stage 1: regression onto the true field at the trajectory samples.
  const TrajectoryData trig_data = sample(problem, h);
  std::vector<ResidualLoss> regression;
  for (int j = 0; j < d; ++j) {
    std::vector<double> targets;
    for (const auto& x : trig_data.states) targets.push_back(problem.model.field(x)[j]);
    regression.push_back(regression_loss(trig_data.states, targets));
  }
  const auto fitted = train_losses(regression, config.train_config(d, seed + 1000));
  if (fitted.aborted) throw Error(ErrorCode::NonFiniteGradient, "stage 1: " + fitted.abort_reason);
  out.regression_error = grid_error(fitted.field(), problem.model.field, trig_data, scheme);

  // Stage 2: data governed exactly by the fitted networks.
  const DynamicalModel governed = network_governed_model(fitted.nets);
  const AdaptiveOptions tight{1e-12, 1e-12};
  const DenseTrajectory governed_dense = integrate_adaptive(governed.field, problem.x0, problem.T, tight);
  const TrajectoryData governed_data = sample_equidistant(governed_dense, steps_for(problem.T, h));

  // Stage 3: discovery with the same architecture and budget on both data sets.
  const LossSpec spec = LossSpec::make(scheme, config.with_aux);
  const TrainConfig tc = config.train_config(d, seed);
  const auto self = train_discovery(governed_data, spec, tc);
  if (self.aborted) throw Error(ErrorCode::NonFiniteGradient, "stage 3: " + self.abort_reason);
  out.self_grid_error = grid_error(self.field(), governed.field, governed_data, scheme);
  out.self_test_error = test_error_trajectory(self.field(), governed.field, governed_dense, quad);

  const auto base = train_discovery(trig_data, spec, tc);
  if (base.aborted) throw Error(ErrorCode::NonFiniteGradient, "baseline: " + base.abort_reason);
  const DenseTrajectory trig_dense = integrate_adaptive(problem.model.field, problem.x0, problem.T);
  out.trig_grid_error = grid_error(base.field(), problem.model.field, trig_data, scheme);
  out.trig_test_error = test_error_trajectory(base.field(), problem.model.field, trig_dense, quad);
  return out;
}

namespace {

const std::vector<std::pair<std::string, std::string>> kGridColumns{
    {"scheme", "scheme id (family and step count)"},
    {"solver", "fs = forward substitution; gmres(tol) = restarted GMRES with relative residual tolerance"},
    {"h", "step size"},
    {"N", "number of steps T/h"},
    {"error", "relative l2 grid error of the solved grid function against the true field"},
    {"iterations", "largest GMRES iteration count over components (0 for fs)"},
    {"converged", "1 if every component solve met its tolerance"},
    {"status", "ok or the failure recorded for this cell"},
};

const std::vector<std::pair<std::string, std::string>> kFitColumns{
    {"label", "scheme id or solver setting"},
    {"slope", "least-squares slope of log10(error) against log10(h)"},
    {"intercept", "intercept of the same line"},
    {"r2", "coefficient of determination"},
    {"window", "half-open index range of the finite cells used"},
    {"points", "number of finite cells available"},
    {"ok", "1 if a fit was possible"},
};

struct Run {
  const ExperimentConfig& config;
  fs::path dir;
  RunOutcome outcome;
  json results = json::object();

  CsvFile csv(const std::string& name, const std::vector<std::pair<std::string, std::string>>& columns,
              std::vector<std::string> comments = {}) {
    comments.insert(comments.begin(), "dyndisc " + kind_name(config.kind) + " output");
    CsvFile file(dir / name, comments, columns);
    outcome.files.push_back(dir / name);
    return file;
  }
};

void write_convergence(Run& run, const ConvergenceResult& result, const std::string& stem) {
  auto cells = run.csv(stem + ".csv", kGridColumns);
  for (const auto& c : result.cells) {
    cells.row({c.scheme_id, c.solver, num(c.h), num(c.N), num(c.error), num(c.iterations), c.converged ? "1" : "0",
               c.status});
    if (c.status != "ok") ++run.outcome.failed_cells;
  }
  auto fits = run.csv(stem + "_fits.csv", kFitColumns);
  json summary = json::object();
  for (const auto& f : result.fits) {
    fits.row({f.label, num(f.fit.slope), num(f.fit.intercept), num(f.fit.r2), f.ok ? f.fit.window_label() : "",
              num(static_cast<int>(f.fit.points.size())), f.ok ? "1" : "0"});
    summary[f.label] = f.ok ? json(f.fit.slope) : json(nullptr);
  }
  run.results[stem + "_slopes"] = summary;
}

void write_net_cells(Run& run, const std::vector<NetCell>& cells, const std::string& name) {
  auto file = run.csv(name, {{"scheme", "scheme id"},
                             {"h", "step size"},
                             {"N", "number of steps"},
                             {"aux", "1 if auxiliary conditions were in the loss"},
                             {"seed", "base seed; component j uses seed + j"},
                             {"width", "hidden layer width"},
                             {"depth", "number of hidden layers"},
                             {"final_loss", "sum over components of the final training loss"},
                             {"e_train", "relative l2 grid error at the involved grid points"},
                             {"e_test", "relative l2 error along the continuous trajectory (speed-weighted quadrature)"},
                             {"status", "ok, aborted or the failure recorded for this cell"}});
  for (const auto& c : cells) {
    file.row({c.scheme_id, num(c.h), num(c.N), c.with_aux ? "1" : "0", num(c.seed), num(c.width), num(c.depth),
              num(c.final_loss), num(c.grid_error), num(c.test_error), c.status});
    if (c.status != "ok") ++run.outcome.failed_cells;
  }
}

std::string rational_text(const Rational& r) { return to_string(r); }

void run_coeffs(Run& run) {
  auto file = run.csv("coefficients.csv", {{"family", "ab, am or bdf"},
                                           {"M", "number of steps"},
                                           {"index", "m in x_{n-m}"},
                                           {"alpha", "exact alpha_m"},
                                           {"beta", "exact beta_m"},
                                           {"p", "order of the local truncation error"},
                                           {"alpha_decimal", "alpha_m as a double"},
                                           {"beta_decimal", "beta_m as a double"}});
  for (const auto& s : run.config.schemes()) {
    for (int m = 0; m <= s.steps; ++m) {
      file.row({std::string(family_tag(s.family)), num(s.steps), num(m), rational_text(s.alpha[m]),
                rational_text(s.beta[m]), num(s.order), num(to_double(s.alpha[m])), num(to_double(s.beta[m]))});
    }
  }
  auto fdm = run.csv("fdm_stencils.csv", {{"p", "order of the forward one-sided derivative stencil"},
                                          {"index", "k in x_{n+k}"},
                                          {"gamma", "exact weight (divide by h)"},
                                          {"gamma_decimal", "weight as a double"}});
  for (int p = 1; p <= kMaxFdmOrder; ++p) {
    const auto st = fdm_stencil(p);
    for (int k = 0; k <= p; ++k) fdm.row({num(p), num(k), rational_text(st.gamma[k]), num(to_double(st.gamma[k]))});
  }
}

void run_stability(Run& run) {
  const auto schemes = run.config.schemes();
  auto summary = run.csv("classification.csv", {{"family", "ab, am or bdf"},
                                                {"M", "number of steps"},
                                                {"degree", "degree of the characteristic polynomial"},
                                                {"max_modulus", "largest root modulus (0 without roots)"},
                                                {"classification", "stable, marginal or unstable"}});
  auto roots = run.csv("roots.csv", {{"family", "ab, am or bdf"},
                                     {"M", "number of steps"},
                                     {"root_re", "real part of a root"},
                                     {"root_im", "imaginary part of a root"},
                                     {"modulus", "root modulus"}});
  for (const auto& s : schemes) {
    const auto report = classify(s);
    const auto tag = std::string(family_tag(s.family));
    summary.row({tag, num(s.steps), num(static_cast<int>(report.roots.size())), num(report.max_modulus),
                 std::string(to_string(report.classification))});
    for (const auto& r : report.roots) roots.row({tag, num(s.steps), num(r.real()), num(r.imag()), num(std::abs(r))});
  }
  auto kappa = run.csv("kappa.csv", {{"family", "ab, am or bdf"},
                                     {"M", "number of steps"},
                                     {"N", "number of steps of the grid"},
                                     {"kappa2", "2-norm condition number of the augmented matrix (inf on overflow)"}});
  std::vector<std::vector<ConditionSample>> scans(schemes.size());
  const auto failures = run_cells(static_cast<int>(schemes.size()),
                                  [&](int i) { scans[i] = boundedness_scan(schemes[i], run.config.Ns); });
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    if (!failures[i].empty()) {
      ++run.outcome.failed_cells;
      continue;
    }
    for (const auto& c : scans[i]) {
      kappa.row({std::string(family_tag(schemes[i].family)), num(schemes[i].steps), num(c.N), num(c.kappa2)});
    }
  }
}

void run_gen_data(Run& run) {
  const auto& c = run.config;
  const Problem problem = problem_for(c);
  const std::vector<std::string> comments{"model " + problem.model.name + ", T = " + num(problem.T)};
  if (c.region) {
    const RegionSpec spec = region_for(c, problem);
    const int N = c.hs.empty() ? c.Ns.front() : steps_for(spec.T, c.hs.front());
    write_region_csv(run.dir / "region.csv", region_dataset(problem.model, spec, N), comments);
    run.outcome.files.push_back(run.dir / "region.csv");
    for (int i = 1; i <= spec.n_trajectories; ++i) {
      run.outcome.files.push_back(run.dir / ("region_" + std::to_string(i) + ".csv"));
    }
    return;
  }
  const int N = c.hs.empty() ? c.Ns.front() : steps_for(problem.T, c.hs.front());
  write_trajectory_csv(run.dir / "trajectory.csv", generate_trajectory(problem.model, N, problem.T, problem.x0),
                       comments);
  run.outcome.files.push_back(run.dir / "trajectory.csv");
}

TrajectoryData load_or_sample(const ExperimentConfig& c, const Problem& problem, double h) {
  if (!c.data_file.empty()) return read_trajectory_csv(c.data_file);
  return sample(problem, h);
}

void run_grid_discover(Run& run) {
  const auto& c = run.config;
  const Problem problem = problem_for(c);
  const auto scheme = c.schemes().front();
  const TrajectoryData data = load_or_sample(c, problem, c.hs.front());
  const auto found = grid_discovery(scheme, data, solver_for(c));
  auto file = run.csv("grid_discover.csv", {{"n", "grid index"},
                                            {"t_n", "time n*h"},
                                            {"component", "state component j (1-based)"},
                                            {"f_hat", "solved grid-function value"},
                                            {"f_true", "true field component at x_n"},
                                            {"abs_err", "|f_hat - f_true|"}},
                      {"scheme " + scheme.id() + ", h = " + num(data.h) + ", solver " + c.solver});
  const auto& idx = found.indices;
  for (int n = idx.first; n <= idx.last; ++n) {
    const State truth = problem.model.field(data.states[n]);
    for (std::size_t j = 0; j < found.components.size(); ++j) {
      const double v = found.components[j].values[n - idx.first];
      file.row({num(n), num(data.time(n)), num(static_cast<int>(j + 1)), num(v), num(truth[j]),
                num(std::abs(v - truth[j]))});
    }
  }
  run.results["grid_error"] = grid_error(found, problem.model.field, data);
}

void run_discover(Run& run) {
  const auto& c = run.config;
  const Problem problem = problem_for(c);
  const auto scheme = c.schemes().front();
  const TrajectoryData data = load_or_sample(c, problem, c.hs.front());
  const std::uint64_t seed = c.seeds.front();
  const TrainConfig tc = c.train_config(static_cast<int>(data.dim()), seed);
  const QuadratureOptions quad{c.quad_panels, c.quad_nodes};
  std::optional<DenseTrajectory> dense;
  if (c.data_file.empty()) dense = integrate_adaptive(problem.model.field, problem.x0, problem.T);

  TrainingMonitor monitor;
  monitor.grid_error = [&](const std::vector<FnnParams>& nets) {
    DiscoveryResult r;
    r.nets = nets;
    return grid_error(r.field(), problem.model.field, data, scheme);
  };
  if (dense) {
    monitor.test_error = [&](const std::vector<FnnParams>& nets) {
      DiscoveryResult r;
      r.nets = nets;
      return test_error_trajectory(r.field(), problem.model.field, *dense, quad);
    };
  }
  const auto result = train_discovery(data, LossSpec::make(scheme, c.with_aux), tc, monitor);

  json meta;
  meta["scheme"] = scheme.id();
  meta["h"] = data.h;
  meta["seed"] = seed;
  meta["component_seeds"] = "seed + component index";
  meta["epochs"] = tc.epochs;
  meta["init"] = c.init;
  meta["with_aux"] = c.with_aux;
  meta["config"] = config_to_json(c);
  save_networks(run.dir / "networks.json", result.nets, meta);

  auto history = run.csv("history.csv", {{"epoch", "Adam step index (the last row is after the final step)"},
                                         {"loss", "sum over components of the training loss"},
                                         {"e_train", "relative l2 grid error at the involved grid points"},
                                         {"e_test", "relative l2 error along the continuous trajectory (nan without truth)"}},
                         {"scheme " + scheme.id() + ", h = " + num(data.h) + ", seed " + num(seed)});
  for (const auto& h : result.history) history.row({num(h.epoch), num(h.loss), num(h.grid_error), num(h.test_error)});
  if (result.aborted) {
    ++run.outcome.failed_cells;
    run.results["aborted"] = result.abort_reason;
  }
  if (!result.history.empty()) {
    run.results["e_train"] = result.history.back().grid_error;
    run.results["e_test"] = result.history.back().test_error;
  }
}

void run_netsize(Run& run) {
  const auto& c = run.config;
  std::vector<NetJob> jobs;
  for (int w : c.sweep_widths) {
    for (int L : c.sweep_depths) {
      for (auto seed : c.seeds) jobs.push_back({0, 0, c.with_aux, seed, w, L});
    }
  }
  write_net_cells(run, run_net_jobs(c, jobs), "netsize.csv");
}

void run_opt_probe(Run& run) {
  const auto r = opt_error_probe(run.config);
  auto file = run.csv("opt_probe.csv", {{"stage", "regression, self (network-governed data) or trig (original data)"},
                                        {"scheme", "scheme id used for discovery and grid errors"},
                                        {"h", "step size"},
                                        {"e_train", "relative l2 grid error"},
                                        {"e_test", "relative l2 error along the continuous trajectory (nan for regression)"}});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  file.row({"regression", r.scheme_id, num(r.h), num(r.regression_error), num(nan)});
  file.row({"self", r.scheme_id, num(r.h), num(r.self_grid_error), num(r.self_test_error)});
  file.row({"trig", r.scheme_id, num(r.h), num(r.trig_grid_error), num(r.trig_test_error)});
  run.results["self_below_trig"] = r.self_grid_error < r.trig_grid_error;
}

void run_predict(Run& run) {
  const auto& c = run.config;
  const Problem problem = problem_for(c);
  const auto scheme = c.schemes().front();
  const int d = problem.model.dim;
  std::vector<FnnParams> nets;
  if (!c.networks_file.empty()) {
    nets = load_networks(c.networks_file);
  } else {
    State start = problem.x0;
    for (auto& v : start) v += c.epsilon;
    const auto data = generate_trajectory(problem.model, steps_for(problem.T, c.hs.front()), problem.T, start);
    const auto result = train_discovery(data, LossSpec::make(scheme, c.with_aux), c.train_config(d, c.seeds.front()));
    if (result.aborted) ++run.outcome.failed_cells;
    nets = result.nets;
    json meta{{"scheme", scheme.id()}, {"h", data.h}, {"seed", c.seeds.front()}, {"epsilon", c.epsilon}};
    save_networks(run.dir / "networks.json", nets, meta);
  }
  if (static_cast<int>(nets.size()) != d) throw Error(ErrorCode::InvalidArgument, "network count does not match the model");
  const auto discovered = network_governed_model(nets).field;
  const double horizon = c.predict_T.value_or(problem.T);
  const int steps = static_cast<int>(std::llround(horizon * c.rk4_steps_per_unit));
  const int stride = std::max(1, steps / 2000);

  auto summary = run.csv("divergence.csv", {{"delta", "perturbation added to every component of x0"},
                                            {"divergence_time", "first t with relative component error above the threshold for div_steps steps (nan if never)"},
                                            {"terminated_early", "1 if the discovered trajectory became non-finite"},
                                            {"end_time", "last time reached by the discovered trajectory"}},
                         {"threshold " + num(c.div_threshold) + ", sustained for " + num(c.div_steps) + " RK4 steps"});
  for (std::size_t k = 0; k < c.deltas.size(); ++k) {
    State start = problem.x0;
    for (auto& v : start) v += c.deltas[k];
    const auto pred = integrate_fixed_rk4_partial(discovered, start, horizon, steps);
    const auto truth = sample_equidistant(integrate_adaptive(problem.model.field, start, horizon), steps);
    TrajectoryData reached = pred.data;
    const auto t_div = divergence_time(truth, reached, c.div_threshold, c.div_steps);
    summary.row({num(c.deltas[k]), num(t_div.value_or(std::numeric_limits<double>::quiet_NaN())),
                 pred.terminated_early ? "1" : "0", num(reached.time(reached.N))});

    std::vector<std::pair<std::string, std::string>> cols{{"t", "time"}};
    for (int j = 1; j <= d; ++j) cols.emplace_back("x_" + std::to_string(j), "true state component (adaptive integration)");
    for (int j = 1; j <= d; ++j) cols.emplace_back("xhat_" + std::to_string(j), "discovered-field state component (RK4)");
    auto traj = run.csv("prediction_" + std::to_string(k + 1) + ".csv", cols,
                        {"delta = " + num(c.deltas[k]) + ", every " + std::to_string(stride) + "-th RK4 step"});
    for (int n = 0; n <= reached.N; n += stride) {
      std::vector<std::string> row{num(truth.time(n))};
      for (double v : truth.states[n]) row.push_back(num(v));
      for (double v : reached.states[n]) row.push_back(num(v));
      traj.row(row);
    }
  }
}

// Backward flow from y for time T; y is inside the region when the path meets Γ.
bool inside_region(const VectorField& field, const RegionSpec& spec, const State& y, int steps) {
  const double ax = spec.end[0] - spec.start[0];
  const double ay = spec.end[1] - spec.start[1];
  const double len2 = ax * ax + ay * ay;
  auto side = [&](const State& p) { return (p[0] - spec.start[0]) * ay - (p[1] - spec.start[1]) * ax; };
  auto param = [&](const State& p) { return ((p[0] - spec.start[0]) * ax + (p[1] - spec.start[1]) * ay) / len2; };
  const VectorField backward = [&](const State& x) {
    State f = field(x);
    for (auto& v : f) v = -v;
    return f;
  };
  State prev = y;
  double s_prev = side(prev);
  if (s_prev == 0.0) {
    const double u = param(prev);
    return u >= 0.0 && u <= 1.0;
  }
  const auto run = integrate_fixed_rk4_partial(backward, y, spec.T, steps);
  for (int n = 1; n <= run.data.N; ++n) {
    const State& cur = run.data.states[n];
    const double s_cur = side(cur);
    if (s_cur == 0.0 || (s_cur > 0.0) != (s_prev > 0.0)) {
      const double w = s_prev / (s_prev - s_cur);
      const State hit{prev[0] + w * (cur[0] - prev[0]), prev[1] + w * (cur[1] - prev[1])};
      const double u = param(hit);
      if (u >= 0.0 && u <= 1.0) return true;
    }
    prev = cur;
    s_prev = s_cur;
  }
  return false;
}

void run_region(Run& run) {
  const auto& c = run.config;
  if (c.path == "grid" || c.path == "both") write_convergence(run, region_grid_converge(c), "region_grid");
  if (c.path == "grid") return;

  const Problem problem = problem_for(c);
  const RegionSpec spec = region_for(c, problem);
  const auto schemes = c.schemes();
  const int nh = static_cast<int>(c.hs.size());
  std::vector<MultiTrajectoryData> data(nh);
  for (int k = 0; k < nh; ++k) data[k] = region_dataset(problem.model, spec, steps_for(spec.T, c.hs[k]));
  const RegionSampler sampler = region_sampler(problem.model, spec);

  struct Job {
    std::size_t scheme;
    int h_index;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    for (int k = 0; k < nh; ++k) {
      for (auto seed : c.seeds) jobs.push_back({s, k, seed});
    }
  }
  const int smallest = static_cast<int>(std::min_element(c.hs.begin(), c.hs.end()) - c.hs.begin());
  std::vector<NetCell> cells(jobs.size());
  std::vector<FnnParams> lattice_nets;
  const auto failures = run_cells(static_cast<int>(jobs.size()), [&](int i) {
    const auto& job = jobs[i];
    const auto& scheme = schemes[job.scheme];
    auto& cell = cells[i];
    cell.scheme_id = scheme.id();
    cell.h = c.hs[job.h_index];
    cell.N = data[job.h_index].trajectories.front().N;
    cell.with_aux = c.with_aux;
    cell.seed = job.seed;
    cell.grid_error = cell.test_error = cell.final_loss = std::numeric_limits<double>::quiet_NaN();
    const TrainConfig tc = c.train_config(problem.model.dim, job.seed);
    cell.width = tc.architecture.widths.front();
    cell.depth = tc.architecture.depth();
    const auto result = train_discovery(data[job.h_index], LossSpec::make(scheme, c.with_aux), tc);
    if (result.aborted) cell.status = csv_safe("aborted: " + result.abort_reason);
    cell.final_loss = 0.0;
    for (double l : result.final_loss) cell.final_loss += l;
    const auto field = result.field();
    cell.grid_error = grid_error(field, problem.model.field, data[job.h_index], scheme);
    cell.test_error = test_error_region(field, problem.model.field, sampler, c.mc_samples, c.mc_seed);
    if (job.scheme == 0 && job.h_index == smallest && job.seed == c.seeds.front()) lattice_nets = result.nets;
  });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) cells[i].status = csv_safe(failures[i]);
  }
  write_net_cells(run, cells, "region_net.csv");
  if (lattice_nets.empty() || problem.model.dim != 2) return;

  // Field profiles on a lattice over the bounding box of the data, clipped to the region.
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-lo[0], -lo[1]};
  for (const auto& traj : data[smallest].trajectories) {
    for (const auto& x : traj.states) {
      for (int j = 0; j < 2; ++j) {
        lo[j] = std::min(lo[j], x[j]);
        hi[j] = std::max(hi[j], x[j]);
      }
    }
  }
  const int L = c.lattice;
  std::vector<State> points;
  for (int a = 0; a < L; ++a) {
    for (int b = 0; b < L; ++b) {
      points.push_back({lo[0] + (hi[0] - lo[0]) * a / (L - 1), lo[1] + (hi[1] - lo[1]) * b / (L - 1)});
    }
  }
  std::vector<char> inside(points.size(), 0);
  const int backward_steps = std::max(200, 20 * steps_for(spec.T, c.hs[smallest]));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    inside[i] = inside_region(problem.model.field, spec, points[i], backward_steps) ? 1 : 0;
  }
  DiscoveryResult holder;
  holder.nets = lattice_nets;
  const auto field = holder.field();
  auto file = run.csv("region_lattice.csv",
                      {{"x_1", "lattice coordinate 1"},
                       {"x_2", "lattice coordinate 2"},
                       {"f_hat_1", "discovered field component 1"},
                       {"f_hat_2", "discovered field component 2"},
                       {"f_1", "true field component 1"},
                       {"f_2", "true field component 2"},
                       {"abs_err_1", "|f_hat_1 - f_1|"},
                       {"abs_err_2", "|f_hat_2 - f_2|"}},
                      {"scheme " + schemes.front().id() + ", h = " + num(c.hs[smallest]) +
                       ", lattice points inside the region only"});
  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!inside[i]) continue;
    const State fh = field(points[i]);
    const State f = problem.model.field(points[i]);
    const double e1 = std::abs(fh[0] - f[0]);
    const double e2 = std::abs(fh[1] - f[1]);
    worst = std::max({worst, e1, e2});
    file.row({num(points[i][0]), num(points[i][1]), num(fh[0]), num(fh[1]), num(f[0]), num(f[1]), num(e1), num(e2)});
  }
  run.results["lattice_max_abs_err"] = worst;
}

json scheme_json(const LmmScheme& s) {
  json j;
  j["id"] = s.id();
  j["order"] = s.order;
  std::vector<std::string> a, b;
  for (const auto& r : s.alpha) a.push_back(to_string(r));
  for (const auto& r : s.beta) b.push_back(to_string(r));
  j["alpha"] = a;
  j["beta"] = b;
  return j;
}

json toggles(const ExperimentConfig& c) {
  json t;
  t["init_range"] = c.init == "literal" ? "U(-sqrt(fan_in), sqrt(fan_in))" : "U(-1/sqrt(fan_in), 1/sqrt(fan_in))";
  t["relu_derivative_at_zero"] = 0;
  t["component_training"] = "one network per component, seed + component index, separate Adam loops";
  t["learning_rate"] = "10^(-2 - 2 n / epochs)";
  t["aux_placement"] = "initial one-sided stencil of order p";
  t["gmres"] = {{"restart", c.restart}, {"max_iter", c.max_iter == 0 ? json("10n") : json(c.max_iter)},
                {"initial_guess", "zero"}};
  t["quadrature"] = {{"rule", "composite Gauss-Legendre"}, {"panels", c.quad_panels}, {"nodes", c.quad_nodes}};
  t["monte_carlo_measure"] = "chart-uniform in (u, t) over [0,1] x [0,T]";
  t["monte_carlo"] = {{"samples", c.mc_samples}, {"seed", c.mc_seed}, {"block", kMonteCarloBlock}};
  t["epsilon_applies_to"] = "all components";
  t["divergence_rule"] = {{"threshold", c.div_threshold},
                          {"sustain_steps", c.div_steps},
                          {"normalization", "largest magnitude of the component on the reference"}};
  t["reference_integrator"] = {{"method", "Dormand-Prince 5(4)"}, {"reltol", 1e-13}, {"abstol", 1e-13}};
  t["region_sampler_tolerance"] = 1e-10;
  t["kernel_reduction"] = "fixed blocks of points, pairwise tree sum";
  return t;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  Run run{config, resolve_out_dir(config), {}, json::object()};
  fs::create_directories(run.dir);
  run.outcome.out_dir = run.dir;

  switch (config.kind) {
    case ExperimentKind::Coeffs:
      run_coeffs(run);
      break;
    case ExperimentKind::Stability:
      run_stability(run);
      break;
    case ExperimentKind::GenData:
      run_gen_data(run);
      break;
    case ExperimentKind::GridDiscover:
      run_grid_discover(run);
      break;
    case ExperimentKind::Discover:
      run_discover(run);
      break;
    case ExperimentKind::GridConverge:
      write_convergence(run, grid_converge(config), "grid_converge");
      break;
    case ExperimentKind::NetConverge:
      write_net_cells(run, net_converge(config), "net_converge.csv");
      break;
    case ExperimentKind::NetSizeSweep:
      run_netsize(run);
      break;
    case ExperimentKind::OptErrorProbe:
      run_opt_probe(run);
      break;
    case ExperimentKind::Predict:
      run_predict(run);
      break;
    case ExperimentKind::Region:
      run_region(run);
      break;
    case ExperimentKind::AppendixUnstable:
      write_convergence(run, appendix_unstable(config), "appendix_unstable");
      break;
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json manifest;
  manifest["tool"] = "dyndisc";
  manifest["version"] = DYNDISC_VERSION;
  manifest["kind"] = kind_name(config.kind);
  manifest["config"] = config_to_json(config);
  json schemes = json::array();
  for (const auto& s : config.schemes()) schemes.push_back(scheme_json(s));
  manifest["schemes"] = schemes;
  manifest["seeds"] = config.seeds;
  manifest["toggles"] = toggles(config);
  manifest["wall_time_seconds"] = seconds;
  std::vector<std::string> files;
  for (const auto& f : run.outcome.files) files.push_back(fs::relative(f, run.dir).string());
  manifest["outputs"] = files;
  manifest["failed_cells"] = run.outcome.failed_cells;
  manifest["results"] = run.results;
  run.outcome.manifest = run.dir / "manifest.json";
  std::ofstream out(run.outcome.manifest);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + run.outcome.manifest.string());
  out << manifest.dump(2) << '\n';
  return run.outcome;
}

RunOutcome rerun_from_manifest(const fs::path& manifest, const std::optional<fs::path>& out_dir) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + manifest.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (doc.value("tool", "") != "dyndisc") throw Error(ErrorCode::ParseError, "not a dyndisc manifest");
  ExperimentConfig config = config_from_json(doc.at("config"));
  config.out_dir = out_dir ? *out_dir : manifest.parent_path();
  return run_experiment(config);
}

}  // namespace dyndisc::experiments
