#include "dyndisc/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dyndisc/error.hpp"

namespace dyndisc {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) throw Error(ErrorCode::ParseError, "bad number '" + text + "' " + where);
  return v;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryData& data,
                          const std::vector<std::string>& comments) {
  auto out = open_out(path);
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "# n: sample index; t: time n*h; x_j: state component j\n";
  out << "n,t";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",x_" << j + 1;
  out << '\n';
  for (int n = 0; n <= data.N; ++n) {
    out << n << ',' << format_double(data.time(n));
    for (double v : data.states[n]) out << ',' << format_double(v);
    out << '\n';
  }
}

TrajectoryData read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path.string());
  std::string line;
  bool header = false;
  std::vector<double> times;
  TrajectoryData data;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      header = true;
      if (cells.size() < 3 || cells[0] != "n" || cells[1] != "t") {
        throw Error(ErrorCode::ParseError, "expected header n,t,x_1,... in " + path.string());
      }
      continue;
    }
    const std::string where = "at " + path.string() + ":" + std::to_string(line_no);
    if (!data.states.empty() && cells.size() != data.dim() + 2) throw Error(ErrorCode::ParseError, "column count " + where);
    if (cells.size() < 3) throw Error(ErrorCode::ParseError, "column count " + where);
    const double n = parse_number(cells[0], where);
    if (n != static_cast<double>(data.states.size())) throw Error(ErrorCode::ParseError, "sample index " + where);
    times.push_back(parse_number(cells[1], where));
    State x;
    for (std::size_t c = 2; c < cells.size(); ++c) x.push_back(parse_number(cells[c], where));
    data.states.push_back(std::move(x));
  }
  if (data.states.size() < 2) throw Error(ErrorCode::ParseError, "need at least two samples in " + path.string());
  data.N = static_cast<int>(data.states.size()) - 1;
  const double T = times.back() - times.front();
  if (times.front() != 0.0 || !(T > 0.0)) throw Error(ErrorCode::ParseError, "times must start at 0 and increase");
  data.h = T / data.N;
  for (int n = 0; n <= data.N; ++n) {
    if (std::abs(times[n] - n * data.h) > 1e-9 * T) {
      throw Error(ErrorCode::ParseError, "samples are not equidistant at n=" + std::to_string(n));
    }
  }
  data.origin = DataOrigin::Synthetic;
  return data;
}

void write_region_csv(const std::filesystem::path& index_path, const MultiTrajectoryData& data,
                      const std::vector<std::string>& comments) {
  auto index = open_out(index_path);
  for (const auto& c : comments) index << "# " << c << '\n';
  index << "# trajectory: index n'; file: CSV path relative to this index\n";
  index << "trajectory,file\n";
  const auto stem = index_path.stem().string();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto name = stem + "_" + std::to_string(i + 1) + ".csv";
    write_trajectory_csv(index_path.parent_path() / name, data.trajectories[i], comments);
    index << i + 1 << ',' << name << '\n';
  }
}

MultiTrajectoryData read_region_csv(const std::filesystem::path& index_path) {
  std::ifstream in(index_path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + index_path.string());
  MultiTrajectoryData data;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "bad index row '" + line + "'");
    data.trajectories.push_back(read_trajectory_csv(index_path.parent_path() / line.substr(comma + 1)));
  }
  if (data.trajectories.empty()) throw Error(ErrorCode::ParseError, "empty region index");
  return data;
}

nlohmann::json params_to_json(const FnnParams& params) {
  return {{"input_dim", params.arch.input_dim}, {"widths", params.arch.widths}, {"values", params.values}};
}

FnnParams params_from_json(const nlohmann::json& j) {
  try {
    FnnArchitecture arch{j.at("input_dim").get<int>(), j.at("widths").get<std::vector<int>>()};
    FnnParams params(arch);
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != params.values.size()) throw Error(ErrorCode::ParseError, "parameter count mismatch");
    params.values = std::move(values);
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

void save_networks(const std::filesystem::path& path, const std::vector<FnnParams>& nets,
                   const nlohmann::json& metadata) {
  nlohmann::json doc;
  doc["format"] = "dyndisc-networks-1";
  doc["metadata"] = metadata;
  doc["networks"] = nlohmann::json::array();
  for (const auto& net : nets) doc["networks"].push_back(params_to_json(net));
  auto out = open_out(path);
  out << doc.dump(1) << '\n';
}

std::vector<FnnParams> load_networks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (doc.value("format", "") != "dyndisc-networks-1") throw Error(ErrorCode::ParseError, "unknown network format");
  std::vector<FnnParams> nets;
  for (const auto& j : doc.at("networks")) nets.push_back(params_from_json(j));
  return nets;
}

}  // namespace dyndisc
