#pragma once

// Trajectory CSV files and network parameter files.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dyndisc/fnn.hpp"
#include "dyndisc/trajectory.hpp"

namespace dyndisc {

/// Columns n, t, x_1..x_d; lines starting with '#' are comments.
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryData& data,
                          const std::vector<std::string>& comments = {});
/// Throws Error(ParseError) on malformed rows or non-equidistant times.
[[nodiscard]] TrajectoryData read_trajectory_csv(const std::filesystem::path& path);

/// Region data: one CSV per trajectory plus an index file listing them.
void write_region_csv(const std::filesystem::path& index_path, const MultiTrajectoryData& data,
                      const std::vector<std::string>& comments = {});
[[nodiscard]] MultiTrajectoryData read_region_csv(const std::filesystem::path& index_path);

[[nodiscard]] nlohmann::json params_to_json(const FnnParams& params);
[[nodiscard]] FnnParams params_from_json(const nlohmann::json& j);

/// Network file: {"format", "metadata", "networks": [...]}; doubles are
/// written in shortest round-trip form.
void save_networks(const std::filesystem::path& path, const std::vector<FnnParams>& nets,
                   const nlohmann::json& metadata);
[[nodiscard]] std::vector<FnnParams> load_networks(const std::filesystem::path& path);

/// Shortest decimal text that reads back to the same double.
[[nodiscard]] std::string format_double(double value);

}  // namespace dyndisc
