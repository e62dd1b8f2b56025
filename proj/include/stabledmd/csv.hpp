#pragma once

#include <filesystem>
#include <string>

#include "stabledmd/types.hpp"

namespace stabledmd {

// Trajectory CSV: header `t,flight,z1,...,zD,u1,...,ud`, rows sorted by
// (flight, t), '.' as decimal separator, ',' as field separator. Timestamps
// must advance by a uniform dt (relative tolerance 1e-6); anything else is
// rejected rather than resampled.

TrajectoryDataset read_trajectory_csv(const std::filesystem::path& path);

void write_trajectory_csv(const TrajectoryDataset& dataset, const std::filesystem::path& path);

/// Locale-independent shortest-exact formatting used across all text outputs.
std::string format_double(double value);

/// Locale-independent parse; throws ParseError on malformed input.
double parse_double(const std::string& token);

}  // namespace stabledmd
