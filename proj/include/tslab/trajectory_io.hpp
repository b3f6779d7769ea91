#pragma once

#include "tslab/case_io.hpp"
#include "tslab/simulator.hpp"

#include <filesystem>
#include <limits>
#include <string>

namespace tslab {

/// One record per file: a [header] of key/value provenance lines, then the
/// [times], [bus_theta] and [rotor_delta] blocks (row = bus or generator,
/// column = sample) written with 12 significant digits. Samples after
/// `store_until` seconds are dropped; label and tsi always describe the full run.
std::string format_trajectory(const TrajectoryRecord& rec, const KeyValues& extra = {},
                              double store_until = std::numeric_limits<double>::infinity());
TrajectoryRecord parse_trajectory(std::string_view text, KeyValues* header = nullptr);

void write_trajectory(const std::filesystem::path& path, const TrajectoryRecord& rec, const KeyValues& extra = {},
                      double store_until = std::numeric_limits<double>::infinity());
TrajectoryRecord read_trajectory(const std::filesystem::path& path, KeyValues* header = nullptr);

}  // namespace tslab
