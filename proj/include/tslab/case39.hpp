#pragma once

#include "tslab/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tslab {

struct CaseEntry {
    std::string name;
    std::string file;  ///< relative to the data directory
    std::uint64_t checksum;  ///< FNV-1a 64 of the file bytes
};

/// Shipped base cases.
const std::vector<CaseEntry>& case_library();

/// Data directory: $TSLAB_DATA_DIR if set, else the configured source tree path.
std::filesystem::path data_dir();

/// Loads a named base case, verifying its checksum, validating its structure,
/// and requiring a converged power flow. Throws DataCorruption on a checksum
/// mismatch, InvalidInput for an unknown name.
GridCase load_case(std::string_view name);
GridCase load_case(std::string_view name, const std::filesystem::path& dir);

}  // namespace tslab
