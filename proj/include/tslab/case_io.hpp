#pragma once

#include "tslab/grid.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tslab {

/// Ordered key/value lines, used for [meta]-like and [provenance] sections.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// A GridCase as stored on disk, with an optional provenance section.
struct CaseDocument {
    GridCase grid;
    KeyValues provenance;
};

/// Canonical text form. Numbers are written with %.15g, so any file produced
/// here (or hand-written with at most 15 significant digits) round-trips
/// byte-for-byte through parse_case/format_case.
std::string format_case(const CaseDocument& doc);
inline std::string format_case(const GridCase& grid) { return format_case(CaseDocument{grid, {}}); }

CaseDocument parse_case(std::string_view text);

CaseDocument read_case_file(const std::filesystem::path& path);
void write_case_file(const std::filesystem::path& path, const CaseDocument& doc);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal with at most 15 significant digits ("%.15g").
std::string format_number(double v);
/// 12 significant digits, scientific; used for dense numeric blocks.
std::string format_sci12(double v);

double parse_double(std::string_view token);
long long parse_int(std::string_view token);
std::vector<std::string_view> split_ws(std::string_view line);

const std::string* find_value(const KeyValues& kv, std::string_view key);

}  // namespace tslab
