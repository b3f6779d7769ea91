#include "tslab/case39.hpp"

#include "tslab/case_io.hpp"
#include "tslab/error.hpp"
#include "tslab/powerflow.hpp"
#include "tslab/rng.hpp"

#include <cstdio>
#include <cstdlib>

namespace tslab {

const std::vector<CaseEntry>& case_library() {
    static const std::vector<CaseEntry> lib = {
        {"ieee39", "ieee39.case", 0xecd54f064ad97df3ULL},
    };
    return lib;
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("TSLAB_DATA_DIR"); env && *env) return env;
    return TSLAB_DATA_DIR;
}

GridCase load_case(std::string_view name) { return load_case(name, data_dir()); }

GridCase load_case(std::string_view name, const std::filesystem::path& dir) {
    for (const CaseEntry& e : case_library()) {
        if (e.name != name) continue;
        const std::string text = read_text_file(dir / e.file);
        const std::uint64_t sum = fnv1a(text);
        if (sum != e.checksum) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "expected %016llx, got %016llx",
                          static_cast<unsigned long long>(e.checksum), static_cast<unsigned long long>(sum));
            throw DataCorruption("checksum mismatch for case '" + e.name + "': " + buf);
        }
        GridCase grid = parse_case(text).grid;
        grid.validate();
        const PowerFlowSolution pf = solve_power_flow(grid);
        if (!pf.converged) throw InvalidCase("base case '" + e.name + "' power flow does not converge");
        return grid;
    }
    throw InvalidInput("unknown case '" + std::string(name) + "'");
}

}  // namespace tslab
