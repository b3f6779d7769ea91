#pragma once

#include "tslab/features.hpp"
#include "tslab/learn/train.hpp"
#include "tslab/pipeline.hpp"
#include "tslab/simulator.hpp"
#include "tslab/topogen.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tslab::cli {

/// One group of topologies simulated and extracted together: the N-1 study
/// set ("n1") and the N-m-1 transfer sets ("d1".."d3").
struct DatasetGroup {
    std::string name;
    TopologyKind kind = TopologyKind::Swap4;
    int m = 4;
    std::size_t count = 0;
    CampaignPlan plan;
};

struct TransferSettings {
    double fraction = 0.2;
    std::vector<int> removals;  ///< m values, one D set each
    std::size_t count = 10;
    int load_draws = 1;
    int branches_per_draw = 0;
    double load_low = 0.5;
    double load_high = 1.5;
};

/// Parsed experiment configuration (JSON file).
struct ExperimentConfig {
    std::string case_ref = "ieee39";  ///< library name or path to a case file
    std::filesystem::path output_root = "runs/default";
    std::uint64_t seed = 1;
    unsigned workers = 0;  ///< 0 = available parallelism

    TopologyKind kind = TopologyKind::Swap4;
    int m = 4;
    std::size_t topology_count = 12;
    int load_draws = 2;
    int branches_per_draw = 0;
    double load_low = 0.8;
    double load_high = 1.2;
    double store_until = 0.5;  ///< seconds of trajectory kept on disk

    std::vector<double> windows{0.05};
    SplitFractions split;
    learn::TrainConfig train;
    std::optional<TransferSettings> transfer;

    /// Directory the config file was read from; relative case paths resolve against it.
    std::filesystem::path base_dir = ".";

    void validate() const;
    std::vector<DatasetGroup> groups() const;
    unsigned effective_workers() const;

    /// Every setting that affects an artifact, as JSON with a stable key order
    /// (output_root, workers and base_dir are left out). hash() is FNV-1a of it.
    std::string canonical_json() const;
    std::string hash() const;
};

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line overrides applied on top of the file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

}  // namespace tslab::cli
