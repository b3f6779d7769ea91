#pragma once

#include "tslab/case_io.hpp"
#include "tslab/grid.hpp"
#include "tslab/simulator.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tslab {

enum class Variant { Gedf, Raw };

std::string variant_name(Variant v);
Variant parse_variant(std::string_view s);

struct SampleWindow {
    double t_start = 0.0;  ///< time of the first column (s)
    double dt = 0.0;
    int columns = 0;
};

/// n x N feature matrix with its label and provenance; the unit of training data.
struct GedfSample {
    Eigen::MatrixXd matrix;
    int label = 0;
    std::string topology_id;
    std::string scenario_id;
    SampleWindow window;
    Variant variant = Variant::Gedf;
};

inline constexpr double kSampleStep = 0.005;

/// Window lengths with a trained model in the reference study.
bool is_supported_window(double window_length_s);

/// Laplacian data for a topology, weighted with the magnitudes of its
/// base-load power-flow solution.
NetworkMatrices topology_matrices(const GridCase& grid);

/// p = B diag(w) sin(B^T theta).
Eigen::VectorXd active_power(const NetworkMatrices& nm, const Eigen::VectorXd& theta);

/// Delta = A^dagger p.
Eigen::VectorXd gedf_vector(const NetworkMatrices& nm, const Eigen::VectorXd& p);

/// Divides by the largest absolute entry; an all-zero matrix is left as is.
void normalize_max_abs(Eigen::MatrixXd& m);

/// Column indices of the N samples strictly after the clearing time.
std::vector<Eigen::Index> window_columns(const TrajectoryRecord& rec, double window_length_s);

/// GEDF window: one Delta_t column per sample after clearing, normalized.
GedfSample extract_window(const TrajectoryRecord& rec, const NetworkMatrices& nm, double window_length_s);

/// Same window over the raw bus angles.
GedfSample extract_raw(const TrajectoryRecord& rec, double window_length_s);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SampleRef {
    std::string topology_id;
    std::string scenario_id;

    std::string key() const { return topology_id + "/" + scenario_id; }
    auto operator<=>(const SampleRef&) const = default;
};

struct SplitFractions {
    double train = 0.7;
    double validation = 0.1;
    std::size_t t2_topologies = 1;
};

struct DatasetSplit {
    std::vector<SampleRef> train, validation, t1, t2;
    std::map<std::string, std::string> topology_role;  ///< "train" or "t2"
};

/// Reserves `t2_topologies` whole topologies for T2; the remaining scenarios
/// are shuffled into train / validation (fractions of that pool) and T1.
DatasetSplit make_splits(const std::vector<SampleRef>& samples, const SplitFractions& fractions,
                         std::uint64_t seed);

/// Per-topology stratified draw of exactly floor(fraction * total) samples
/// (largest-remainder allocation across topologies). Returns (selected, rest).
std::pair<std::vector<SampleRef>, std::vector<SampleRef>> stratified_fraction(const std::vector<SampleRef>& samples,
                                                                              double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

/// samples/<variant>/<topology_id>/<scenario_id>.rec
std::filesystem::path sample_path(Variant v, const SampleRef& ref);

std::string format_sample(const GedfSample& s, const KeyValues& extra = {});
GedfSample parse_sample(std::string_view text);
void write_sample(const std::filesystem::path& path, const GedfSample& s, const KeyValues& extra = {});
GedfSample read_sample(const std::filesystem::path& path);

/// Plain-text manifest: one sample path per line, [train] / [validation] /
/// [t1] / [t2] sections, and a [topologies] section with the partition map.
std::string format_manifest(const DatasetSplit& split, Variant v);
DatasetSplit parse_manifest(std::string_view text);

}  // namespace tslab
