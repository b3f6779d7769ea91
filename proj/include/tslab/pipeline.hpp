#pragma once

#include "tslab/eval.hpp"
#include "tslab/features.hpp"
#include "tslab/learn/train.hpp"
#include "tslab/simulator.hpp"
#include "tslab/topogen.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tslab {

/// Seeds for each stage are derived from one master seed:
///   stage seed = derive_seed(master, "<stage>")
/// with the stage tags listed here.
namespace stage_tag {
inline constexpr const char* kTopologies = "topologies";
inline constexpr const char* kCampaign = "campaign";
inline constexpr const char* kSplit = "split";
inline constexpr const char* kTrain = "train";
inline constexpr const char* kFinetuneSubset = "finetune_subset";
inline constexpr const char* kFinetune = "finetune";
}  // namespace stage_tag

/// Topology i uses seed derive_seed(derive_seed(seed, "<kind>[m]"), i).
std::vector<TopologyEntry> generate_topologies(const GridCase& base, TopologyKind kind, int m, std::size_t count,
                                               std::uint64_t seed);

std::uint64_t topology_seed(TopologyKind kind, int m, std::size_t index, std::uint64_t seed);

/// Samples of one (variant, window) pair, in campaign order.
struct FeatureSet {
    Variant variant = Variant::Gedf;
    double window = 0.05;
    std::vector<GedfSample> samples;
};

/// Labeled samples of a simulated campaign; full trajectories are not kept.
struct GeneratedData {
    std::vector<TopologyEntry> topologies;
    CampaignSummary summary;
    std::vector<SampleRef> refs;  ///< successful scenarios, campaign order
    std::vector<FeatureSet> sets;

    const std::vector<GedfSample>& samples(Variant v, double window) const;
};

/// Simulates the planned sweep and extracts gedf and raw samples for every
/// window. Output order and contents do not depend on `workers`.
GeneratedData generate_data(const std::vector<TopologyEntry>& topologies, const CampaignPlan& plan,
                            const std::vector<double>& windows, std::uint64_t seed, unsigned workers);

/// Samples listed in `refs`, in that order. Throws InvalidInput on a missing reference.
std::vector<GedfSample> select_samples(const std::vector<GedfSample>& all, const std::vector<SampleRef>& refs);

std::vector<SampleRef> sample_refs(const std::vector<GedfSample>& samples);

enum class Method { Scl, Sl };
std::string method_name(Method m);
Method parse_method(std::string_view s);

struct ExperimentOutcome {
    learn::TrainedModel model;
    MetricsReport t1;
    MetricsReport t2;
};

/// Trains on split.train (model selection on split.validation) and reports T1 and T2.
ExperimentOutcome run_experiment(const std::vector<GedfSample>& samples, const DatasetSplit& split, Method method,
                                 const learn::TrainConfig& cfg);

struct TransferOutcome {
    MetricsReport finetuned;  ///< pretrained encoder, classifier fitted on the 20% subset
    MetricsReport scratch;    ///< random frozen encoder, same subset
    std::size_t subset = 0;
    std::size_t evaluated = 0;
};

/// Fits a fresh classifier on exactly floor(fraction * |samples|) samples
/// (stratified by topology) and evaluates on the rest, once on top of
/// `pretrained` and once on a randomly initialized encoder.
TransferOutcome run_transfer(const learn::EncoderParams& pretrained, const std::vector<GedfSample>& samples,
                             double fraction, const learn::TrainConfig& cfg, std::uint64_t subset_seed);

}  // namespace tslab
