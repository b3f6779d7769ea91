#include "tslab/pipeline.hpp"

#include "tslab/error.hpp"

#include <cmath>
#include <map>
#include <optional>

namespace tslab {

std::uint64_t topology_seed(TopologyKind kind, int m, std::size_t index, std::uint64_t seed) {
    std::string tag = kind_name(kind);
    if (kind == TopologyKind::RemoveM) tag += std::to_string(m);
    return derive_seed(derive_seed(seed, tag), static_cast<std::uint64_t>(index));
}

std::vector<TopologyEntry> generate_topologies(const GridCase& base, TopologyKind kind, int m, std::size_t count,
                                               std::uint64_t seed) {
    std::vector<TopologyEntry> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t s = topology_seed(kind, m, i, seed);
        TopologySpec spec =
            kind == TopologyKind::Swap4 ? generate_swap_topology(base, s) : generate_removal_topology(base, m, s);
        GridCase grid = apply_topology(base, spec);
        out.push_back(TopologyEntry{std::move(spec), std::move(grid)});
    }
    return out;
}

const std::vector<GedfSample>& GeneratedData::samples(Variant v, double window) const {
    for (const auto& s : sets) {
        if (s.variant == v && std::abs(s.window - window) < 1e-12) return s.samples;
    }
    throw InvalidInput("no " + variant_name(v) + " samples for window " + std::to_string(window));
}

GeneratedData generate_data(const std::vector<TopologyEntry>& topologies, const CampaignPlan& plan,
                            const std::vector<double>& windows, std::uint64_t seed, unsigned workers) {
    for (double w : windows) {
        if (!is_supported_window(w)) throw InvalidParameter("unsupported window length " + std::to_string(w));
    }
    GeneratedData data;
    data.topologies = topologies;
    std::vector<NetworkMatrices> matrices;
    for (const auto& t : topologies) matrices.push_back(topology_matrices(t.grid));

    const auto items = plan_campaign(topologies, plan, seed);
    // One slot per planned item; each worker writes only its own slot.
    struct Slot {
        std::vector<GedfSample> samples;  ///< (window, variant) major order
    };
    std::vector<std::optional<Slot>> slots(items.size());
    data.summary = run_campaign(topologies, items, plan.schedule, workers,
                                [&](const CampaignItem& item, TrajectoryRecord&& rec) {
                                    Slot s;
                                    for (double w : windows) {
                                        s.samples.push_back(extract_window(rec, matrices[item.topology], w));
                                        s.samples.push_back(extract_raw(rec, w));
                                    }
                                    slots[item.index] = std::move(s);
                                });
    for (double w : windows) {
        data.sets.push_back(FeatureSet{Variant::Gedf, w, {}});
        data.sets.push_back(FeatureSet{Variant::Raw, w, {}});
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!slots[i]) continue;
        data.refs.push_back(SampleRef{items[i].scenario.topology_id, items[i].scenario.id});
        for (std::size_t k = 0; k < slots[i]->samples.size(); ++k) {
            data.sets[k].samples.push_back(std::move(slots[i]->samples[k]));
        }
    }
    return data;
}

std::vector<GedfSample> select_samples(const std::vector<GedfSample>& all, const std::vector<SampleRef>& refs) {
    std::map<SampleRef, const GedfSample*> index;
    for (const auto& s : all) index.emplace(SampleRef{s.topology_id, s.scenario_id}, &s);
    std::vector<GedfSample> out;
    out.reserve(refs.size());
    for (const auto& r : refs) {
        auto it = index.find(r);
        if (it == index.end()) throw InvalidInput("missing sample " + r.key());
        out.push_back(*it->second);
    }
    return out;
}

std::vector<SampleRef> sample_refs(const std::vector<GedfSample>& samples) {
    std::vector<SampleRef> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(SampleRef{s.topology_id, s.scenario_id});
    return out;
}

std::string method_name(Method m) { return m == Method::Scl ? "scl" : "sl"; }

Method parse_method(std::string_view s) {
    if (s == "scl") return Method::Scl;
    if (s == "sl") return Method::Sl;
    throw InvalidInput("unknown method '" + std::string(s) + "' (expected scl or sl)");
}

ExperimentOutcome run_experiment(const std::vector<GedfSample>& samples, const DatasetSplit& split, Method method,
                                 const learn::TrainConfig& cfg) {
    const auto train = select_samples(samples, split.train);
    const auto val = select_samples(samples, split.validation);
    ExperimentOutcome out;
    out.model = method == Method::Scl ? learn::train_scl(train, val, cfg) : learn::train_sl(train, val, cfg);
    const std::string variant = samples.empty() ? "" : variant_name(samples.front().variant);
    auto tag = [&](MetricsReport r, const char* name) {
        r.split = name;
        r.variant = variant;
        r.method = method_name(method);
        r.seed = cfg.seed;
        return r;
    };
    out.t1 = tag(learn::evaluate_model(out.model.encoder, out.model.classifier, select_samples(samples, split.t1)),
                 "T1");
    out.t2 = tag(learn::evaluate_model(out.model.encoder, out.model.classifier, select_samples(samples, split.t2)),
                 "T2");
    return out;
}

TransferOutcome run_transfer(const learn::EncoderParams& pretrained, const std::vector<GedfSample>& samples,
                             double fraction, const learn::TrainConfig& cfg, std::uint64_t subset_seed) {
    const auto [subset_refs, rest_refs] = stratified_fraction(sample_refs(samples), fraction, subset_seed);
    const auto subset = select_samples(samples, subset_refs);
    const auto rest = select_samples(samples, rest_refs);
    if (subset.empty()) throw InvalidInput("fine-tuning subset is empty");
    TransferOutcome out;
    out.subset = subset.size();
    out.evaluated = rest.size();
    const auto tuned = learn::finetune(pretrained, subset, cfg);
    out.finetuned = learn::evaluate_model(pretrained, tuned, rest);
    const auto random_encoder =
        learn::init_encoder(pretrained.rows, pretrained.cols, derive_seed(cfg.seed, "random_encoder"));
    const auto baseline = learn::finetune(random_encoder, subset, cfg);
    out.scratch = learn::evaluate_model(random_encoder, baseline, rest);
    for (MetricsReport* r : {&out.finetuned, &out.scratch}) {
        r->seed = cfg.seed;
        r->variant = samples.empty() ? "" : variant_name(samples.front().variant);
    }
    out.finetuned.method = "finetune";
    out.scratch.method = "random_encoder";
    return out;
}

}  // namespace tslab
