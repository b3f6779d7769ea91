#include "tslab/cli/config.hpp"

#include "tslab/case39.hpp"
#include "tslab/case_io.hpp"
#include "tslab/error.hpp"
#include "tslab/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <thread>

namespace tslab::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw InvalidInput("config: unknown key '" + k + "' in " + where);
    }
}

bool is_library_case(const std::string& ref) {
    for (const auto& e : case_library()) {
        if (e.name == ref) return true;
    }
    return false;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!is_library_case(case_ref) && !std::filesystem::exists(base_dir / case_ref)) {
        throw InvalidInput("config: case '" + case_ref + "' is neither a library case nor an existing file");
    }
    if (output_root.empty()) throw InvalidInput("config: output_root is empty");
    if (topology_count == 0) throw InvalidInput("config: topology count must be positive");
    if (kind == TopologyKind::RemoveM && (m < 1 || m > 3)) throw InvalidInput("config: remove_m needs m in 1..3");
    if (load_draws < 1) throw InvalidInput("config: load_draws must be >= 1");
    if (branches_per_draw < 0) throw InvalidInput("config: branches_per_draw must be >= 0");
    if (!(load_low > 0.0 && load_low <= load_high && load_high <= 2.0)) {
        throw InvalidInput("config: load range must satisfy 0 < low <= high <= 2");
    }
    if (windows.empty()) throw InvalidInput("config: no window lengths");
    for (double w : windows) {
        if (!is_supported_window(w)) throw InvalidInput("config: window " + format_number(w) + " not supported");
        if (store_until < 0.2 + w) throw InvalidInput("config: store_until shorter than the longest window");
    }
    train.validate();
    if (transfer) {
        if (!(transfer->fraction > 0.0 && transfer->fraction <= 1.0)) throw InvalidInput("config: bad transfer fraction");
        for (int mm : transfer->removals) {
            if (mm < 1 || mm > 3) throw InvalidInput("config: transfer removals must be in 1..3");
        }
        if (transfer->count == 0 || transfer->load_draws < 1) throw InvalidInput("config: bad transfer sizes");
        if (!(transfer->load_low > 0.0 && transfer->load_low <= transfer->load_high && transfer->load_high <= 2.0)) {
            throw InvalidInput("config: bad transfer load range");
        }
    }
}

std::vector<DatasetGroup> ExperimentConfig::groups() const {
    std::vector<DatasetGroup> out;
    DatasetGroup main{"n1", kind, kind == TopologyKind::Swap4 ? 4 : m, topology_count, {}};
    main.plan.load_draws = load_draws;
    main.plan.branches_per_draw = branches_per_draw;
    main.plan.load_low = load_low;
    main.plan.load_high = load_high;
    out.push_back(main);
    if (transfer) {
        for (int mm : transfer->removals) {
            DatasetGroup g{"d" + std::to_string(mm), TopologyKind::RemoveM, mm, transfer->count, {}};
            g.plan.load_draws = transfer->load_draws;
            g.plan.branches_per_draw = transfer->branches_per_draw;
            g.plan.load_low = transfer->load_low;
            g.plan.load_high = transfer->load_high;
            out.push_back(g);
        }
    }
    return out;
}

unsigned ExperimentConfig::effective_workers() const {
    if (workers > 0) return workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string ExperimentConfig::canonical_json() const {
    ordered_json j;
    j["case"] = case_ref;
    j["seed"] = seed;
    j["topologies"] = {{"kind", kind_name(kind)}, {"m", m}, {"count", topology_count}};
    j["campaign"] = {{"load_draws", load_draws},
                     {"branches_per_draw", branches_per_draw},
                     {"load_low", load_low},
                     {"load_high", load_high},
                     {"store_until", store_until}};
    j["windows"] = windows;
    j["split"] = {{"train", split.train}, {"validation", split.validation}, {"t2_topologies", split.t2_topologies}};
    j["train"] = {{"temperature", train.temperature},   {"learning_rate", train.learning_rate},
                  {"batch_size", train.batch_size},     {"epochs", train.epochs},
                  {"classifier_epochs", train.classifier_epochs}, {"augment", train.augment},
                  {"select_best", train.select_best}};
    if (transfer) {
        j["transfer"] = {{"fraction", transfer->fraction},         {"removals", transfer->removals},
                         {"count", transfer->count},               {"load_draws", transfer->load_draws},
                         {"branches_per_draw", transfer->branches_per_draw}, {"load_low", transfer->load_low},
                         {"load_high", transfer->load_high}};
    }
    return j.dump(2) + "\n";
}

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_json())));
    return buf;
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    c.base_dir = base_dir;
    try {
        reject_unknown(j, {"case", "output_root", "seed", "workers", "topologies", "campaign", "windows", "split",
                           "train", "transfer"},
                       "top level");
        read(j, "case", c.case_ref);
        if (j.contains("output_root")) c.output_root = j.at("output_root").get<std::string>();
        read(j, "seed", c.seed);
        read(j, "workers", c.workers);
        if (j.contains("topologies")) {
            const json& t = j.at("topologies");
            reject_unknown(t, {"kind", "m", "count"}, "topologies");
            if (t.contains("kind")) c.kind = parse_kind(t.at("kind").get<std::string>());
            read(t, "m", c.m);
            read(t, "count", c.topology_count);
        }
        if (j.contains("campaign")) {
            const json& t = j.at("campaign");
            reject_unknown(t, {"load_draws", "branches_per_draw", "load_low", "load_high", "store_until"}, "campaign");
            read(t, "load_draws", c.load_draws);
            read(t, "branches_per_draw", c.branches_per_draw);
            read(t, "load_low", c.load_low);
            read(t, "load_high", c.load_high);
            read(t, "store_until", c.store_until);
        }
        read(j, "windows", c.windows);
        if (j.contains("split")) {
            const json& t = j.at("split");
            reject_unknown(t, {"train", "validation", "t2_topologies"}, "split");
            read(t, "train", c.split.train);
            read(t, "validation", c.split.validation);
            read(t, "t2_topologies", c.split.t2_topologies);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            reject_unknown(t, {"temperature", "learning_rate", "batch_size", "epochs", "classifier_epochs", "augment",
                               "select_best"},
                           "train");
            read(t, "temperature", c.train.temperature);
            read(t, "learning_rate", c.train.learning_rate);
            read(t, "batch_size", c.train.batch_size);
            read(t, "epochs", c.train.epochs);
            read(t, "classifier_epochs", c.train.classifier_epochs);
            read(t, "augment", c.train.augment);
            read(t, "select_best", c.train.select_best);
        }
        if (j.contains("transfer")) {
            const json& t = j.at("transfer");
            reject_unknown(t, {"fraction", "removals", "count", "load_draws", "branches_per_draw", "load_low", "load_high"},
                           "transfer");
            TransferSettings s;
            s.removals = {1, 2, 3};
            read(t, "fraction", s.fraction);
            read(t, "removals", s.removals);
            read(t, "count", s.count);
            read(t, "load_draws", s.load_draws);
            read(t, "branches_per_draw", s.branches_per_draw);
            read(t, "load_low", s.load_low);
            read(t, "load_high", s.load_high);
            c.transfer = s;
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_text_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.workers = *o.workers;
}

}  // namespace tslab::cli
