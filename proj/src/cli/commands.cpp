#include "tslab/cli/commands.hpp"

#include "tslab/case39.hpp"
#include "tslab/error.hpp"
#include "tslab/eval.hpp"
#include "tslab/learn/checkpoint.hpp"
#include "tslab/trajectory_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace tslab::cli {

namespace fs = std::filesystem;

std::string window_tag(double window) { return "w" + format_number(window); }

fs::path Layout::topology_dir(const std::string& group) const { return root / "topologies" / group; }
fs::path Layout::record_dir(const std::string& group) const { return root / "records" / group; }
fs::path Layout::dataset_dir(const std::string& group, double window) const {
    return root / "datasets" / group / window_tag(window);
}
fs::path Layout::manifest(const std::string& group, double window, Variant v) const {
    return dataset_dir(group, window) / ("manifest_" + variant_name(v) + ".txt");
}
fs::path Layout::model_dir(Variant v, Method m, double window) const {
    return root / "models" / (variant_name(v) + "_" + method_name(m) + "_" + window_tag(window));
}
fs::path Layout::report_dir() const { return root / "reports"; }

KeyValues provenance(const ExperimentConfig& cfg, const std::string& stage, std::uint64_t stage_seed) {
    return {{"config_hash", cfg.hash()},
            {"master_seed", std::to_string(cfg.seed)},
            {"stage", stage},
            {"stage_seed", std::to_string(stage_seed)}};
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const GenerationExhausted& e) {
        err << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const TrainingDiverged& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

namespace {

Layout layout(const ExperimentConfig& cfg) { return Layout{cfg.output_root}; }

GridCase base_case(const ExperimentConfig& cfg) {
    for (const auto& e : case_library()) {
        if (e.name == cfg.case_ref) return load_case(e.name);
    }
    GridCase g = read_case_file(cfg.base_dir / cfg.case_ref).grid;
    g.validate();
    return g;
}

std::vector<double> selected_windows(const ExperimentConfig& cfg, const Selection& sel) {
    if (!sel.window) return cfg.windows;
    for (double w : cfg.windows) {
        if (std::abs(w - *sel.window) < 1e-12) return {w};
    }
    throw InvalidInput("window " + format_number(*sel.window) + " is not listed in the config");
}

std::string kv_block(const KeyValues& kv) {
    std::string s;
    for (const auto& [k, v] : kv) s += k + " " + v + "\n";
    return s;
}

/// Sections "[name]" followed by one token per line; "# ..." lines are comments.
std::map<std::string, std::vector<std::string>> read_sections(const fs::path& path) {
    std::map<std::string, std::vector<std::string>> out;
    std::istringstream is(read_text_file(path));
    std::string line, section;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            out[section];
            continue;
        }
        out[section].push_back(line);
    }
    return out;
}

void write_topology_manifest(const fs::path& path, const KeyValues& prov, const std::vector<std::string>& ids) {
    std::string s = "# tslab topology manifest\n[provenance]\n" + kv_block(prov) + "[topologies]\n";
    for (const auto& id : ids) s += id + "\n";
    write_text_file(path, s);
}

std::vector<TopologyEntry> read_topologies(const Layout& lay, const std::string& group) {
    const fs::path dir = lay.topology_dir(group);
    const fs::path manifest = dir / "manifest.txt";
    if (!fs::exists(manifest)) throw InvalidInput("missing " + manifest.string() + " (run gen-topologies first)");
    std::vector<TopologyEntry> out;
    auto sections = read_sections(manifest);
    for (const auto& id : sections["topologies"]) {
        const CaseDocument doc = read_case_file(dir / (id + ".case"));
        out.push_back(TopologyEntry{topology_from_document(doc), doc.grid});
    }
    return out;
}

template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next.fetch_add(1); k < n; k = next.fetch_add(1)) fn(k);
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        work();
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
}

std::vector<GedfSample> load_samples(const fs::path& dataset_dir, Variant v, const std::vector<SampleRef>& refs) {
    std::vector<GedfSample> out;
    out.reserve(refs.size());
    for (const auto& r : refs) out.push_back(read_sample(dataset_dir / sample_path(v, r)));
    return out;
}

std::string report_json(const KeyValues& prov, const std::vector<MetricsReport>& reports) {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : prov) j["provenance"][k] = v;
    j["metrics"] = nlohmann::ordered_json::parse(metrics_to_json(reports));
    return j.dump(2) + "\n";
}

std::vector<MetricsReport> read_report_json(const fs::path& path) {
    const auto j = nlohmann::json::parse(read_text_file(path));
    return metrics_from_json(j.at("metrics").dump());
}

Selection resolve(const ExperimentConfig& cfg, const Selection& sel) {
    Selection s = sel;
    if (!s.window) s.window = cfg.windows.front();
    if (!s.variant) s.variant = Variant::Gedf;
    if (!s.method) s.method = Method::Scl;
    selected_windows(cfg, s);
    return s;
}

void check_provenance(const KeyValues& meta, const ExperimentConfig& cfg, const fs::path& path) {
    const std::string* h = find_value(meta, "config_hash");
    if (!h || *h != cfg.hash()) {
        throw InvalidInput(path.string() + " was produced by a different configuration (config_hash " +
                           (h ? *h : std::string("missing")) + ", current " + cfg.hash() + ")");
    }
}

}  // namespace

int cmd_gen_topologies(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    cfg.validate();
    const Layout lay = layout(cfg);
    const GridCase base = base_case(cfg);
    const std::uint64_t stage_seed = derive_seed(cfg.seed, stage_tag::kTopologies);
    int status = kExitOk;
    for (const DatasetGroup& g : cfg.groups()) {
        std::vector<std::string> ids;
        std::vector<std::string> failures;
        for (std::size_t i = 0; i < g.count; ++i) {
            const std::uint64_t s = topology_seed(g.kind, g.m, i, stage_seed);
            try {
                const TopologySpec spec = g.kind == TopologyKind::Swap4 ? generate_swap_topology(base, s)
                                                                        : generate_removal_topology(base, g.m, s);
                CaseDocument doc = topology_document(base, spec);
                for (auto& kv : provenance(cfg, "gen-topologies", stage_seed)) doc.provenance.push_back(kv);
                write_case_file(lay.topology_dir(g.name) / (spec.id + ".case"), doc);
                ids.push_back(spec.id);
            } catch (const GenerationExhausted& e) {
                failures.push_back("seed " + std::to_string(s) + ": " + e.what());
            }
        }
        auto prov = provenance(cfg, "gen-topologies", stage_seed);
        prov.emplace_back("group", g.name);
        prov.emplace_back("kind", kind_name(g.kind));
        prov.emplace_back("m", std::to_string(g.m));
        write_topology_manifest(lay.topology_dir(g.name) / "manifest.txt", prov, ids);
        out << g.name << ": " << ids.size() << " topologies (" << kind_name(g.kind) << ", m=" << g.m << ")\n";
        for (const auto& f : failures) err << g.name << ": " << f << '\n';
        if (!failures.empty()) status = kExitInfeasible;
    }
    return status;
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    cfg.validate();
    const Layout lay = layout(cfg);
    const std::uint64_t stage_seed = derive_seed(cfg.seed, stage_tag::kCampaign);
    int status = kExitOk;
    for (const DatasetGroup& g : cfg.groups()) {
        const auto topologies = read_topologies(lay, g.name);
        const std::uint64_t group_seed = derive_seed(stage_seed, g.name);
        const auto items = plan_campaign(topologies, g.plan, group_seed);
        const fs::path dir = lay.record_dir(g.name);
        auto prov = provenance(cfg, "simulate", group_seed);
        prov.emplace_back("group", g.name);
        std::vector<char> ok(items.size(), 0);
        const CampaignSummary sum = run_campaign(topologies, items, g.plan.schedule, cfg.effective_workers(),
                                                 [&](const CampaignItem& item, TrajectoryRecord&& rec) {
                                                     write_trajectory(dir / item.scenario.topology_id /
                                                                          (item.scenario.id + ".traj"),
                                                                      rec, prov, cfg.store_until);
                                                     ok[item.index] = 1;
                                                 });
        std::ostringstream s;
        s << "# tslab campaign summary\n[provenance]\n" << kv_block(prov);
        s << "[summary]\nplanned " << sum.planned << "\nsucceeded " << sum.succeeded << "\nfailed " << sum.failed
          << "\nstable " << sum.stable << "\nunstable " << sum.unstable << "\nclass_ratio "
          << (sum.unstable ? format_number(static_cast<double>(sum.stable) / static_cast<double>(sum.unstable))
                           : std::string("inf"))
          << "\n[failures]\n";
        for (const auto& f : sum.failures) s << f << '\n';
        s << "[records]\n";
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (ok[i]) s << items[i].scenario.topology_id << '/' << items[i].scenario.id << '\n';
        }
        write_text_file(dir / "campaign.txt", s.str());
        out << g.name << ": " << sum.succeeded << "/" << sum.planned << " simulated, stable " << sum.stable
            << ", unstable " << sum.unstable << '\n';
        for (const auto& f : sum.failures) err << g.name << ": " << f << '\n';
        if (sum.planned > 0 && 20 * sum.succeeded < 19 * sum.planned) {
            err << g.name << ": fewer than 95% of scenarios succeeded\n";
            status = kExitNumerical;
        }
    }
    return status;
}

int cmd_extract(const ExperimentConfig& cfg, const Selection& sel, std::ostream& out, std::ostream& err) {
    cfg.validate();
    const Layout lay = layout(cfg);
    const auto windows = selected_windows(cfg, sel);
    std::vector<Variant> variants = {Variant::Gedf, Variant::Raw};
    if (sel.variant) variants = {*sel.variant};
    const std::uint64_t split_seed = derive_seed(cfg.seed, stage_tag::kSplit);
    const std::uint64_t subset_seed = derive_seed(cfg.seed, stage_tag::kFinetuneSubset);

    for (const DatasetGroup& g : cfg.groups()) {
        const auto topologies = read_topologies(lay, g.name);
        std::map<std::string, NetworkMatrices> matrices;
        for (const auto& t : topologies) matrices.emplace(t.spec.id, topology_matrices(t.grid));
        const fs::path rec_dir = lay.record_dir(g.name);
        if (!fs::exists(rec_dir / "campaign.txt")) {
            throw InvalidInput("missing " + (rec_dir / "campaign.txt").string() + " (run simulate first)");
        }
        std::vector<SampleRef> refs;
        std::vector<std::string> gaps;
        auto sections = read_sections(rec_dir / "campaign.txt");
        for (const auto& line : sections["records"]) {
            const auto slash = line.find('/');
            SampleRef r{line.substr(0, slash), line.substr(slash + 1)};
            if (!fs::exists(rec_dir / r.topology_id / (r.scenario_id + ".traj"))) gaps.push_back(line);
            refs.push_back(std::move(r));
        }
        if (!gaps.empty()) {
            err << g.name << ": " << gaps.size() << " trajectory files missing:\n";
            for (const auto& gp : gaps) err << "  " << gp << '\n';
            return kExitUsage;
        }

        std::mutex mu;
        std::vector<std::string> errors;
        parallel_for(refs.size(), cfg.effective_workers(), [&](std::size_t k) {
            try {
                const SampleRef& r = refs[k];
                KeyValues header;
                const TrajectoryRecord rec = read_trajectory(rec_dir / r.topology_id / (r.scenario_id + ".traj"), &header);
                for (double w : windows) {
                    for (Variant v : variants) {
                        GedfSample s = v == Variant::Gedf ? extract_window(rec, matrices.at(r.topology_id), w)
                                                          : extract_raw(rec, w);
                        write_sample(lay.dataset_dir(g.name, w) / sample_path(v, r), s,
                                     provenance(cfg, "extract", split_seed));
                    }
                }
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                errors.push_back(refs[k].key() + ": " + e.what());
            }
        });
        if (!errors.empty()) {
            std::sort(errors.begin(), errors.end());
            for (const auto& e : errors) err << g.name << ": " << e << '\n';
            return kExitUsage;
        }

        DatasetSplit split;
        if (g.name == "n1") {
            split = make_splits(refs, cfg.split, split_seed);
        } else {
            // Transfer sets: [train] holds the fine-tuning subset, [t1] the evaluation rest.
            auto [subset, rest] = stratified_fraction(refs, cfg.transfer->fraction, derive_seed(subset_seed, g.name));
            split.train = std::move(subset);
            split.t1 = std::move(rest);
            for (const auto& t : topologies) split.topology_role[t.spec.id] = "train";
        }
        for (double w : windows) {
            for (Variant v : variants) {
                std::string text = "# provenance " + cfg.hash() + " seed " + std::to_string(cfg.seed) + " stage extract\n";
                text += format_manifest(split, v);
                write_text_file(lay.manifest(g.name, w, v), text);
            }
        }
        out << g.name << ": " << refs.size() << " samples x " << windows.size() << " window(s) x " << variants.size()
            << " variant(s); train " << split.train.size() << ", validation " << split.validation.size() << ", t1 "
            << split.t1.size() << ", t2 " << split.t2.size() << '\n';
    }
    return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, const Selection& sel0, std::ostream& out, std::ostream&) {
    cfg.validate();
    const Selection sel = resolve(cfg, sel0);
    const Layout lay = layout(cfg);
    const double w = *sel.window;
    const fs::path manifest = lay.manifest("n1", w, *sel.variant);
    if (!fs::exists(manifest)) throw InvalidInput("missing " + manifest.string() + " (run extract first)");
    const DatasetSplit split = parse_manifest(read_text_file(manifest));
    const fs::path ds = lay.dataset_dir("n1", w);
    const auto train = load_samples(ds, *sel.variant, split.train);
    const auto val = load_samples(ds, *sel.variant, split.validation);

    learn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, stage_tag::kTrain);
    const learn::TrainedModel model =
        *sel.method == Method::Scl ? learn::train_scl(train, val, tc) : learn::train_sl(train, val, tc);

    learn::Checkpoint ck{model.encoder, model.classifier, tc, provenance(cfg, "train", tc.seed)};
    ck.provenance.emplace_back("variant", variant_name(*sel.variant));
    ck.provenance.emplace_back("method", method_name(*sel.method));
    ck.provenance.emplace_back("window", format_number(w));
    const fs::path dir = lay.model_dir(*sel.variant, *sel.method, w);
    learn::write_checkpoint(dir / "checkpoint.bin", ck);
    write_text_file(dir / "history.txt", "# provenance " + cfg.hash() + " seed " + std::to_string(tc.seed) +
                                             " stage train\n" + model.history.format());
    out << "trained " << dir.filename().string() << " on " << train.size() << " samples ("
        << model.history.epochs.size() << " epochs logged)\n";
    return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const Selection& sel0, std::ostream& out, std::ostream&) {
    cfg.validate();
    const Selection sel = resolve(cfg, sel0);
    const Layout lay = layout(cfg);
    const double w = *sel.window;
    const fs::path ckpath = lay.model_dir(*sel.variant, *sel.method, w) / "checkpoint.bin";
    if (!fs::exists(ckpath)) throw InvalidInput("missing " + ckpath.string() + " (run train first)");
    const learn::Checkpoint ck = learn::read_checkpoint(ckpath);
    check_provenance(ck.provenance, cfg, ckpath);

    const DatasetSplit split = parse_manifest(read_text_file(lay.manifest("n1", w, *sel.variant)));
    const fs::path ds = lay.dataset_dir("n1", w);
    std::vector<MetricsReport> reports;
    for (const auto& [name, refs] : {std::pair{"T1", &split.t1}, std::pair{"T2", &split.t2}}) {
        MetricsReport r = learn::evaluate_model(ck.encoder, ck.classifier, load_samples(ds, *sel.variant, *refs));
        r.split = name;
        r.variant = variant_name(*sel.variant);
        r.method = method_name(*sel.method);
        r.seed = cfg.seed;
        reports.push_back(r);
    }
    auto prov = provenance(cfg, "eval", ck.config.seed);
    prov.emplace_back("window", format_number(w));
    const fs::path path = lay.report_dir() / (lay.model_dir(*sel.variant, *sel.method, w).filename().string() + ".json");
    write_text_file(path, report_json(prov, reports));
    out << format_metrics_table(reports);
    return kExitOk;
}

int cmd_finetune(const ExperimentConfig& cfg, const Selection& sel0, std::ostream& out, std::ostream&) {
    cfg.validate();
    if (!cfg.transfer) throw InvalidInput("config has no transfer section");
    const Selection sel = resolve(cfg, sel0);
    const Layout lay = layout(cfg);
    const double w = *sel.window;
    const fs::path ckpath = lay.model_dir(*sel.variant, *sel.method, w) / "checkpoint.bin";
    if (!fs::exists(ckpath)) throw InvalidInput("missing " + ckpath.string() + " (run train first)");
    const learn::Checkpoint ck = learn::read_checkpoint(ckpath);
    check_provenance(ck.provenance, cfg, ckpath);

    learn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, stage_tag::kFinetune);
    const auto random_encoder = learn::init_encoder(ck.encoder.rows, ck.encoder.cols, derive_seed(tc.seed, "random_encoder"));
    std::vector<MetricsReport> reports;
    for (const DatasetGroup& g : cfg.groups()) {
        if (g.name == "n1") continue;
        const DatasetSplit split = parse_manifest(read_text_file(lay.manifest(g.name, w, *sel.variant)));
        const fs::path ds = lay.dataset_dir(g.name, w);
        const auto subset = load_samples(ds, *sel.variant, split.train);
        const auto rest = load_samples(ds, *sel.variant, split.t1);
        std::string split_name = g.name;
        split_name[0] = 'D';
        for (const auto& [label, enc] : {std::pair{"finetune", &ck.encoder}, std::pair{"random_encoder", &random_encoder}}) {
            learn::History hist;
            const auto cls = learn::finetune(*enc, subset, tc, &hist);
            MetricsReport r = learn::evaluate_model(*enc, cls, rest);
            r.split = split_name;
            r.variant = variant_name(*sel.variant);
            r.method = label;
            r.seed = cfg.seed;
            reports.push_back(r);
            if (std::string(label) == "finetune") {
                learn::Checkpoint fk{*enc, cls, tc, provenance(cfg, "finetune", tc.seed)};
                fk.provenance.emplace_back("group", g.name);
                fk.provenance.emplace_back("subset", std::to_string(subset.size()));
                const fs::path dir = lay.root / "models" / ("finetune_" + g.name + "_" + window_tag(w));
                learn::write_checkpoint(dir / "checkpoint.bin", fk);
                write_text_file(dir / "history.txt", "# provenance " + cfg.hash() + " seed " + std::to_string(tc.seed) +
                                                         " stage finetune\n" + hist.format());
            }
        }
        out << split_name << ": fine-tuned on " << subset.size() << " samples, evaluated on " << rest.size() << '\n';
    }
    auto prov = provenance(cfg, "finetune", tc.seed);
    prov.emplace_back("window", format_number(w));
    write_text_file(lay.report_dir() / ("finetune_" + variant_name(*sel.variant) + "_" + window_tag(w) + ".json"),
                    report_json(prov, reports));
    out << format_metrics_table(reports);
    return kExitOk;
}

int cmd_report(const ExperimentConfig& cfg, std::ostream& out, std::ostream&) {
    const Layout lay = layout(cfg);
    const fs::path dir = lay.report_dir();
    if (!fs::exists(dir)) throw InvalidInput("no reports under " + dir.string() + " (run eval first)");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json" && e.path().filename() != "summary.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<MetricsReport> all;
    std::string table;
    for (const auto& f : files) {
        const auto reports = read_report_json(f);
        table += "== " + f.stem().string() + "\n" + format_metrics_table(reports) + "\n";
        all.insert(all.end(), reports.begin(), reports.end());
    }
    write_text_file(dir / "table.txt", table);
    write_text_file(dir / "summary.json", report_json(provenance(cfg, "report", cfg.seed), all));
    out << table;
    return kExitOk;
}

}  // namespace tslab::cli
