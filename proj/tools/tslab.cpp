// tslab: topology generation, simulation, feature extraction, training and
// evaluation driven by one JSON configuration file.

#include "tslab/cli/commands.hpp"
#include "tslab/cli/config.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace tslab;
using namespace tslab::cli;

int main(int argc, char** argv) {
    CLI::App app{"Transient-stability lab: simulate, extract GEDF datasets, train and evaluate classifiers"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<double> window;
    std::string variant, method;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the master seed");
        sub->add_option("--workers", workers, "Worker threads (default: available parallelism)");
    };
    auto add_selection = [&](CLI::App* sub) {
        sub->add_option("--window", window, "Window length in seconds")
            ->check(CLI::IsMember({"0.05", "0.1", "0.10", "0.15", "0.2", "0.20"}));
        sub->add_option("--variant", variant, "Feature variant")->check(CLI::IsMember({"gedf", "raw"}));
        sub->add_option("--method", method, "Training method")->check(CLI::IsMember({"scl", "sl"}));
    };

    struct Sub {
        const char* name;
        const char* help;
        bool selection;
    };
    const Sub subs[] = {
        {"gen-topologies", "Generate altered topologies", false},
        {"simulate", "Simulate the fault campaign on every topology", false},
        {"extract", "Extract gedf/raw samples and split manifests", true},
        {"train", "Train a model (--variant, --method, --window)", true},
        {"finetune", "Fine-tune the classifier on the transfer sets", true},
        {"eval", "Evaluate a trained model on T1 and T2", true},
        {"report", "Collect all metric reports into one table", false},
    };
    for (const Sub& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        add_common(sub);
        if (s.selection) add_selection(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    return guarded(
        [&]() -> int {
            ExperimentConfig cfg = load_config(config_path);
            apply_overrides(cfg, Overrides{seed, workers});
            Selection sel;
            sel.window = window;
            if (!variant.empty()) sel.variant = parse_variant(variant);
            if (!method.empty()) sel.method = parse_method(method);
            if (cmd == "gen-topologies") return cmd_gen_topologies(cfg, std::cout, std::cerr);
            if (cmd == "simulate") return cmd_simulate(cfg, std::cout, std::cerr);
            if (cmd == "extract") return cmd_extract(cfg, sel, std::cout, std::cerr);
            if (cmd == "train") return cmd_train(cfg, sel, std::cout, std::cerr);
            if (cmd == "finetune") return cmd_finetune(cfg, sel, std::cout, std::cerr);
            if (cmd == "eval") return cmd_eval(cfg, sel, std::cout, std::cerr);
            return cmd_report(cfg, std::cout, std::cerr);
        },
        std::cerr);
}
