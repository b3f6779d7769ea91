#pragma once

#include "tslab/cli/config.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>

namespace tslab::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitInfeasible = 2, kExitNumerical = 3 };

/// Per-invocation selections (--window, --variant, --method).
struct Selection {
    std::optional<double> window;
    std::optional<Variant> variant;
    std::optional<Method> method;
};

/// Output layout under config.output_root.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path topology_dir(const std::string& group) const;
    std::filesystem::path record_dir(const std::string& group) const;
    std::filesystem::path dataset_dir(const std::string& group, double window) const;
    std::filesystem::path manifest(const std::string& group, double window, Variant v) const;
    std::filesystem::path model_dir(Variant v, Method m, double window) const;
    std::filesystem::path report_dir() const;
};

std::string window_tag(double window);

/// Provenance lines carried by every artifact.
KeyValues provenance(const ExperimentConfig& cfg, const std::string& stage, std::uint64_t stage_seed);

int cmd_gen_topologies(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_extract(const ExperimentConfig& cfg, const Selection& sel, std::ostream& out, std::ostream& err);
int cmd_train(const ExperimentConfig& cfg, const Selection& sel, std::ostream& out, std::ostream& err);
int cmd_eval(const ExperimentConfig& cfg, const Selection& sel, std::ostream& out, std::ostream& err);
int cmd_finetune(const ExperimentConfig& cfg, const Selection& sel, std::ostream& out, std::ostream& err);
int cmd_report(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

/// Runs `body`, mapping library exceptions to exit codes and printing them to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace tslab::cli
