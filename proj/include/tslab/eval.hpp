#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tslab {

/// Binary classification metrics; positive class = stable (label 1).
/// A metric whose denominator is zero is reported as std::nullopt.
struct MetricsReport {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double acc = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> auc;
    std::string split;
    std::string variant;
    std::string method;
    std::uint64_t seed = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
};

/// F-beta with beta = 1. Throws InvalidParameter on empty or mismatched input,
/// or non-binary values.
MetricsReport confusion_metrics(std::span<const int> predictions, std::span<const int> labels);

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counted one half.
/// Returns nullopt when only one class is present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

/// Full report: confusion metrics on argmax predictions plus AUC on scores.
MetricsReport evaluate_scores(std::span<const double> prob_stable, std::span<const int> labels);

/// Aligned plain-text table in the layout of the reference comparison
/// (method, split, then ACC/Precision/Recall/F1 in percent and AUC per variant).
std::string format_metrics_table(const std::vector<MetricsReport>& reports);

/// Machine-readable form (JSON array), stable key order.
std::string metrics_to_json(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> metrics_from_json(const std::string& text);

}  // namespace tslab
