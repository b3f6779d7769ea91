#include "tslab/eval.hpp"

#include "tslab/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace tslab {

MetricsReport confusion_metrics(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw InvalidParameter("confusion_metrics needs equal, nonzero lengths");
    }
    MetricsReport r;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int p = predictions[i], y = labels[i];
        if ((p != 0 && p != 1) || (y != 0 && y != 1)) throw InvalidParameter("labels must be binary");
        if (p == 1 && y == 1) ++r.tp;
        else if (p == 0 && y == 0) ++r.tn;
        else if (p == 1) ++r.fp;
        else ++r.fn;
    }
    r.acc = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
    if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0) {
        constexpr double beta2 = 1.0;
        r.f1 = (1.0 + beta2) * *r.precision * *r.recall / (beta2 * *r.precision + *r.recall);
    }
    return r;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InvalidParameter("auc needs equal lengths");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the Mann-Whitney U, kept integral so ties are exact.
    unsigned long long twice_u = 0, pos = 0, neg = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        unsigned long long gp = 0, gn = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? gp : gn)++;
            ++j;
        }
        twice_u += 2 * gp * neg + gp * gn;
        pos += gp;
        neg += gn;
        i = j;
    }
    if (pos == 0 || neg == 0) return std::nullopt;
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

MetricsReport evaluate_scores(std::span<const double> prob_stable, std::span<const int> labels) {
    std::vector<int> pred(prob_stable.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = prob_stable[i] > 0.5 ? 1 : 0;
    MetricsReport r = confusion_metrics(pred, labels);
    r.auc = auc(prob_stable, labels);
    return r;
}

namespace {

std::string pct(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
    return buf;
}

std::string fixed4(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

nlohmann::ordered_json opt(const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); }

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

}  // namespace

std::string format_metrics_table(const std::vector<MetricsReport>& reports) {
    // Rows keyed by (method, split); one column group per variant.
    std::vector<std::string> variants;
    std::vector<std::pair<std::string, std::string>> rows;
    std::map<std::tuple<std::string, std::string, std::string>, const MetricsReport*> cell;
    for (const auto& r : reports) {
        if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
        const auto key = std::make_pair(r.method, r.split);
        if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
        cell[{r.method, r.split, r.variant}] = &r;
    }
    int method_width = 8;
    for (const auto& row : rows) method_width = std::max(method_width, static_cast<int>(row.first.size()));
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s %-10s", method_width, "Method", "Dataset");
    os << buf;
    for (const auto& v : variants) {
        std::snprintf(buf, sizeof buf, " | %-6s %8s %10s %8s %8s %7s", v.c_str(), "ACC(%)", "Precision(%)", "Recall(%)",
                      "F1(%)", "AUC");
        os << buf;
    }
    os << '\n';
    for (const auto& [method, split] : rows) {
        std::snprintf(buf, sizeof buf, "%-*s %-10s", method_width, method.c_str(), split.c_str());
        os << buf;
        for (const auto& v : variants) {
            auto it = cell.find({method, split, v});
            if (it == cell.end()) {
                std::snprintf(buf, sizeof buf, " | %-6s %8s %12s %9s %8s %7s", "", "-", "-", "-", "-", "-");
            } else {
                const MetricsReport& r = *it->second;
                std::snprintf(buf, sizeof buf, " | %-6s %8s %12s %9s %8s %7s", "", pct(r.acc).c_str(),
                              pct(r.precision).c_str(), pct(r.recall).c_str(), pct(r.f1).c_str(), fixed4(r.auc).c_str());
            }
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::string metrics_to_json(const std::vector<MetricsReport>& reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["method"] = r.method;
        j["variant"] = r.variant;
        j["split"] = r.split;
        j["seed"] = r.seed;
        j["tp"] = r.tp;
        j["tn"] = r.tn;
        j["fp"] = r.fp;
        j["fn"] = r.fn;
        j["acc"] = r.acc;
        j["precision"] = opt(r.precision);
        j["recall"] = opt(r.recall);
        j["f1"] = opt(r.f1);
        j["auc"] = opt(r.auc);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::vector<MetricsReport> metrics_from_json(const std::string& text) {
    std::vector<MetricsReport> out;
    const auto arr = nlohmann::json::parse(text);
    for (const auto& j : arr) {
        MetricsReport r;
        r.method = j.at("method").get<std::string>();
        r.variant = j.at("variant").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.tp = j.at("tp").get<std::size_t>();
        r.tn = j.at("tn").get<std::size_t>();
        r.fp = j.at("fp").get<std::size_t>();
        r.fn = j.at("fn").get<std::size_t>();
        r.acc = j.at("acc").get<double>();
        r.precision = get_opt(j, "precision");
        r.recall = get_opt(j, "recall");
        r.f1 = get_opt(j, "f1");
        r.auc = get_opt(j, "auc");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace tslab
