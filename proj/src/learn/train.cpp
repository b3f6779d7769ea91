#include "tslab/learn/train.hpp"

#include "tslab/case_io.hpp"
#include "tslab/error.hpp"
#include "tslab/learn/ops.hpp"
#include "tslab/learn/optim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace tslab::learn {

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::SclEncoder: return "scl_encoder";
        case Stage::Classifier: return "classifier";
        case Stage::SlBaseline: return "sl_baseline";
        case Stage::Finetune: return "finetune";
    }
    return "?";
}

Stage parse_stage(std::string_view s) {
    for (Stage st : {Stage::SclEncoder, Stage::Classifier, Stage::SlBaseline, Stage::Finetune}) {
        if (s == stage_name(st)) return st;
    }
    throw InvalidInput("unknown training stage '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
    if (!(temperature > 0.0)) throw InvalidParameter("temperature must be positive");
    if (!(learning_rate > 0.0)) throw InvalidParameter("learning rate must be positive");
    if (batch_size == 0) throw InvalidParameter("batch size must be positive");
    if (epochs < 0 || classifier_epochs < 0) throw InvalidParameter("epoch counts must be nonnegative");
}

std::string History::format() const {
    std::ostringstream os;
    os << "# stage epoch train_loss val_loss val_acc\n";
    char buf[160];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof buf, "%s %d %.10g %.10g %.10g\n", stage_name(e.stage).c_str(), e.epoch, e.train_loss,
                      e.val_loss, e.val_acc);
        os << buf;
    }
    return os.str();
}

History History::parse(std::string_view text) {
    History h;
    std::istringstream is{std::string(text)};
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_ws(line);
        if (f.size() != 5) throw InvalidInput("history line needs 5 fields: " + line);
        EpochRecord r;
        r.stage = parse_stage(f[0]);
        r.epoch = parse_int(f[1]);
        r.train_loss = parse_double(f[2]);
        r.val_loss = parse_double(f[3]);
        r.val_acc = parse_double(f[4]);
        h.epochs.push_back(r);
    }
    return h;
}

Batch make_batch(const std::vector<GedfSample>& samples, std::span<const std::size_t> indices, Rng& rng,
                 bool augment) {
    const std::size_t m = indices.size();
    std::vector<Eigen::MatrixXd> views;
    views.reserve(m);
    std::vector<const Eigen::MatrixXd*> ptrs;
    ptrs.reserve(2 * m);
    Batch b;
    b.labels.resize(2 * m);
    b.pairing.resize(2 * m);
    for (std::size_t i = 0; i < m; ++i) {
        const GedfSample& s = samples.at(indices[i]);
        ptrs.push_back(&s.matrix);
        views.push_back(augment ? learn::augment(s, rng).matrix : s.matrix);
        b.labels[i] = b.labels[i + m] = s.label;
        b.pairing[i] = i + m;
        b.pairing[i + m] = i;
    }
    for (const auto& v : views) ptrs.push_back(&v);
    b.inputs = stack_inputs(ptrs);
    return b;
}

TrainedModel initial_model(int rows, int cols, std::uint64_t seed) {
    TrainedModel m;
    m.encoder = init_encoder(rows, cols, derive_seed(seed, "encoder_init"));
    m.classifier = init_classifier(derive_seed(seed, "classifier_init"));
    return m;
}

namespace {

void require_nonempty(const std::vector<GedfSample>& s, const char* what) {
    if (s.empty()) throw InvalidInput(std::string(what) + " set is empty");
}

void check_finite(double loss, Stage stage, int epoch, std::size_t batch) {
    if (!std::isfinite(loss)) {
        throw TrainingDiverged(stage_name(stage) + ": non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch));
    }
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; s += batch_size) {
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch_size)));
    }
    return out;
}

Rng epoch_rng(std::uint64_t seed, Stage stage, int epoch) {
    return Rng(derive_seed(derive_seed(seed, stage_name(stage)), static_cast<std::uint64_t>(epoch)));
}

struct Snapshot {
    double acc = -1.0;
    EncoderParams encoder;
    ClassifierParams classifier;
};

/// Mean cross-entropy and accuracy of the originals (no views).
std::pair<double, double> validation_scores(const EncoderParams& enc, const ClassifierParams& cls,
                                            const std::vector<GedfSample>& val) {
    const std::vector<double> prob = predict_proba(enc, cls, val);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const double p = val[i].label == 1 ? prob[i] : 1.0 - prob[i];
        loss -= std::log(std::max(p, 1e-300));
        if ((prob[i] > 0.5 ? 1 : 0) == val[i].label) ++correct;
    }
    return {loss / static_cast<double>(val.size()), static_cast<double>(correct) / static_cast<double>(val.size())};
}

/// Contrastive loss per anchor over fixed-seed validation batches.
double validation_supcon(const EncoderParams& enc, const std::vector<GedfSample>& val, const TrainConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "val_views"));
    double total = 0.0;
    std::size_t anchors = 0;
    for (std::size_t s = 0; s < val.size(); s += cfg.batch_size) {
        std::vector<std::size_t> idx(std::min(val.size(), s + cfg.batch_size) - s);
        std::iota(idx.begin(), idx.end(), s);
        Batch b = make_batch(val, idx, rng, cfg.augment);
        Tape t;
        Var z = l2_normalize(t, encode(t, enc, t.constant(std::move(b.inputs)), false));
        total += t.value(supcon(t, z, b.labels, cfg.temperature)).data[0];
        anchors += b.labels.size();
    }
    return total / static_cast<double>(anchors);
}

/// Classifier epochs on a frozen encoder. Returns the trained classifier.
ClassifierParams train_classifier(const EncoderParams& enc, ClassifierParams cls,
                                  const std::vector<GedfSample>& train, const std::vector<GedfSample>& val,
                                  const TrainConfig& cfg, Stage stage, History& hist) {
    Adam opt(cls.parameters(), AdamConfig{cfg.learning_rate});
    Snapshot best;
    for (int epoch = 1; epoch <= cfg.classifier_epochs; ++epoch) {
        Rng rng = epoch_rng(cfg.seed, stage, epoch);
        double sum = 0.0;
        std::size_t count = 0, bi = 0;
        for (const auto& idx : epoch_batches(train.size(), cfg.batch_size, rng)) {
            Batch b = make_batch(train, idx, rng, cfg.augment);
            Tape t;
            Var z = l2_normalize(t, encode(t, enc, t.constant(std::move(b.inputs)), false));
            Var loss = softmax_cross_entropy(t, classify(t, cls, z), b.labels);
            const double lv = t.value(loss).data[0];
            check_finite(lv, stage, epoch, bi++);
            t.backward(loss);
            opt.step(t);
            sum += lv * static_cast<double>(b.labels.size());
            count += b.labels.size();
        }
        EpochRecord rec{stage, epoch, sum / static_cast<double>(count), std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN()};
        if (!val.empty()) {
            std::tie(rec.val_loss, rec.val_acc) = validation_scores(enc, cls, val);
            if (cfg.select_best && rec.val_acc > best.acc) {
                best.acc = rec.val_acc;
                best.classifier = cls;
            }
        }
        hist.epochs.push_back(rec);
    }
    if (cfg.select_best && best.acc >= 0.0) return best.classifier;
    return cls;
}

}  // namespace

TrainedModel train_scl(const std::vector<GedfSample>& train, const std::vector<GedfSample>& val,
                       const TrainConfig& cfg) {
    cfg.validate();
    require_nonempty(train, "training");
    TrainedModel model =
        initial_model(static_cast<int>(train[0].matrix.rows()), static_cast<int>(train[0].matrix.cols()), cfg.seed);

    Adam opt(model.encoder.parameters(), AdamConfig{cfg.learning_rate});
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng = epoch_rng(cfg.seed, Stage::SclEncoder, epoch);
        double sum = 0.0;
        std::size_t count = 0, bi = 0;
        for (const auto& idx : epoch_batches(train.size(), cfg.batch_size, rng)) {
            Batch b = make_batch(train, idx, rng, cfg.augment);
            const double n = static_cast<double>(b.labels.size());
            Tape t;
            Var z = l2_normalize(t, encode(t, model.encoder, t.constant(std::move(b.inputs))));
            Var loss = supcon(t, z, b.labels, cfg.temperature, 1.0 / n);
            const double lv = t.value(loss).data[0];
            check_finite(lv, Stage::SclEncoder, epoch, bi++);
            t.backward(loss);
            opt.step(t);
            sum += lv * n;
            count += b.labels.size();
        }
        EpochRecord rec{Stage::SclEncoder, epoch, sum / static_cast<double>(count),
                        std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        if (!val.empty()) rec.val_loss = validation_supcon(model.encoder, val, cfg);
        model.history.epochs.push_back(rec);
    }
    model.classifier =
        train_classifier(model.encoder, model.classifier, train, val, cfg, Stage::Classifier, model.history);
    return model;
}

TrainedModel train_sl(const std::vector<GedfSample>& train, const std::vector<GedfSample>& val,
                      const TrainConfig& cfg) {
    cfg.validate();
    require_nonempty(train, "training");
    TrainedModel model =
        initial_model(static_cast<int>(train[0].matrix.rows()), static_cast<int>(train[0].matrix.cols()), cfg.seed);

    std::vector<Parameter*> params = model.encoder.parameters();
    for (Parameter* p : model.classifier.parameters()) params.push_back(p);
    Adam opt(params, AdamConfig{cfg.learning_rate});
    Snapshot best;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng = epoch_rng(cfg.seed, Stage::SlBaseline, epoch);
        double sum = 0.0;
        std::size_t count = 0, bi = 0;
        for (const auto& idx : epoch_batches(train.size(), cfg.batch_size, rng)) {
            Batch b = make_batch(train, idx, rng, cfg.augment);
            Tape t;
            Var z = l2_normalize(t, encode(t, model.encoder, t.constant(std::move(b.inputs))));
            Var loss = softmax_cross_entropy(t, classify(t, model.classifier, z), b.labels);
            const double lv = t.value(loss).data[0];
            check_finite(lv, Stage::SlBaseline, epoch, bi++);
            t.backward(loss);
            opt.step(t);
            sum += lv * static_cast<double>(b.labels.size());
            count += b.labels.size();
        }
        EpochRecord rec{Stage::SlBaseline, epoch, sum / static_cast<double>(count),
                        std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        if (!val.empty()) {
            std::tie(rec.val_loss, rec.val_acc) = validation_scores(model.encoder, model.classifier, val);
            if (cfg.select_best && rec.val_acc > best.acc) {
                best.acc = rec.val_acc;
                best.encoder = model.encoder;
                best.classifier = model.classifier;
            }
        }
        model.history.epochs.push_back(rec);
    }
    if (cfg.select_best && best.acc >= 0.0) {
        model.encoder = std::move(best.encoder);
        model.classifier = std::move(best.classifier);
    }
    return model;
}

ClassifierParams finetune(const EncoderParams& encoder, const std::vector<GedfSample>& train,
                          const TrainConfig& cfg, History* history) {
    cfg.validate();
    require_nonempty(train, "fine-tuning");
    History local;
    TrainConfig c = cfg;
    c.select_best = false;
    ClassifierParams cls = train_classifier(encoder, init_classifier(derive_seed(cfg.seed, "classifier_init")), train,
                                            {}, c, Stage::Finetune, local);
    if (history) *history = std::move(local);
    return cls;
}

std::vector<double> predict_proba(const EncoderParams& encoder, const ClassifierParams& classifier,
                                  const std::vector<GedfSample>& samples, std::size_t batch_size) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (std::size_t s = 0; s < samples.size(); s += batch_size) {
        std::vector<const Eigen::MatrixXd*> ptrs;
        for (std::size_t i = s; i < std::min(samples.size(), s + batch_size); ++i) ptrs.push_back(&samples[i].matrix);
        Tape t;
        Var z = l2_normalize(t, encode(t, encoder, t.constant(stack_inputs(ptrs)), false));
        const Tensor& logits = t.value(classify(t, classifier, z, false));
        for (std::size_t i = 0; i < ptrs.size(); ++i) {
            const double l0 = logits.data[2 * i], l1 = logits.data[2 * i + 1];
            out.push_back(1.0 / (1.0 + std::exp(l0 - l1)));
        }
    }
    return out;
}

MetricsReport evaluate_model(const EncoderParams& encoder, const ClassifierParams& classifier,
                             const std::vector<GedfSample>& samples) {
    const std::vector<double> prob = predict_proba(encoder, classifier, samples);
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(s.label);
    return evaluate_scores(prob, labels);
}

}  // namespace tslab::learn
