#pragma once

#include "tslab/eval.hpp"
#include "tslab/features.hpp"
#include "tslab/learn/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tslab::learn {

enum class Stage { SclEncoder, Classifier, SlBaseline, Finetune };

std::string stage_name(Stage s);
Stage parse_stage(std::string_view s);

struct TrainConfig {
    double temperature = 0.07;
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;  ///< originals per batch; each batch also holds one view per original
    int epochs = 30;               ///< contrastive stage of SCL, joint training of SL
    int classifier_epochs = 30;    ///< classifier stage of SCL and fine-tuning
    std::uint64_t seed = 0;
    bool augment = true;      ///< views are row-permuted; otherwise exact copies
    bool select_best = true;  ///< keep the classifier epoch with the best validation accuracy

    void validate() const;
};

struct EpochRecord {
    Stage stage = Stage::SclEncoder;
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;  ///< NaN where no classifier exists yet
};

struct History {
    std::vector<EpochRecord> epochs;

    std::string format() const;
    static History parse(std::string_view text);
};

struct TrainedModel {
    EncoderParams encoder;
    ClassifierParams classifier;
    History history;
};

/// M originals followed by their M views; pairing[i] is the index of the
/// other member of i's pair.
struct Batch {
    Tensor inputs;
    std::vector<int> labels;
    std::vector<std::size_t> pairing;
};

Batch make_batch(const std::vector<GedfSample>& samples, std::span<const std::size_t> indices, Rng& rng,
                 bool augment);

/// Parameters the trainers start from for a given seed.
TrainedModel initial_model(int rows, int cols, std::uint64_t seed);

/// Stage 1: encoder on the contrastive loss. Stage 2: encoder frozen, classifier
/// on cross-entropy.
TrainedModel train_scl(const std::vector<GedfSample>& train, const std::vector<GedfSample>& val,
                       const TrainConfig& cfg);

/// Encoder and classifier trained jointly on cross-entropy.
TrainedModel train_sl(const std::vector<GedfSample>& train, const std::vector<GedfSample>& val,
                      const TrainConfig& cfg);

/// Fresh classifier on top of a frozen encoder, `classifier_epochs` epochs.
ClassifierParams finetune(const EncoderParams& encoder, const std::vector<GedfSample>& train,
                          const TrainConfig& cfg, History* history = nullptr);

/// Probability of the stable class for each sample.
std::vector<double> predict_proba(const EncoderParams& encoder, const ClassifierParams& classifier,
                                  const std::vector<GedfSample>& samples, std::size_t batch_size = 256);

MetricsReport evaluate_model(const EncoderParams& encoder, const ClassifierParams& classifier,
                             const std::vector<GedfSample>& samples);

}  // namespace tslab::learn
