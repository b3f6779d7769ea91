#pragma once

#include "tslab/features.hpp"
#include "tslab/learn/tensor.hpp"
#include "tslab/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace tslab::learn {

inline constexpr int kEmbeddingDim = 64;
inline constexpr int kHidden1 = 512;
inline constexpr int kHidden2 = 128;
inline constexpr int kClasses = 2;

/// (channels, height, width) after each encoder stage for an n x N input:
/// conv1, conv2, pool, conv3.
struct EncoderShapes {
    std::array<std::array<int, 3>, 4> stages{};
    int flat = 0;
};

/// Throws InvalidInput if the input is too small for the conv/pool chain.
EncoderShapes encoder_shapes(int rows, int cols);

/// conv(1->16) ReLU, conv(16->16) ReLU, 2x2 max-pool, conv(16->32) ReLU, dense -> 64.
struct EncoderParams {
    int rows = 0;
    int cols = 0;
    Parameter conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b, fc_w, fc_b;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
};

/// 64 -> 512 GELU -> 128 GELU -> 2 logits.
struct ClassifierParams {
    Parameter fc1_w, fc1_b, fc2_w, fc2_b, fc3_w, fc3_b;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
};

/// Weights uniform in +-sqrt(6 / fan_in), biases zero.
EncoderParams init_encoder(int rows, int cols, std::uint64_t seed);
ClassifierParams init_classifier(std::uint64_t seed);

bool operator==(const Parameter& a, const Parameter& b);
bool same_parameters(std::span<const Parameter* const> a, std::span<const Parameter* const> b);

/// Stacks samples into a (B, 1, n, N) tensor.
Tensor stack_inputs(std::span<const Eigen::MatrixXd* const> inputs);

/// Raw (unnormalized) embeddings (B, 64). With trainable = false the weights
/// enter the tape as constants and receive no gradient.
Var encode(Tape& t, const EncoderParams& p, Var x, bool trainable = true);
Var classify(Tape& t, const ClassifierParams& p, Var z, bool trainable = true);

/// Single-sample forward pass.
Eigen::VectorXd encode(const EncoderParams& p, const Eigen::MatrixXd& input);

/// out.row(i) = in.row(perm[i]).
Eigen::MatrixXd permute_rows(const Eigen::MatrixXd& in, std::span<const std::size_t> perm);

/// Node-ID relabeling: rows permuted by a uniform random permutation; label
/// and metadata unchanged.
GedfSample augment(const GedfSample& sample, Rng& rng);

/// Reference (tape-free) losses.
/// Supervised contrastive loss over the rows of z, summed over anchors.
double supcon_loss(const Eigen::MatrixXd& z, std::span<const int> labels, double tau);
double cross_entropy(std::span<const double> logits, int label);

}  // namespace tslab::learn
