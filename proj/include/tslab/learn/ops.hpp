#pragma once

#include "tslab/learn/tensor.hpp"

#include <span>

namespace tslab::learn {

/// Valid (unpadded), unit-stride 2-D convolution.
/// x: (B, Cin, H, W), w: (Cout, Cin, k, k), b: (Cout) -> (B, Cout, H-k+1, W-k+1).
Var conv2d(Tape& t, Var x, Var w, Var b);

Var relu(Tape& t, Var x);

/// Exact GELU, x * Phi(x).
Var gelu(Tape& t, Var x);

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// The gradient flows to the arg-max of each window (first one on ties).
Var maxpool2x2(Tape& t, Var x);

/// (B, ...) -> (B, F).
Var flatten(Tape& t, Var x);

/// x: (B, F), w: (O, F), b: (O) -> x w^T + b.
Var dense(Tape& t, Var x, Var w, Var b);

/// Scales each row of (B, F) to unit Euclidean norm (rows of norm < 1e-12 are
/// divided by 1e-12 instead).
Var l2_normalize(Tape& t, Var x);

/// Supervised contrastive loss over the rows of z (B, D):
///   scale * sum_i -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p/tau) / sum_{a != i} exp(z_i.z_a/tau) )
/// with P(i) the other rows sharing label i. Throws InvalidParameter if some P(i) is empty.
Var supcon(Tape& t, Var z, std::span<const int> labels, double tau, double scale = 1.0);

/// Mean softmax cross-entropy of logits (B, C) against integer labels.
Var softmax_cross_entropy(Tape& t, Var logits, std::span<const int> labels);

/// sum(x .* weights); used to reduce arbitrary outputs to a scalar.
Var weighted_sum(Tape& t, Var x, const Tensor& weights);

}  // namespace tslab::learn
