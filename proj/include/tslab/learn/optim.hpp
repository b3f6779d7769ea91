#pragma once

#include "tslab/learn/tensor.hpp"

#include <vector>

namespace tslab::learn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Only the parameters given at construction are
/// updated; gradients are read from the tape after backward().
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig config = {});

    void step(const Tape& tape);
    long steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace tslab::learn
