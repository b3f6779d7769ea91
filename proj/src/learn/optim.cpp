#include "tslab/learn/optim.hpp"

#include "tslab/error.hpp"

#include <cmath>

namespace tslab::learn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), cfg_(config) {
    if (cfg_.learning_rate <= 0.0) throw InvalidParameter("learning rate must be positive");
    for (const Parameter* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::step(const Tape& tape) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        const Tensor g = tape.gradient(*params_[k]);
        auto& w = params_[k]->value.data;
        std::vector<double>& m = m_[k];
        std::vector<double>& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g.data[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
            w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
        }
    }
}

}  // namespace tslab::learn
