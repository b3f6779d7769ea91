#include "tslab/learn/tensor.hpp"

#include "tslab/error.hpp"

#include <sstream>

namespace tslab::learn {

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw InvalidParameter("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false});
    return Var{nodes_.size() - 1};
}

Var Tape::param(const Parameter& p) {
    for (const auto& [ptr, id] : params_) {
        if (ptr == &p) return Var{id};
    }
    nodes_.push_back(Node{p.value, {}, {}, true});
    params_.emplace_back(&p, nodes_.size() - 1);
    return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_.at(v.id).needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
    return Var{nodes_.size() - 1};
}

Tensor& Tape::grad(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (nodes_.at(loss.id).value.size() != 1) throw InvalidParameter("backward needs a scalar loss");
    grad(loss).data[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward && !n.grad.empty()) n.backward(*this, Var{i});
    }
}

Tensor Tape::gradient(const Parameter& p) const {
    for (const auto& [ptr, id] : params_) {
        if (ptr == &p) {
            const Node& n = nodes_[id];
            return n.grad.empty() ? Tensor(n.value.shape) : n.grad;
        }
    }
    return Tensor(p.value.shape);
}

}  // namespace tslab::learn
