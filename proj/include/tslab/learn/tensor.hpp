#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace tslab::learn {

/// Dense row-major tensor of doubles; shapes are (B, C, H, W) for images and
/// (B, F) for flat activations.
struct Tensor {
    /// Fixed alignment keeps vectorized kernels on the same code path (and so
    /// the same rounding) regardless of where the buffer lands.
    using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

    std::vector<int> shape;
    Buffer data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    int dim(std::size_t i) const { return shape.at(i); }
    bool empty() const { return data.empty(); }
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    std::string shape_string() const;
};

std::size_t shape_size(const std::vector<int>& shape);

/// A named learnable tensor.
struct Parameter {
    std::string name;
    Tensor value;
};

struct Var {
    std::size_t id = 0;
};

/// Records operations in execution order and replays their adjoints in
/// reverse. One tape per forward pass.
class Tape {
public:
    using Backward = std::function<void(Tape&, Var self)>;

    /// Leaf that receives no gradient.
    Var constant(Tensor value);
    /// Leaf bound to a parameter; its gradient is available after backward().
    Var param(const Parameter& p);
    /// Appends an op output. The adjoint is kept only if some input needs a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

    /// Gradient buffer of v, allocated as zeros on first access.
    Tensor& grad(Var v);
    bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }

    /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
    void backward(Var loss);

    /// Accumulated gradient for a parameter registered with param(); zeros
    /// if it did not influence the loss.
    Tensor gradient(const Parameter& p) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Backward backward;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
    std::vector<std::pair<const Parameter*, std::size_t>> params_;
};

}  // namespace tslab::learn
