#include "tslab/learn/model.hpp"

#include "tslab/error.hpp"
#include "tslab/learn/ops.hpp"

#include <cmath>
#include <limits>

namespace tslab::learn {

EncoderShapes encoder_shapes(int rows, int cols) {
    EncoderShapes s;
    int h = rows - 2, w = cols - 2;
    s.stages[0] = {16, h, w};
    h -= 2;
    w -= 2;
    s.stages[1] = {16, h, w};
    h /= 2;
    w /= 2;
    s.stages[2] = {16, h, w};
    h -= 2;
    w -= 2;
    s.stages[3] = {32, h, w};
    if (h < 1 || w < 1) {
        throw InvalidInput("encoder input " + std::to_string(rows) + "x" + std::to_string(cols) +
                           " too small (need at least 10x10)");
    }
    s.flat = 32 * h * w;
    return s;
}

std::vector<Parameter*> EncoderParams::parameters() {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b, &fc_w, &fc_b};
}

std::vector<const Parameter*> EncoderParams::parameters() const {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b, &fc_w, &fc_b};
}

std::vector<Parameter*> ClassifierParams::parameters() {
    return {&fc1_w, &fc1_b, &fc2_w, &fc2_b, &fc3_w, &fc3_b};
}

std::vector<const Parameter*> ClassifierParams::parameters() const {
    return {&fc1_w, &fc1_b, &fc2_w, &fc2_b, &fc3_w, &fc3_b};
}

namespace {

Parameter weight(const std::string& name, std::vector<int> shape, int fan_in, Rng& rng) {
    Parameter p{name, Tensor(std::move(shape))};
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : p.value.data) v = uniform(rng, -bound, bound);
    return p;
}

Parameter bias(const std::string& name, int n) { return Parameter{name, Tensor({n})}; }

}  // namespace

EncoderParams init_encoder(int rows, int cols, std::uint64_t seed) {
    const EncoderShapes s = encoder_shapes(rows, cols);
    Rng rng(seed);
    EncoderParams p;
    p.rows = rows;
    p.cols = cols;
    p.conv1_w = weight("encoder.conv1.weight", {16, 1, 3, 3}, 9, rng);
    p.conv1_b = bias("encoder.conv1.bias", 16);
    p.conv2_w = weight("encoder.conv2.weight", {16, 16, 3, 3}, 16 * 9, rng);
    p.conv2_b = bias("encoder.conv2.bias", 16);
    p.conv3_w = weight("encoder.conv3.weight", {32, 16, 3, 3}, 16 * 9, rng);
    p.conv3_b = bias("encoder.conv3.bias", 32);
    p.fc_w = weight("encoder.fc.weight", {kEmbeddingDim, s.flat}, s.flat, rng);
    p.fc_b = bias("encoder.fc.bias", kEmbeddingDim);
    return p;
}

ClassifierParams init_classifier(std::uint64_t seed) {
    Rng rng(seed);
    ClassifierParams p;
    p.fc1_w = weight("classifier.fc1.weight", {kHidden1, kEmbeddingDim}, kEmbeddingDim, rng);
    p.fc1_b = bias("classifier.fc1.bias", kHidden1);
    p.fc2_w = weight("classifier.fc2.weight", {kHidden2, kHidden1}, kHidden1, rng);
    p.fc2_b = bias("classifier.fc2.bias", kHidden2);
    p.fc3_w = weight("classifier.fc3.weight", {kClasses, kHidden2}, kHidden2, rng);
    p.fc3_b = bias("classifier.fc3.bias", kClasses);
    return p;
}

bool operator==(const Parameter& a, const Parameter& b) {
    return a.name == b.name && a.value.shape == b.value.shape && a.value.data == b.value.data;
}

bool same_parameters(std::span<const Parameter* const> a, std::span<const Parameter* const> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(*a[i] == *b[i])) return false;
    }
    return true;
}

Tensor stack_inputs(std::span<const Eigen::MatrixXd* const> inputs) {
    if (inputs.empty()) throw InvalidInput("stack_inputs: empty batch");
    const int rows = static_cast<int>(inputs[0]->rows()), cols = static_cast<int>(inputs[0]->cols());
    Tensor x({static_cast<int>(inputs.size()), 1, rows, cols});
    double* out = x.ptr();
    for (const Eigen::MatrixXd* m : inputs) {
        if (m->rows() != rows || m->cols() != cols) throw InvalidInput("stack_inputs: inconsistent sample shapes");
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) *out++ = (*m)(r, c);
        }
    }
    return x;
}

Var encode(Tape& t, const EncoderParams& p, Var x, bool trainable) {
    const Tensor& xv = t.value(x);
    if (xv.rank() != 4 || xv.dim(1) != 1 || xv.dim(2) != p.rows || xv.dim(3) != p.cols) {
        throw InvalidInput("encode: input " + xv.shape_string() + " does not match encoder (" +
                           std::to_string(p.rows) + "x" + std::to_string(p.cols) + ")");
    }
    auto leaf = [&](const Parameter& q) { return trainable ? t.param(q) : t.constant(q.value); };
    Var h = relu(t, conv2d(t, x, leaf(p.conv1_w), leaf(p.conv1_b)));
    h = relu(t, conv2d(t, h, leaf(p.conv2_w), leaf(p.conv2_b)));
    h = maxpool2x2(t, h);
    h = relu(t, conv2d(t, h, leaf(p.conv3_w), leaf(p.conv3_b)));
    return dense(t, flatten(t, h), leaf(p.fc_w), leaf(p.fc_b));
}

Var classify(Tape& t, const ClassifierParams& p, Var z, bool trainable) {
    auto leaf = [&](const Parameter& q) { return trainable ? t.param(q) : t.constant(q.value); };
    Var h = gelu(t, dense(t, z, leaf(p.fc1_w), leaf(p.fc1_b)));
    h = gelu(t, dense(t, h, leaf(p.fc2_w), leaf(p.fc2_b)));
    return dense(t, h, leaf(p.fc3_w), leaf(p.fc3_b));
}

Eigen::VectorXd encode(const EncoderParams& p, const Eigen::MatrixXd& input) {
    if (!input.allFinite()) throw InvalidInput("encode: non-finite input");
    Tape t;
    const Eigen::MatrixXd* ptr = &input;
    Var z = encode(t, p, t.constant(stack_inputs({&ptr, 1})), false);
    const Tensor& v = t.value(z);
    return Eigen::Map<const Eigen::VectorXd>(v.ptr(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd permute_rows(const Eigen::MatrixXd& in, std::span<const std::size_t> perm) {
    if (perm.size() != static_cast<std::size_t>(in.rows())) throw InvalidParameter("permute_rows: size mismatch");
    Eigen::MatrixXd out(in.rows(), in.cols());
    for (Eigen::Index i = 0; i < in.rows(); ++i) out.row(i) = in.row(static_cast<Eigen::Index>(perm[i]));
    return out;
}

GedfSample augment(const GedfSample& sample, Rng& rng) {
    if (sample.matrix.rows() < 2) throw InvalidParameter("augment needs at least two rows");
    const auto perm = random_permutation(static_cast<std::size_t>(sample.matrix.rows()), rng);
    GedfSample out = sample;
    out.matrix = permute_rows(sample.matrix, perm);
    return out;
}

double supcon_loss(const Eigen::MatrixXd& z, std::span<const int> labels, double tau) {
    if (tau <= 0.0) throw InvalidParameter("supcon_loss: temperature must be positive");
    if (static_cast<std::size_t>(z.rows()) != labels.size()) throw InvalidParameter("supcon_loss: label count");
    const Eigen::MatrixXd s = z * z.transpose() / tau;
    const Eigen::Index n = z.rows();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 0; a < n; ++a) {
            if (a != i) mx = std::max(mx, s(i, a));
        }
        double denom = 0.0;
        for (Eigen::Index a = 0; a < n; ++a) {
            if (a != i) denom += std::exp(s(i, a) - mx);
        }
        const double log_denom = mx + std::log(denom);
        int npos = 0;
        double acc = 0.0;
        for (Eigen::Index p = 0; p < n; ++p) {
            if (p == i || labels[p] != labels[i]) continue;
            ++npos;
            acc += s(i, p) - log_denom;
        }
        if (npos == 0) throw InvalidParameter("supcon_loss: sample without a positive in the batch");
        loss -= acc / npos;
    }
    return loss;
}

double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw InvalidParameter("cross_entropy: label out of range");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return mx + std::log(sum) - logits[label];
}

}  // namespace tslab::learn
