#include "tslab/learn/ops.hpp"

#include "tslab/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace tslab::learn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<RowMat>;
using CMapR = Eigen::Map<const RowMat>;

void require(bool ok, const char* what) {
    if (!ok) throw InvalidParameter(what);
}

struct ConvGeom {
    int batch, cin, h, w, cout, k, ho, wo;
    int patch() const { return cin * k * k; }
    int pixels() const { return ho * wo; }
};

void im2col(const double* x, const ConvGeom& g, double* cols) {
    const int p = g.pixels();
    for (int c = 0; c < g.cin; ++c) {
        for (int ki = 0; ki < g.k; ++ki) {
            for (int kj = 0; kj < g.k; ++kj) {
                double* row = cols + static_cast<std::ptrdiff_t>((c * g.k + ki) * g.k + kj) * p;
                for (int oh = 0; oh < g.ho; ++oh) {
                    const double* src = x + (static_cast<std::ptrdiff_t>(c) * g.h + oh + ki) * g.w + kj;
                    std::copy(src, src + g.wo, row + oh * g.wo);
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvGeom& g, double* dx) {
    const int p = g.pixels();
    for (int c = 0; c < g.cin; ++c) {
        for (int ki = 0; ki < g.k; ++ki) {
            for (int kj = 0; kj < g.k; ++kj) {
                const double* row = cols + static_cast<std::ptrdiff_t>((c * g.k + ki) * g.k + kj) * p;
                for (int oh = 0; oh < g.ho; ++oh) {
                    double* dst = dx + (static_cast<std::ptrdiff_t>(c) * g.h + oh + ki) * g.w + kj;
                    const double* src = row + oh * g.wo;
                    for (int ow = 0; ow < g.wo; ++ow) dst[ow] += src[ow];
                }
            }
        }
    }
}

}  // namespace

Var conv2d(Tape& t, Var x, Var w, Var b) {
    const Tensor& X = t.value(x);
    const Tensor& W = t.value(w);
    const Tensor& Bv = t.value(b);
    require(X.rank() == 4 && W.rank() == 4 && Bv.rank() == 1, "conv2d: bad ranks");
    require(W.dim(1) == X.dim(1) && W.dim(2) == W.dim(3) && Bv.dim(0) == W.dim(0), "conv2d: shape mismatch");
    ConvGeom g{X.dim(0), X.dim(1), X.dim(2), X.dim(3), W.dim(0), W.dim(2), 0, 0};
    g.ho = g.h - g.k + 1;
    g.wo = g.w - g.k + 1;
    if (g.ho < 1 || g.wo < 1) {
        throw InvalidInput("conv2d: input " + X.shape_string() + " smaller than kernel");
    }
    Tensor Y({g.batch, g.cout, g.ho, g.wo});
    const std::ptrdiff_t in_stride = static_cast<std::ptrdiff_t>(g.cin) * g.h * g.w;
    const std::ptrdiff_t out_stride = static_cast<std::ptrdiff_t>(g.cout) * g.pixels();
    RowMat cols(g.patch(), g.pixels());
    CMapR wm(W.ptr(), g.cout, g.patch());
    Eigen::Map<const Eigen::VectorXd> bias(Bv.ptr(), g.cout);
    for (int s = 0; s < g.batch; ++s) {
        im2col(X.ptr() + s * in_stride, g, cols.data());
        MapR y(Y.ptr() + s * out_stride, g.cout, g.pixels());
        y.noalias() = wm * cols;
        y.colwise() += bias;
    }
    return t.record(std::move(Y), {x, w, b}, [x, w, b, g, in_stride, out_stride](Tape& t, Var self) {
        const Tensor& G = t.grad(self);
        const Tensor& X = t.value(x);
        const Tensor& W = t.value(w);
        const bool need_x = t.needs_grad(x), need_w = t.needs_grad(w), need_b = t.needs_grad(b);
        RowMat cols(g.patch(), g.pixels());
        RowMat dcols(g.patch(), g.pixels());
        CMapR wm(W.ptr(), g.cout, g.patch());
        for (int s = 0; s < g.batch; ++s) {
            CMapR dy(G.ptr() + s * out_stride, g.cout, g.pixels());
            if (need_w) {
                im2col(X.ptr() + s * in_stride, g, cols.data());
                MapR dw(t.grad(w).ptr(), g.cout, g.patch());
                dw.noalias() += dy * cols.transpose();
            }
            if (need_b) {
                Eigen::Map<Eigen::VectorXd> db(t.grad(b).ptr(), g.cout);
                db += dy.rowwise().sum();
            }
            if (need_x) {
                dcols.noalias() = wm.transpose() * dy;
                col2im_add(dcols.data(), g, t.grad(x).ptr() + s * in_stride);
            }
        }
    });
}

Var relu(Tape& t, Var x) {
    Tensor y = t.value(x);
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return t.record(std::move(y), {x}, [x](Tape& t, Var self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv.data[i] > 0.0) gx.data[i] += g.data[i];
        }
    });
}

Var gelu(Tape& t, Var x) {
    Tensor y = t.value(x);
    for (double& v : y.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    return t.record(std::move(y), {x}, [x](Tape& t, Var self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        Tensor& gx = t.grad(x);
        const double inv_sqrt_2pi = 0.5 * M_2_SQRTPI * M_SQRT1_2;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = xv.data[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            gx.data[i] += g.data[i] * (cdf + v * pdf);
        }
    });
}

Var maxpool2x2(Tape& t, Var x) {
    const Tensor& X = t.value(x);
    require(X.rank() == 4, "maxpool2x2: expects (B, C, H, W)");
    const int planes = X.dim(0) * X.dim(1), h = X.dim(2), w = X.dim(3);
    const int ho = h / 2, wo = w / 2;
    if (ho < 1 || wo < 1) throw InvalidInput("maxpool2x2: input " + X.shape_string() + " too small");
    Tensor Y({X.dim(0), X.dim(1), ho, wo});
    auto arg = std::make_shared<std::vector<std::size_t>>(Y.size());
    std::size_t o = 0;
    for (int p = 0; p < planes; ++p) {
        const std::size_t base = static_cast<std::size_t>(p) * h * w;
        for (int i = 0; i < ho; ++i) {
            for (int j = 0; j < wo; ++j, ++o) {
                std::size_t best = base + static_cast<std::size_t>(2 * i) * w + 2 * j;
                for (int di = 0; di < 2; ++di) {
                    for (int dj = 0; dj < 2; ++dj) {
                        const std::size_t idx = base + static_cast<std::size_t>(2 * i + di) * w + 2 * j + dj;
                        if (X.data[idx] > X.data[best]) best = idx;
                    }
                }
                Y.data[o] = X.data[best];
                (*arg)[o] = best;
            }
        }
    }
    return t.record(std::move(Y), {x}, [x, arg](Tape& t, Var self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx.data[(*arg)[i]] += g.data[i];
    });
}

Var flatten(Tape& t, Var x) {
    const Tensor& X = t.value(x);
    require(X.rank() >= 1, "flatten: scalar input");
    Tensor y = X;
    const int b = X.dim(0);
    y.shape = {b, b == 0 ? 0 : static_cast<int>(X.size() / static_cast<std::size_t>(b))};
    return t.record(std::move(y), {x}, [x](Tape& t, Var self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    });
}

Var dense(Tape& t, Var x, Var w, Var b) {
    const Tensor& X = t.value(x);
    const Tensor& W = t.value(w);
    const Tensor& Bv = t.value(b);
    require(X.rank() == 2 && W.rank() == 2 && Bv.rank() == 1, "dense: bad ranks");
    require(W.dim(1) == X.dim(1) && Bv.dim(0) == W.dim(0), "dense: shape mismatch");
    const int batch = X.dim(0), in = X.dim(1), out = W.dim(0);
    Tensor Y({batch, out});
    MapR y(Y.ptr(), batch, out);
    y.noalias() = CMapR(X.ptr(), batch, in) * CMapR(W.ptr(), out, in).transpose();
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(Bv.ptr(), out);
    return t.record(std::move(Y), {x, w, b}, [x, w, b, batch, in, out](Tape& t, Var self) {
        CMapR dy(t.grad(self).ptr(), batch, out);
        if (t.needs_grad(x)) {
            MapR(t.grad(x).ptr(), batch, in).noalias() += dy * CMapR(t.value(w).ptr(), out, in);
        }
        if (t.needs_grad(w)) {
            MapR(t.grad(w).ptr(), out, in).noalias() += dy.transpose() * CMapR(t.value(x).ptr(), batch, in);
        }
        if (t.needs_grad(b)) {
            Eigen::Map<Eigen::RowVectorXd>(t.grad(b).ptr(), out) += dy.colwise().sum();
        }
    });
}

Var l2_normalize(Tape& t, Var x) {
    const Tensor& X = t.value(x);
    require(X.rank() == 2, "l2_normalize: expects (B, F)");
    const int batch = X.dim(0), f = X.dim(1);
    Tensor Y = X;
    auto norms = std::make_shared<std::vector<double>>(batch);
    MapR y(Y.ptr(), batch, f);
    for (int i = 0; i < batch; ++i) {
        const double n = std::max(y.row(i).norm(), 1e-12);
        (*norms)[i] = n;
        y.row(i) /= n;
    }
    return t.record(std::move(Y), {x}, [x, norms, batch, f](Tape& t, Var self) {
        CMapR dy(t.grad(self).ptr(), batch, f);
        CMapR y(t.value(self).ptr(), batch, f);
        CMapR xv(t.value(x).ptr(), batch, f);
        MapR dx(t.grad(x).ptr(), batch, f);
        for (int i = 0; i < batch; ++i) {
            const double n = (*norms)[i];
            if (xv.row(i).norm() < 1e-12) {
                dx.row(i) += dy.row(i) / n;
            } else {
                dx.row(i) += (dy.row(i) - y.row(i) * y.row(i).dot(dy.row(i))) / n;
            }
        }
    });
}

Var supcon(Tape& t, Var z, std::span<const int> labels, double tau, double scale) {
    const Tensor& Z = t.value(z);
    require(Z.rank() == 2, "supcon: expects (B, D)");
    require(tau > 0.0, "supcon: temperature must be positive");
    const int n = Z.dim(0), d = Z.dim(1);
    require(static_cast<std::size_t>(n) == labels.size(), "supcon: label count mismatch");
    CMapR zm(Z.ptr(), n, d);
    const RowMat s = zm * zm.transpose() / tau;

    // dL/dS, filled during the forward pass.
    auto ds = std::make_shared<RowMat>(RowMat::Zero(n, n));
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        int npos = 0;
        double mx = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < n; ++a) {
            if (a == i) continue;
            mx = std::max(mx, s(i, a));
            if (labels[a] == labels[i]) ++npos;
        }
        if (npos == 0) throw InvalidParameter("supcon: sample without a positive in the batch");
        double denom = 0.0;
        for (int a = 0; a < n; ++a) {
            if (a != i) denom += std::exp(s(i, a) - mx);
        }
        const double log_denom = mx + std::log(denom);
        double li = 0.0;
        for (int a = 0; a < n; ++a) {
            if (a == i) continue;
            double g = std::exp(s(i, a) - log_denom);
            if (labels[a] == labels[i]) {
                li -= (s(i, a) - log_denom) / npos;
                g -= 1.0 / npos;
            }
            (*ds)(i, a) = scale * g;
        }
        loss += li;
    }
    Tensor out({1}, scale * loss);
    return t.record(std::move(out), {z}, [z, ds, n, d, tau](Tape& t, Var self) {
        const double g = t.grad(self).data[0];
        CMapR zm(t.value(z).ptr(), n, d);
        MapR dz(t.grad(z).ptr(), n, d);
        dz.noalias() += (g / tau) * ((*ds + ds->transpose()) * zm);
    });
}

Var softmax_cross_entropy(Tape& t, Var logits, std::span<const int> labels) {
    const Tensor& L = t.value(logits);
    require(L.rank() == 2, "softmax_cross_entropy: expects (B, C)");
    const int batch = L.dim(0), c = L.dim(1);
    require(static_cast<std::size_t>(batch) == labels.size() && batch > 0, "softmax_cross_entropy: label count");
    auto prob = std::make_shared<RowMat>(batch, c);
    CMapR lm(L.ptr(), batch, c);
    double loss = 0.0;
    for (int i = 0; i < batch; ++i) {
        require(labels[i] >= 0 && labels[i] < c, "softmax_cross_entropy: label out of range");
        const double mx = lm.row(i).maxCoeff();
        const double lse = mx + std::log((lm.row(i).array() - mx).exp().sum());
        prob->row(i) = (lm.row(i).array() - lse).exp();
        loss += lse - lm(i, labels[i]);
    }
    std::vector<int> y(labels.begin(), labels.end());
    return t.record(Tensor({1}, loss / batch), {logits}, [logits, prob, y, batch, c](Tape& t, Var self) {
        const double g = t.grad(self).data[0] / batch;
        MapR dl(t.grad(logits).ptr(), batch, c);
        for (int i = 0; i < batch; ++i) {
            dl.row(i) += g * prob->row(i);
            dl(i, y[i]) -= g;
        }
    });
}

Var weighted_sum(Tape& t, Var x, const Tensor& weights) {
    const Tensor& X = t.value(x);
    require(X.size() == weights.size(), "weighted_sum: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) s += X.data[i] * weights.data[i];
    return t.record(Tensor({1}, s), {x}, [x, weights](Tape& t, Var self) {
        const double g = t.grad(self).data[0];
        Tensor& gx = t.grad(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += g * weights.data[i];
    });
}

}  // namespace tslab::learn
