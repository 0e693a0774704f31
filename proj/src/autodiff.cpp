#include "tsmx/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace tsmx {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

namespace {

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite())
        throw DomainError(std::string(op) + ": non-finite value in result");
}

struct AxisSplit {
    std::size_t outer, axlen, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
    if (axis >= shape.size())
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(shape));
    AxisSplit s{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out;
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (i != axis) out.push_back(shape[i]);
    return out;
}

}  // namespace

Var Tape::leaf(Tensor value) {
    check_finite(value, "leaf");
    nodes_.push_back(Node{std::move(value), {}});
    grads_.emplace_back();
    return Var{this, nodes_.size() - 1};
}

Var Tape::node(Tensor value, BackFn back) {
    check_finite(value, "op");
    nodes_.push_back(Node{std::move(value), std::move(back)});
    grads_.emplace_back();
    return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
    Tensor& g = grads_[id];
    if (g.data.empty()) g = Tensor::zeros(nodes_[id].value.shape);
    return g;
}

void Tape::backward(Var output) {
    if (output.tape != this) throw Error("backward: node from another tape");
    if (!output.value().is_scalar())
        throw DimensionError("backward: output must be scalar, got shape " +
                             shape_str(output.value().shape));
    grad(output.id).data[0] = 1.0;
    for (std::size_t i = output.id + 1; i-- > 0;) {
        if (nodes_[i].back && has_grad(i)) nodes_[i].back(*this, grads_[i]);
    }
}

// ---- matmul ----

Var matmul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
        throw DimensionError("matmul: incompatible shapes " + shape_str(A.shape) +
                             " and " + shape_str(B.shape));
    Tensor out = Tensor::zeros({A.rows(), B.cols()});
    MapM(out.data.data(), A.rows(), B.cols()) =
        MapCM(A.data.data(), A.rows(), A.cols()) * MapCM(B.data.data(), B.rows(), B.cols());
    std::size_t ai = a.id, bi = b.id;
    return a.tape->node(std::move(out), [ai, bi](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(ai);
        const Tensor& B = t.value(bi);
        MapCM G(g.data.data(), A.rows(), B.cols());
        MapCM Am(A.data.data(), A.rows(), A.cols());
        MapCM Bm(B.data.data(), B.rows(), B.cols());
        Tensor& da = t.grad(ai);
        Tensor& db = t.grad(bi);
        MapM(da.data.data(), A.rows(), A.cols()).noalias() += G * Bm.transpose();
        MapM(db.data.data(), B.rows(), B.cols()).noalias() += Am.transpose() * G;
    });
}

// ---- elementwise ----

namespace {

// Binary broadcast: equal shapes, or one scalar operand.
template <typename Fwd, typename Bwd>
Var binary_op(Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    bool a_scalar = A.is_scalar(), b_scalar = B.is_scalar();
    if (!a_scalar && !b_scalar && !A.same_shape(B))
        throw DimensionError(std::string(name) + ": shape mismatch " +
                             shape_str(A.shape) + " vs " + shape_str(B.shape));
    const Shape& out_shape = a_scalar ? B.shape : A.shape;
    Tensor out = Tensor::zeros(out_shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = fwd(A.data[a_scalar ? 0 : i], B.data[b_scalar ? 0 : i]);
    std::size_t ai = a.id, bi = b.id;
    return a.tape->node(std::move(out),
                        [ai, bi, a_scalar, b_scalar, bwd](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(ai);
        const Tensor& B = t.value(bi);
        Tensor& da = t.grad(ai);
        Tensor& db = t.grad(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double x = A.data[a_scalar ? 0 : i];
            double y = B.data[b_scalar ? 0 : i];
            auto [dx, dy] = bwd(x, y);
            da.data[a_scalar ? 0 : i] += dx * g.data[i];
            db.data[b_scalar ? 0 : i] += dy * g.data[i];
        }
    });
}

template <typename Fwd, typename Bwd>
Var unary_op(Var a, const char* name, Fwd fwd, Bwd bwd) {
    const Tensor& A = a.value();
    Tensor out = Tensor::zeros(A.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = fwd(A.data[i]);
    std::size_t ai = a.id;
    return a.tape->node(std::move(out), [ai, bwd](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(ai);
        Tensor& da = t.grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i)
            da.data[i] += bwd(A.data[i]) * g.data[i];
    });
}

}  // namespace

Var add(Var a, Var b) {
    return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                     [](double, double) { return std::pair{1.0, 1.0}; });
}

Var sub(Var a, Var b) {
    return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                     [](double, double) { return std::pair{1.0, -1.0}; });
}

Var mul(Var a, Var b) {
    return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                     [](double x, double y) { return std::pair{y, x}; });
}

Var add(Var a, double s) {
    return unary_op(a, "add", [s](double x) { return x + s; },
                    [](double) { return 1.0; });
}

Var mul(Var a, double s) {
    return unary_op(a, "mul", [s](double x) { return x * s; },
                    [s](double) { return s; });
}

Var neg(Var a) {
    return unary_op(a, "neg", [](double x) { return -x; },
                    [](double) { return -1.0; });
}

Var relu(Var a) {
    // subgradient 0 at exactly 0
    return unary_op(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
    return unary_op(a, "exp", [](double x) { return std::exp(x); },
                    [](double x) { return std::exp(x); });
}

Var log(Var a) {
    const Tensor& A = a.value();
    for (double v : A.data)
        if (v <= 0.0) throw DomainError("log: argument " + std::to_string(v) + " <= 0");
    return unary_op(a, "log", [](double x) { return std::log(x); },
                    [](double x) { return 1.0 / x; });
}

Var log1p(Var a) {
    const Tensor& A = a.value();
    for (double v : A.data)
        if (v <= -1.0) throw DomainError("log1p: argument " + std::to_string(v) + " <= -1");
    return unary_op(a, "log1p", [](double x) { return std::log1p(x); },
                    [](double x) { return 1.0 / (1.0 + x); });
}

Var pow_scalar(Var a, double p) {
    return unary_op(a, "pow_scalar", [p](double x) { return std::pow(x, p); },
                    [p](double x) { return p * std::pow(x, p - 1.0); });
}

Var clamp_nonneg(Var a, double tol) {
    const Tensor& A = a.value();
    for (double v : A.data)
        if (v < -tol)
            throw DomainError("clamp_nonneg: value " + std::to_string(v) +
                              " below -" + std::to_string(tol));
    return unary_op(a, "clamp_nonneg", [](double x) { return x < 0.0 ? 0.0 : x; },
                    [](double x) { return x >= 0.0 ? 1.0 : 0.0; });
}

// ---- bias broadcasts ----

Var add_bias_rows(Var m, Var bias) {
    const Tensor& M = m.value();
    const Tensor& B = bias.value();
    if (M.rank() != 2 || B.rank() != 1 || B.shape[0] != M.rows())
        throw DimensionError("add_bias_rows: shapes " + shape_str(M.shape) + " and " +
                             shape_str(B.shape));
    Tensor out = Tensor::zeros(M.shape);
    for (std::size_t r = 0; r < M.rows(); ++r)
        for (std::size_t c = 0; c < M.cols(); ++c)
            out.at(r, c) = M.at(r, c) + B.data[r];
    std::size_t mi = m.id, bi = bias.id;
    return m.tape->node(std::move(out), [mi, bi](Tape& t, const Tensor& g) {
        Tensor& dm = t.grad(mi);
        Tensor& db = t.grad(bi);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) {
                dm.at(r, c) += g.at(r, c);
                db.data[r] += g.at(r, c);
            }
    });
}

Var add_bias_cols(Var m, Var row) {
    const Tensor& M = m.value();
    const Tensor& R = row.value();
    if (M.rank() != 2 || R.rank() != 1 || R.shape[0] != M.cols())
        throw DimensionError("add_bias_cols: shapes " + shape_str(M.shape) + " and " +
                             shape_str(R.shape));
    Tensor out = Tensor::zeros(M.shape);
    for (std::size_t r = 0; r < M.rows(); ++r)
        for (std::size_t c = 0; c < M.cols(); ++c)
            out.at(r, c) = M.at(r, c) + R.data[c];
    std::size_t mi = m.id, ri = row.id;
    return m.tape->node(std::move(out), [mi, ri](Tape& t, const Tensor& g) {
        Tensor& dm = t.grad(mi);
        Tensor& dr = t.grad(ri);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) {
                dm.at(r, c) += g.at(r, c);
                dr.data[c] += g.at(r, c);
            }
    });
}

// ---- reductions ----

Var sum(Var a) {
    const Tensor& A = a.value();
    double s = 0.0;
    for (double v : A.data) s += v;
    std::size_t ai = a.id;
    return a.tape->node(Tensor::scalar(s), [ai](Tape& t, const Tensor& g) {
        Tensor& da = t.grad(ai);
        for (double& v : da.data) v += g.data[0];
    });
}

Var mean(Var a) {
    const Tensor& A = a.value();
    double n = static_cast<double>(A.size());
    double s = 0.0;
    for (double v : A.data) s += v;
    std::size_t ai = a.id;
    return a.tape->node(Tensor::scalar(s / n), [ai, n](Tape& t, const Tensor& g) {
        Tensor& da = t.grad(ai);
        for (double& v : da.data) v += g.data[0] / n;
    });
}

Var sum_over_axis(Var a, std::size_t axis) {
    const Tensor& A = a.value();
    AxisSplit s = split_axis(A.shape, axis, "sum_over_axis");
    Tensor out = Tensor::zeros(drop_axis(A.shape, axis));
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < s.axlen; ++k)
            for (std::size_t i = 0; i < s.inner; ++i)
                out.data[o * s.inner + i] += A.data[(o * s.axlen + k) * s.inner + i];
    std::size_t ai = a.id;
    return a.tape->node(std::move(out), [ai, s](Tape& t, const Tensor& g) {
        Tensor& da = t.grad(ai);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t k = 0; k < s.axlen; ++k)
                for (std::size_t i = 0; i < s.inner; ++i)
                    da.data[(o * s.axlen + k) * s.inner + i] += g.data[o * s.inner + i];
    });
}

Var max_over_axis(Var a, std::size_t axis) {
    const Tensor& A = a.value();
    AxisSplit s = split_axis(A.shape, axis, "max_over_axis");
    Tensor out = Tensor::zeros(drop_axis(A.shape, axis));
    std::vector<std::size_t> arg(out.size());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_k = 0;
            for (std::size_t k = 0; k < s.axlen; ++k) {
                double v = A.data[(o * s.axlen + k) * s.inner + i];
                if (v > best) {
                    best = v;
                    best_k = k;
                }
            }
            out.data[o * s.inner + i] = best;
            arg[o * s.inner + i] = best_k;
        }
    std::size_t ai = a.id;
    return a.tape->node(std::move(out), [ai, s, arg = std::move(arg)](Tape& t, const Tensor& g) {
        Tensor& da = t.grad(ai);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < s.inner; ++i) {
                std::size_t k = arg[o * s.inner + i];
                da.data[(o * s.axlen + k) * s.inner + i] += g.data[o * s.inner + i];
            }
    });
}

Var logsumexp_over_axis(Var a, std::size_t axis) {
    const Tensor& A = a.value();
    AxisSplit s = split_axis(A.shape, axis, "logsumexp_over_axis");
    Tensor out = Tensor::zeros(drop_axis(A.shape, axis));
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < s.axlen; ++k)
                m = std::max(m, A.data[(o * s.axlen + k) * s.inner + i]);
            double acc = 0.0;
            for (std::size_t k = 0; k < s.axlen; ++k)
                acc += std::exp(A.data[(o * s.axlen + k) * s.inner + i] - m);
            out.data[o * s.inner + i] = m + std::log(acc);
        }
    std::size_t ai = a.id;
    return a.tape->node(std::move(out), [ai, s](Tape& t, const Tensor& g) {
        const Tensor& A = t.value(ai);
        // recompute the lse to form softmax weights
        Tensor& da = t.grad(ai);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < s.inner; ++i) {
                double m = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < s.axlen; ++k)
                    m = std::max(m, A.data[(o * s.axlen + k) * s.inner + i]);
                double acc = 0.0;
                for (std::size_t k = 0; k < s.axlen; ++k)
                    acc += std::exp(A.data[(o * s.axlen + k) * s.inner + i] - m);
                double go = g.data[o * s.inner + i];
                for (std::size_t k = 0; k < s.axlen; ++k) {
                    double w = std::exp(A.data[(o * s.axlen + k) * s.inner + i] - m) / acc;
                    da.data[(o * s.axlen + k) * s.inner + i] += w * go;
                }
            }
    });
}

// ---- convolution / pooling ----

namespace {

struct ConvDims {
    std::size_t b, c, h, w, o, kh, kw, oh, ow;
};

ConvDims conv_dims(const Tensor& in, const Tensor& ker) {
    if (in.rank() != 4 || ker.rank() != 4)
        throw DimensionError("conv2d: expected 4-d input and kernel, got " +
                             shape_str(in.shape) + " and " + shape_str(ker.shape));
    ConvDims d{in.shape[0], in.shape[1], in.shape[2], in.shape[3],
               ker.shape[0], ker.shape[2], ker.shape[3], 0, 0};
    if (ker.shape[1] != d.c)
        throw DimensionError("conv2d: channel mismatch " + shape_str(in.shape) +
                             " vs " + shape_str(ker.shape));
    if (d.kh > d.h || d.kw > d.w)
        throw DimensionError("conv2d: kernel " + shape_str(ker.shape) +
                             " larger than input " + shape_str(in.shape));
    d.oh = d.h - d.kh + 1;
    d.ow = d.w - d.kw + 1;
    return d;
}

// patches [c*kh*kw x oh*ow] for one image
void im2col(const double* img, const ConvDims& d, double* patches) {
    std::size_t prow = 0;
    for (std::size_t ch = 0; ch < d.c; ++ch)
        for (std::size_t di = 0; di < d.kh; ++di)
            for (std::size_t dj = 0; dj < d.kw; ++dj, ++prow) {
                double* dst = patches + prow * (d.oh * d.ow);
                const double* src = img + ch * d.h * d.w;
                for (std::size_t i = 0; i < d.oh; ++i)
                    for (std::size_t j = 0; j < d.ow; ++j)
                        dst[i * d.ow + j] = src[(i + di) * d.w + (j + dj)];
            }
}

void col2im_add(const double* patches, const ConvDims& d, double* img) {
    std::size_t prow = 0;
    for (std::size_t ch = 0; ch < d.c; ++ch)
        for (std::size_t di = 0; di < d.kh; ++di)
            for (std::size_t dj = 0; dj < d.kw; ++dj, ++prow) {
                const double* src = patches + prow * (d.oh * d.ow);
                double* dst = img + ch * d.h * d.w;
                for (std::size_t i = 0; i < d.oh; ++i)
                    for (std::size_t j = 0; j < d.ow; ++j)
                        dst[(i + di) * d.w + (j + dj)] += src[i * d.ow + j];
            }
}

}  // namespace

Var conv2d(Var input, Var kernel, Var bias) {
    const Tensor& In = input.value();
    const Tensor& K = kernel.value();
    const Tensor& B = bias.value();
    ConvDims d = conv_dims(In, K);
    if (B.rank() != 1 || B.shape[0] != d.o)
        throw DimensionError("conv2d: bias shape " + shape_str(B.shape));
    Tensor out = Tensor::zeros({d.b, d.o, d.oh, d.ow});
    std::size_t krows = d.c * d.kh * d.kw, ocols = d.oh * d.ow;
    std::vector<double> patches(krows * ocols);
    MapCM Km(K.data.data(), d.o, krows);
    for (std::size_t bi = 0; bi < d.b; ++bi) {
        im2col(In.data.data() + bi * d.c * d.h * d.w, d, patches.data());
        MapM Om(out.data.data() + bi * d.o * ocols, d.o, ocols);
        Om.noalias() = Km * MapCM(patches.data(), krows, ocols);
        for (std::size_t oc = 0; oc < d.o; ++oc)
            Om.row(oc).array() += B.data[oc];
    }
    std::size_t ii = input.id, ki = kernel.id, bid = bias.id;
    return input.tape->node(std::move(out), [ii, ki, bid, d](Tape& t, const Tensor& g) {
        const Tensor& In = t.value(ii);
        const Tensor& K = t.value(ki);
        Tensor& din = t.grad(ii);
        Tensor& dk = t.grad(ki);
        Tensor& db = t.grad(bid);
        std::size_t krows = d.c * d.kh * d.kw, ocols = d.oh * d.ow;
        std::vector<double> patches(krows * ocols), dpatches(krows * ocols);
        MapCM Km(K.data.data(), d.o, krows);
        MapM dKm(dk.data.data(), d.o, krows);
        for (std::size_t bi = 0; bi < d.b; ++bi) {
            MapCM Gm(g.data.data() + bi * d.o * ocols, d.o, ocols);
            im2col(In.data.data() + bi * d.c * d.h * d.w, d, patches.data());
            dKm.noalias() += Gm * MapCM(patches.data(), krows, ocols).transpose();
            MapM(dpatches.data(), krows, ocols).noalias() = Km.transpose() * Gm;
            col2im_add(dpatches.data(), d, din.data.data() + bi * d.c * d.h * d.w);
            for (std::size_t oc = 0; oc < d.o; ++oc)
                db.data[oc] += Gm.row(oc).sum();
        }
    });
}

Var maxpool2d(Var input) {
    const Tensor& In = input.value();
    if (In.rank() != 4)
        throw DimensionError("maxpool2d: expected 4-d input, got " + shape_str(In.shape));
    std::size_t b = In.shape[0], c = In.shape[1], h = In.shape[2], w = In.shape[3];
    if (h % 2 != 0 || w % 2 != 0)
        throw DimensionError("maxpool2d: spatial extents must be even, got " +
                             shape_str(In.shape));
    std::size_t oh = h / 2, ow = w / 2;
    Tensor out = Tensor::zeros({b, c, oh, ow});
    std::vector<std::size_t> arg(out.size());
    for (std::size_t n = 0; n < b * c; ++n) {
        const double* img = In.data.data() + n * h * w;
        double* dst = out.data.data() + n * oh * ow;
        std::size_t* adst = arg.data() + n * oh * ow;
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                std::size_t base = 2 * i * w + 2 * j;
                std::size_t best = base;
                double bv = img[base];
                // first-scanned wins ties
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        std::size_t idx = base + di * w + dj;
                        if (img[idx] > bv) {
                            bv = img[idx];
                            best = idx;
                        }
                    }
                dst[i * ow + j] = bv;
                adst[i * ow + j] = n * h * w + best;
            }
    }
    std::size_t ii = input.id;
    return input.tape->node(std::move(out), [ii, arg = std::move(arg)](Tape& t, const Tensor& g) {
        Tensor& din = t.grad(ii);
        for (std::size_t i = 0; i < g.size(); ++i) din.data[arg[i]] += g.data[i];
    });
}

Var flatten_columns(Var input) {
    const Tensor& In = input.value();
    if (In.rank() < 2)
        throw DimensionError("flatten_columns: expected rank >= 2, got " +
                             shape_str(In.shape));
    std::size_t b = In.shape[0];
    std::size_t f = In.size() / b;
    Tensor out = Tensor::zeros({f, b});
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t k = 0; k < f; ++k)
            out.data[k * b + s] = In.data[s * f + k];
    std::size_t ii = input.id;
    return input.tape->node(std::move(out), [ii, b, f](Tape& t, const Tensor& g) {
        Tensor& din = t.grad(ii);
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t k = 0; k < f; ++k)
                din.data[s * f + k] += g.data[k * b + s];
    });
}

Var nll_loss(Var logp, const std::vector<std::size_t>& targets) {
    const Tensor& L = logp.value();
    if (L.rank() != 2 || L.cols() != targets.size())
        throw DimensionError("nll_loss: logp " + shape_str(L.shape) + " vs " +
                             std::to_string(targets.size()) + " targets");
    for (std::size_t t : targets)
        if (t >= L.rows())
            throw DomainError("nll_loss: target " + std::to_string(t) +
                              " >= " + std::to_string(L.rows()) + " classes");
    double n = static_cast<double>(targets.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < targets.size(); ++j) acc -= L.at(targets[j], j);
    std::size_t li = logp.id;
    return logp.tape->node(Tensor::scalar(acc / n),
                           [li, targets, n](Tape& t, const Tensor& g) {
        Tensor& dl = t.grad(li);
        for (std::size_t j = 0; j < targets.size(); ++j)
            dl.at(targets[j], j) -= g.data[0] / n;
    });
}

}  // namespace tsmx
