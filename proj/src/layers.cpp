#include "tsmx/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tsmx {

namespace {
constexpr double kNegTol = 1e-9;
}

Tensor fc_forward(const FullyConnected& layer, const Tensor& X) {
    const Tensor& W = layer.W;
    if (X.rank() != 2 || W.rank() != 2 || W.cols() != X.rows())
        throw DimensionError("fc_forward: W " + shape_str(W.shape) + " vs X " +
                             shape_str(X.shape));
    std::size_t nc = W.rows(), n = W.cols(), nb = X.cols();
    Tensor out = Tensor::zeros({nc, nb});
    for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = 0; j < nb; ++j) {
            double acc = layer.b.data[i];
            for (std::size_t k = 0; k < n; ++k) acc += W.at(i, k) * X.at(k, j);
            out.at(i, j) = acc;
        }
    return out;
}

Tensor quadratic_forward(const QuadraticLayer& layer, const Tensor& X) {
    const Tensor& W = layer.W;
    if (X.rank() != 2 || W.rank() != 2 || W.cols() != X.rows())
        throw DimensionError("quadratic_forward: W " + shape_str(W.shape) + " vs X " +
                             shape_str(X.shape));
    std::size_t nc = W.rows(), n = W.cols(), nb = X.cols();
    // out + batch dot products for the two rank-one offsets
    std::vector<double> a(nb, 0.0), b(nc, 0.0);
    for (std::size_t j = 0; j < nb; ++j)
        for (std::size_t k = 0; k < n; ++k) a[j] += X.at(k, j) * X.at(k, j);
    for (std::size_t i = 0; i < nc; ++i) {
        for (std::size_t k = 0; k < n; ++k) b[i] += W.at(i, k) * W.at(i, k);
        b[i] *= 0.25;
    }
    Tensor out = Tensor::zeros({nc, nb});
    for (std::size_t i = 0; i < nc; ++i)
        for (std::size_t j = 0; j < nb; ++j) {
            double acc = a[j] + b[i];
            for (std::size_t k = 0; k < n; ++k) acc += W.at(i, k) * X.at(k, j);
            if (acc < -kNegTol)
                throw DomainError("quadratic_forward: negative output " +
                                  std::to_string(acc));
            out.at(i, j) = std::max(acc, 0.0);
        }
    return out;
}

Tensor softmax(const Tensor& Z) {
    if (Z.rank() != 2)
        throw DimensionError("softmax: expected matrix, got " + shape_str(Z.shape));
    if (!Z.all_finite()) throw DomainError("softmax: non-finite input");
    Tensor out = Tensor::zeros(Z.shape);
    for (std::size_t j = 0; j < Z.cols(); ++j) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < Z.rows(); ++i) m = std::max(m, Z.at(i, j));
        double acc = 0.0;
        for (std::size_t i = 0; i < Z.rows(); ++i) {
            out.at(i, j) = std::exp(Z.at(i, j) - m);
            acc += out.at(i, j);
        }
        for (std::size_t i = 0; i < Z.rows(); ++i) out.at(i, j) /= acc;
    }
    return out;
}

Tensor t_softmax(const Tensor& Y, double nu) {
    if (Y.rank() != 2)
        throw DimensionError("t_softmax: expected matrix, got " + shape_str(Y.shape));
    if (nu <= 0.0) throw DomainError("t_softmax: nu must be positive");
    Tensor out = Tensor::zeros(Y.shape);
    double expo = -(nu + 1.0) / 2.0;
    for (std::size_t j = 0; j < Y.cols(); ++j) {
        // log weights, then exp-normalize via log-sum-exp
        std::vector<double> lw(Y.rows());
        for (std::size_t i = 0; i < Y.rows(); ++i) {
            double y = Y.at(i, j);
            if (y < -kNegTol)
                throw DomainError("t_softmax: negative input " + std::to_string(y));
            y = std::max(y, 0.0);
            lw[i] = expo * std::log1p(y / nu);
        }
        double m = *std::max_element(lw.begin(), lw.end());
        double acc = 0.0;
        for (double v : lw) acc += std::exp(v - m);
        double lse = m + std::log(acc);
        for (std::size_t i = 0; i < Y.rows(); ++i)
            out.at(i, j) = std::exp(lw[i] - lse);
    }
    return out;
}

double cross_entropy_loss(const Tensor& probs, const std::vector<std::size_t>& targets) {
    if (probs.rank() != 2 || probs.cols() != targets.size())
        throw DimensionError("cross_entropy_loss: probs " + shape_str(probs.shape) +
                             " vs " + std::to_string(targets.size()) + " targets");
    for (std::size_t j = 0; j < probs.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < probs.rows(); ++i) s += probs.at(i, j);
        if (std::abs(s - 1.0) > 1e-9)
            throw DomainError("cross_entropy_loss: column " + std::to_string(j) +
                              " sums to " + std::to_string(s));
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < targets.size(); ++j) {
        if (targets[j] >= probs.rows())
            throw DomainError("cross_entropy_loss: target " + std::to_string(targets[j]) +
                              " >= " + std::to_string(probs.rows()));
        double p = probs.at(targets[j], j);
        if (p <= 0.0)
            throw DomainError("cross_entropy_loss: zero probability at target");
        acc -= std::log(p);
    }
    return acc / static_cast<double>(targets.size());
}

Var fc_forward(Var W, Var b, Var X) {
    return add_bias_rows(matmul(W, X), b);
}

Var quadratic_forward(Var W, Var X) {
    Var wx = matmul(W, X);
    Var a = sum_over_axis(mul(X, X), 0);              // [batch]
    Var bq = mul(sum_over_axis(mul(W, W), 1), 0.25);  // [out]
    return clamp_nonneg(add_bias_rows(add_bias_cols(wx, a), bq), 1e-9);
}

Var log_softmax_cols(Var Z) {
    return add_bias_cols(Z, neg(logsumexp_over_axis(Z, 0)));
}

Var log_t_softmax_cols(Var Y, double nu) {
    if (nu <= 0.0) throw DomainError("log_t_softmax_cols: nu must be positive");
    Var lw = mul(log1p(mul(Y, 1.0 / nu)), -(nu + 1.0) / 2.0);
    Var lse = logsumexp_over_axis(lw, 0);
    // broadcast the column lse back over rows
    Var neg_lse = neg(lse);
    return add_bias_cols(lw, neg_lse);
}

}  // namespace tsmx
