#pragma once

#include <vector>

#include "tsmx/autodiff.hpp"
#include "tsmx/tensor.hpp"

namespace tsmx {

/// Ordinary affine layer; W and b are free parameters.
struct FullyConnected {
    Tensor W;  // [out x in]
    Tensor b;  // [out]
};

/// Distance layer: output row i, column j equals ||x_j + w_i/2||^2. The
/// bias is not free, it is tied to the weights as b_i = ||w_i||^2 / 4, so
/// W is the only parameter and the output is nonnegative by construction.
struct QuadraticLayer {
    Tensor W;  // [out x in]
};

struct TSoftmaxHead {
    double nu = 1.0;  // degrees of freedom, fixed hyperparameter
};

// Forward-only evaluation on plain tensors. X has samples as columns.

Tensor fc_forward(const FullyConnected& layer, const Tensor& X);

/// Computed with out+batch dot products; the rank-one offset matrices are
/// never materialized. Rounding negatives are clamped to 0; anything below
/// -1e-9 is an error.
Tensor quadratic_forward(const QuadraticLayer& layer, const Tensor& X);

/// Column-wise exp-normalize with max subtraction.
Tensor softmax(const Tensor& Z);

/// Column-wise p_i = (1 + y_i/nu)^(-(nu+1)/2) normalized. Evaluated in the
/// log domain (log1p then log-sum-exp); requires Y >= 0.
Tensor t_softmax(const Tensor& Y, double nu);

/// Mean over batch of -log p_target. Columns of probs must sum to 1
/// within 1e-9.
double cross_entropy_loss(const Tensor& probs, const std::vector<std::size_t>& targets);

// Tape-side compositions used during training.

Var fc_forward(Var W, Var b, Var X);
Var quadratic_forward(Var W, Var X);
/// Column-wise log probabilities of softmax(Z).
Var log_softmax_cols(Var Z);
/// Column-wise log probabilities of t_softmax(Y, nu).
Var log_t_softmax_cols(Var Y, double nu);

}  // namespace tsmx
