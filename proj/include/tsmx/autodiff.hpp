#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tsmx/tensor.hpp"

namespace tsmx {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
};

/// Reverse-mode tape. Nodes are appended in execution order, so the
/// insertion order is already topological; backward walks it once in
/// reverse. A tape is built per forward pass and discarded after backward.
class Tape {
 public:
    using BackFn = std::function<void(Tape&, const Tensor& out_grad)>;

    /// Leaf node (input or parameter). No backward rule; gradients
    /// accumulate into its slot.
    Var leaf(Tensor value);

    /// Interior node produced by an operation. `back` receives the
    /// gradient of the output and must accumulate into the parents.
    Var node(Tensor value, BackFn back);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }

    /// Gradient accumulator for a node, allocated to zeros on first touch.
    Tensor& grad(std::size_t id);

    /// Whether any gradient has been accumulated into the node.
    bool has_grad(std::size_t id) const { return !grads_[id].data.empty(); }

    /// Reverse sweep from a scalar output. Visits each node exactly once,
    /// in reverse insertion order; shared subexpressions accumulate.
    void backward(Var output);

    std::size_t size() const { return nodes_.size(); }

 private:
    struct Node {
        Tensor value;
        BackFn back;  // empty for leaves
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

// ---- primitive operations (each registers its backward rule) ----

Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add(Var a, double s);
Var mul(Var a, double s);
Var neg(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var log1p(Var a);
Var pow_scalar(Var a, double p);

/// Adds bias[i] to every entry of row i (per-class bias over a batch).
Var add_bias_rows(Var m, Var bias);
/// Adds row[j] to every entry of column j (per-sample constant).
Var add_bias_cols(Var m, Var row);

Var sum(Var a);
Var mean(Var a);
Var sum_over_axis(Var a, std::size_t axis);
Var max_over_axis(Var a, std::size_t axis);
/// Stabilized log-sum-exp reduction (max subtraction).
Var logsumexp_over_axis(Var a, std::size_t axis);

/// Valid (no padding), stride-1 cross-correlation.
/// input [b x c x h x w], kernel [o x c x kh x kw], bias [o].
Var conv2d(Var input, Var kernel, Var bias);

/// 2x2 window, stride 2; spatial extents must be even. Gradient routes to
/// the first-scanned argmax of each window.
Var maxpool2d(Var input);

/// [b x c x h x w] -> [c*h*w x b]; columns are samples.
Var flatten_columns(Var input);

/// Clamps values in [-tol, 0) to 0; anything below -tol is a contract
/// violation. Gradient passes through unclamped entries only.
Var clamp_nonneg(Var a, double tol);

/// Mean over the batch of -logp[targets[j], j]. logp is [N_c x N_b].
Var nll_loss(Var logp, const std::vector<std::size_t>& targets);

}  // namespace tsmx
