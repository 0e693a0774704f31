#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "tsmx/autodiff.hpp"
#include "tsmx/layers.hpp"
#include "tsmx/tensor.hpp"

namespace tsmx {

enum class HeadKind { softmax, t_softmax };

std::string head_name(HeadKind h);
HeadKind head_from_name(const std::string& s);

struct Conv2dLayer {
    Tensor kernel;  // [o x c x kh x kw]
    Tensor bias;    // [o]
};
struct MaxPool2Layer {};
struct ReluLayer {};
struct FlattenLayer {};

using Layer = std::variant<Conv2dLayer, MaxPool2Layer, ReluLayer, FlattenLayer,
                           FullyConnected, QuadraticLayer>;

/// Ordered layer list plus output head. With a t-softmax head the final
/// layer must be a QuadraticLayer so the head input is nonnegative.
struct Model {
    std::string name;
    std::vector<Layer> layers;
    HeadKind head = HeadKind::softmax;
    double nu = 1.0;

    /// Whether the model consumes image batches [b x c x h x w]
    /// (otherwise column matrices [d x nb]).
    bool image_input() const;

    void validate() const;

    struct Graph {
        Var head_input;  // logits Z (softmax) or distances Y (t-softmax)
        Var logp;        // column-wise log probabilities
        std::vector<Var> params;  // leaves, in for_each_param order
    };
    /// Records the full forward pass on the tape. `x` must already be a
    /// node of `tape`.
    Graph build(Tape& tape, Var x) const;

    void for_each_param(const std::function<void(Tensor&)>& fn);
    void for_each_param(const std::function<void(const Tensor&)>& fn) const;
    std::size_t param_count() const;

    /// Forward-only head input (scratch tape, discarded).
    Tensor head_input_value(const Tensor& X) const;
    /// Column-wise class probabilities for a batch of inputs.
    Tensor probabilities(const Tensor& X) const;
};

Model make_toy_mlp(HeadKind head, double nu, std::uint64_t seed);
Model make_cnn(HeadKind head, double nu, std::uint64_t seed);
/// Presets: "toy-mlp" (2-d, 3 classes) and "cnn" (28x28 grayscale, 10 classes).
Model make_preset(const std::string& preset, HeadKind head, double nu,
                  std::uint64_t seed);

/// TSMX v1: text manifest (one line per layer, head line carries nu),
/// then raw little-endian doubles in manifest order.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace tsmx
