#pragma once

#include <cstdint>
#include <vector>

#include "tsmx/datasets.hpp"
#include "tsmx/model.hpp"

namespace tsmx {

struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.5;
    double weight_decay = 5e-4;
    std::size_t batch_size = 128;
    std::size_t epochs = 20;
    std::vector<std::size_t> lr_decay_epochs;
    double lr_decay_factor = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch;
    double loss;   // mean training loss over the epoch
    double error;  // training error rate over the epoch
};

/// One Nesterov step over a parameter set:
///   g' = g + wd * p;  v <- m * v + g';  p <- p - lr * (g' + m * v)
void sgd_nesterov_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                       std::vector<Tensor>& velocity, double lr, double momentum,
                       double weight_decay);

/// Mini-batch SGD with Nesterov momentum. Shuffling and every update are
/// pure functions of (model, dataset, cfg), so equal seeds give
/// bit-identical parameters.
std::vector<EpochStats> train(Model& model, const LabeledDataset& data,
                              const TrainConfig& cfg);

/// Argmax class per column; ties break toward the lowest class index.
std::vector<std::size_t> predict(const Model& model, const Tensor& X);

/// Fraction of misclassified samples.
double evaluate_error(const Model& model, const LabeledDataset& data);

}  // namespace tsmx
