#include "tsmx/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace tsmx {

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (lr_decay_factor <= 0.0) throw ConfigError("lr_decay_factor must be > 0");
}

void sgd_nesterov_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                       std::vector<Tensor>& velocity, double lr, double momentum,
                       double weight_decay) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw DimensionError("sgd_nesterov_step: tensor set sizes differ");
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        const Tensor& g = grads[t];
        Tensor& v = velocity[t];
        require_same_shape(p, g, "sgd_nesterov_step");
        require_same_shape(p, v, "sgd_nesterov_step");
        for (std::size_t i = 0; i < p.size(); ++i) {
            double gd = g.data[i] + weight_decay * p.data[i];
            v.data[i] = momentum * v.data[i] + gd;
            p.data[i] -= lr * (gd + momentum * v.data[i]);
        }
    }
}

std::vector<EpochStats> train(Model& model, const LabeledDataset& data,
                              const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (data.size() == 0) throw ConfigError("train: empty dataset");

    std::vector<Tensor*> params;
    model.for_each_param([&params](Tensor& t) { params.push_back(&t); });
    std::size_t n_classes = 0;
    if (auto* d = std::get_if<FullyConnected>(&model.layers.back()))
        n_classes = d->W.rows();
    else if (auto* q = std::get_if<QuadraticLayer>(&model.layers.back()))
        n_classes = q->W.rows();
    for (std::size_t l : data.labels)
        if (l >= n_classes)
            throw ConfigError("train: label " + std::to_string(l) + " >= " +
                              std::to_string(n_classes) + " classes");

    std::vector<Tensor> velocity;
    for (Tensor* p : params) velocity.push_back(Tensor::zeros(p->shape));

    bool columns = !model.image_input();
    double lr = cfg.learning_rate;
    std::vector<EpochStats> log;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (std::find(cfg.lr_decay_epochs.begin(), cfg.lr_decay_epochs.end(), epoch) !=
            cfg.lr_decay_epochs.end())
            lr *= cfg.lr_decay_factor;
        double loss_acc = 0.0;
        std::size_t wrong = 0;
        auto bs = batches(data, cfg.batch_size, cfg.seed * 1000003ULL + epoch,
                          /*shuffle=*/true, columns);
        for (const Batch& batch : bs) {
            Tape tape;
            Model::Graph g = model.build(tape, tape.leaf(batch.X));
            Var loss = nll_loss(g.logp, batch.y);
            tape.backward(loss);
            loss_acc += loss.value().data[0] * static_cast<double>(batch.y.size());
            const Tensor& logp = g.logp.value();
            for (std::size_t j = 0; j < batch.y.size(); ++j) {
                std::size_t best = 0;
                for (std::size_t i = 1; i < logp.rows(); ++i)
                    if (logp.at(i, j) > logp.at(best, j)) best = i;
                if (best != batch.y[j]) ++wrong;
            }
            std::vector<Tensor> grads;
            grads.reserve(params.size());
            for (Var p : g.params) grads.push_back(tape.grad(p.id));
            sgd_nesterov_step(params, grads, velocity, lr, cfg.momentum,
                              cfg.weight_decay);
        }
        double n = static_cast<double>(data.size());
        log.push_back(EpochStats{epoch, loss_acc / n, wrong / n});
    }
    return log;
}

std::vector<std::size_t> predict(const Model& model, const Tensor& X) {
    Tensor p = model.probabilities(X);
    std::vector<std::size_t> out(p.cols());
    for (std::size_t j = 0; j < p.cols(); ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < p.rows(); ++i)
            if (p.at(i, j) > p.at(best, j)) best = i;
        out[j] = best;
    }
    return out;
}

double evaluate_error(const Model& model, const LabeledDataset& data) {
    if (data.size() == 0) throw ConfigError("evaluate_error: empty dataset");
    bool columns = !model.image_input();
    std::size_t wrong = 0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        std::size_t count = std::min(chunk, data.size() - start);
        Tensor X = stack_samples(data.images, start, count, columns);
        std::vector<std::size_t> pred = predict(model, X);
        for (std::size_t j = 0; j < count; ++j)
            if (pred[j] != data.labels[start + j]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace tsmx
