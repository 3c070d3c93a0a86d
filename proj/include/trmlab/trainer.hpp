#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "trmlab/datastream.hpp"
#include "trmlab/errors.hpp"
#include "trmlab/mlp.hpp"
#include "trmlab/rng.hpp"
#include "trmlab/vecops.hpp"

namespace trmlab {

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    bool cosine_anneal = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ContractViolation("TrainConfig: learning_rate must be > 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw ContractViolation("TrainConfig: betas must lie in [0, 1)");
        if (batch_size == 0) throw ContractViolation("TrainConfig: batch_size must be >= 1");
    }
};

struct TrainReport {
    std::vector<double> epoch_loss;  // mean loss per epoch, sample-weighted
    double final_train_accuracy = 0.0;
    std::size_t steps = 0;
};

struct AdamwState {
    ParamVec m;
    ParamVec v;

    explicit AdamwState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Learning-rate multiplier decaying from 1 to 0.01 across total_steps.
inline double cosine_lr_scale(std::size_t step, std::size_t total_steps) {
    if (total_steps <= 1) return 1.0;
    const double progress =
        static_cast<double>(step - 1) / static_cast<double>(total_steps - 1);
    return 0.01 + 0.99 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// One decoupled-weight-decay Adam update. The decay multiplies theta before
// the bias-corrected adaptive term is subtracted; lr_scale applies the
// schedule to both pieces.
inline ParamVec adamw_step(const ParamVec& theta, const ParamVec& grad, AdamwState& state,
                           const TrainConfig& cfg, std::size_t step, double lr_scale = 1.0) {
    if (theta.size() != grad.size() || theta.size() != state.m.size())
        throw ContractViolation("adamw_step: length mismatch");
    if (step < 1) throw ContractViolation("adamw_step: step must be >= 1");

    const double lr = cfg.learning_rate * lr_scale;
    const double decay_scale = 1.0 - lr * cfg.weight_decay;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));

    ParamVec out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        out[i] = theta[i] * decay_scale - lr * m_hat / (std::sqrt(v_hat) + cfg.eps_adam);
    }
    return out;
}

// Finetune a copy of `start` on one task. Fully determined by (cfg.seed,
// start): shuffling uses a module-local stream, batches run in shuffled
// order with a trailing partial batch.
inline std::pair<ModelParams, TrainReport> finetune(const ModelParams& start,
                                                    const TaskDataset& data,
                                                    const TrainConfig& cfg) {
    cfg.validate();
    if (data.train.size() == 0) throw ContractViolation("finetune: empty training split");

    ModelParams model = start;
    TrainReport report;
    const std::size_t n = data.train.size();
    const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * batches_per_epoch;

    AdamwState state(model.theta.size());
    RngState shuffle_rng{cfg.seed, 0};
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(shuffle_rng, order);
        double epoch_loss_sum = 0.0;
        for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
            const std::size_t bn = std::min(cfg.batch_size, n - b0);
            DenseMatrix x(bn, data.train.features.cols);
            std::vector<std::size_t> y(bn);
            for (std::size_t r = 0; r < bn; ++r) {
                const std::size_t src = order[b0 + r];
                std::copy(data.train.features.row(src),
                          data.train.features.row(src) + x.cols, x.row(r));
                y[r] = data.train.labels[src];
            }
            auto [loss, grad] = loss_and_grad(model, x, y);
            if (!std::isfinite(loss)) throw NumericFailure("finetune: non-finite training loss");
            ++step;
            const double scale = cfg.cosine_anneal ? cosine_lr_scale(step, total_steps) : 1.0;
            model.theta = adamw_step(model.theta, grad, state, cfg, step, scale);
            epoch_loss_sum += loss * static_cast<double>(bn);
        }
        report.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(n));
    }
    report.steps = step;

    std::size_t correct = 0;
    const auto preds = predict(model, data.train.features);
    for (std::size_t i = 0; i < n; ++i)
        if (preds[i] == data.train.labels[i]) ++correct;
    report.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return {std::move(model), std::move(report)};
}

}  // namespace trmlab
