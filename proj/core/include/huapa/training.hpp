#pragma once

#include "huapa/autodiff.hpp"
#include "huapa/data.hpp"
#include "huapa/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace huapa {

struct AdamConfig {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    AdamState(std::vector<ad::Parameter*> params, const AdamConfig& config);

    const AdamConfig& config() const noexcept { return m_config; }
    std::uint64_t steps() const noexcept { return m_t; }
    std::span<ad::Parameter* const> params() const noexcept { return m_params; }
    std::span<const double> first_moment(std::size_t i) const { return m_m[i]; }
    std::span<const double> second_moment(std::size_t i) const { return m_v[i]; }

private:
    friend void adam_step(AdamState& state);

    AdamConfig m_config;
    std::vector<ad::Parameter*> m_params;
    std::vector<std::vector<double>> m_m;
    std::vector<std::vector<double>> m_v;
    std::uint64_t m_t = 0;
};

// One bias-corrected Adam update of every registered parameter from its
// current grad. Throws Error(numeric) naming a parameter with a non-finite
// gradient; nothing is updated in that case.
void adam_step(AdamState& state);

// Rescales all grads so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<ad::Parameter* const> params, double max_norm);

struct TrainConfig {
    AdamConfig adam;
    LossWeights lambdas;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 20;
    std::size_t patience = 3;
    std::uint64_t seed = 1;
    double clip_norm = 0.0;  // 0 disables clipping
    std::size_t eval_threads = 1;

    // Throws Error(config) on negative weights, zero batch size, ...
    void validate() const;
};

struct EvalResult {
    double accuracy = 0.0;
    double rmse = 0.0;
    std::size_t count = 0;
    std::size_t classes = 0;
    std::vector<std::size_t> confusion;  // [gold][predicted], row-major

    std::size_t at(std::size_t gold, std::size_t predicted) const { return confusion[gold * classes + predicted]; }
};

// Accuracy and RMSE on the 1-based rating scale from 0-based class pairs.
EvalResult score_predictions(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                             std::size_t classes);
EvalResult score_confusion(std::vector<std::size_t> confusion, std::size_t classes);

std::vector<std::size_t> predict_all(const HuapaModel& model, std::span<const EncodedDoc> docs,
                                     std::size_t threads = 1);
EvalResult evaluate(const HuapaModel& model, std::span<const EncodedDoc> docs, std::size_t threads = 1);

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;      // mean weighted loss per document
    double loss1 = 0.0;     // mean cross-entropy of each head
    double loss2 = 0.0;
    double loss3 = 0.0;
    double dev_accuracy = 0.0;
    double dev_rmse = 0.0;
    double best_dev_accuracy = 0.0;
    std::size_t best_epoch = 0;
};

struct BatchLog {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    std::size_t documents = 0;
    double loss = 0.0;  // sums over the batch
    double loss1 = 0.0;
    double loss2 = 0.0;
    double loss3 = 0.0;
    std::uint64_t adam_steps = 0;
};

struct TrainHooks {
    std::function<void(const BatchLog&)> on_batch;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    double best_dev_accuracy = 0.0;
    std::uint64_t steps = 0;
    std::size_t peak_tape_nodes = 0;
};

// Mini-batch Adam on the combined loss. Training documents are shuffled
// each epoch; gradients of the mean batch loss are accumulated document by
// document, then one optimizer step is taken. After every epoch the dev
// set is scored and the parameters with the best dev accuracy (earliest on
// ties) are kept; training stops once `patience` epochs pass without
// improvement. On return the model holds the best parameters.
TrainResult train(const TrainConfig& config, HuapaModel& model, std::span<const EncodedDoc> train_docs,
                  std::span<const EncodedDoc> dev_docs, const TrainHooks& hooks = {});

}  // namespace huapa
