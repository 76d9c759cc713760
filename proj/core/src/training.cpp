#include "huapa/training.hpp"

#include "huapa/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace huapa {

// ---- optimizer -------------------------------------------------------------

AdamState::AdamState(std::vector<ad::Parameter*> params, const AdamConfig& config)
  : m_config(config), m_params(std::move(params))
{
    for (const ad::Parameter* p : m_params) {
        if (!p->trainable()) fail(ErrorKind::config, "Adam given frozen parameter " + p->name());
        m_m.emplace_back(p->size(), 0.0);
        m_v.emplace_back(p->size(), 0.0);
    }
}

void adam_step(AdamState& state)
{
    for (const ad::Parameter* p : state.m_params) {
        for (double g : p->grad())
            if (!std::isfinite(g)) fail(ErrorKind::numeric, "non-finite gradient in parameter " + p->name());
    }

    const AdamConfig& cfg = state.m_config;
    ++state.m_t;
    const double t = static_cast<double>(state.m_t);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < state.m_params.size(); ++k) {
        ad::Parameter& p = *state.m_params[k];
        auto theta = p.data();
        const auto grad = p.grad();
        auto& m = state.m_m[k];
        auto& v = state.m_v[k];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

double clip_grad_norm(std::span<ad::Parameter* const> params, double max_norm)
{
    double sq = 0.0;
    for (const ad::Parameter* p : params)
        for (double g : p->grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (ad::Parameter* p : params)
            for (double& g : p->grad()) g *= factor;
    }
    return norm;
}

void TrainConfig::validate() const
{
    auto check = [](bool ok, const char* what) {
        if (!ok) fail(ErrorKind::config, what);
    };
    for (double l : {lambdas.main, lambdas.user, lambdas.product})
        check(std::isfinite(l) && l >= 0.0, "loss weights must be finite and non-negative");
    check(adam.lr > 0.0 && std::isfinite(adam.lr), "learning rate must be positive");
    check(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "beta1 must lie in [0, 1)");
    check(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "beta2 must lie in [0, 1)");
    check(adam.eps > 0.0, "epsilon must be positive");
    check(batch_size > 0, "batch size must be positive");
    check(max_epochs > 0, "max epochs must be positive");
    check(clip_norm >= 0.0, "clip norm must be non-negative");
    check(eval_threads > 0, "eval threads must be positive");
}

// ---- metrics ---------------------------------------------------------------

EvalResult score_confusion(std::vector<std::size_t> confusion, std::size_t classes)
{
    EvalResult r;
    r.classes = classes;
    r.confusion = std::move(confusion);
    std::size_t correct = 0;
    double squared = 0.0;
    for (std::size_t g = 0; g < classes; ++g) {
        for (std::size_t p = 0; p < classes; ++p) {
            const std::size_t n = r.confusion[g * classes + p];
            r.count += n;
            if (g == p) correct += n;
            const double diff = static_cast<double>(g) - static_cast<double>(p);
            squared += static_cast<double>(n) * diff * diff;
        }
    }
    if (r.count == 0) fail(ErrorKind::data, "cannot evaluate an empty dataset");
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
    r.rmse = std::sqrt(squared / static_cast<double>(r.count));
    return r;
}

EvalResult score_predictions(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                             std::size_t classes)
{
    if (gold.size() != predicted.size()) fail(ErrorKind::data, "gold and predicted label counts differ");
    std::vector<std::size_t> confusion(classes * classes, 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= classes || predicted[i] >= classes) fail(ErrorKind::data, "label outside class range");
        ++confusion[gold[i] * classes + predicted[i]];
    }
    return score_confusion(std::move(confusion), classes);
}

std::vector<std::size_t> predict_all(const HuapaModel& model, std::span<const EncodedDoc> docs, std::size_t threads)
{
    std::vector<std::size_t> out(docs.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ad::Tape tape(false);
            out[i] = predict(forward_huapa(tape, model, make_grid(docs[i])));
        }
    };

    threads = std::max<std::size_t>(1, std::min(threads, docs.size()));
    if (threads == 1) {
        work(0, docs.size());
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (docs.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk, end = std::min(docs.size(), begin + chunk);
        pool.emplace_back([&, t, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

EvalResult evaluate(const HuapaModel& model, std::span<const EncodedDoc> docs, std::size_t threads)
{
    if (docs.empty()) fail(ErrorKind::data, "cannot evaluate an empty dataset");
    const auto predicted = predict_all(model, docs, threads);
    std::vector<std::size_t> gold(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) gold[i] = docs[i].label;
    return score_predictions(gold, predicted, model.dims().classes);
}

// ---- training loop ---------------------------------------------------------

TrainResult train(const TrainConfig& config, HuapaModel& model, std::span<const EncodedDoc> train_docs,
                  std::span<const EncodedDoc> dev_docs, const TrainHooks& hooks)
{
    config.validate();
    if (train_docs.empty()) fail(ErrorKind::data, "training set is empty");
    if (dev_docs.empty()) fail(ErrorKind::data, "dev set is empty");

    std::vector<ad::Parameter*> trainable = model.params().trainable();
    AdamState adam(trainable, config.adam);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train_docs.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::vector<double>> best_params;
    auto snapshot = [&] {
        best_params.clear();
        for (const ad::Parameter* p : trainable) best_params.emplace_back(p->data().begin(), p->data().end());
    };

    TrainResult result;
    model.params().zero_grad();
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum_loss = 0.0, sum1 = 0.0, sum2 = 0.0, sum3 = 0.0;
        std::size_t batch_index = 0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            BatchLog batch;
            batch.epoch = epoch;
            batch.batch = batch_index + 1;
            batch.documents = count;
            for (std::size_t k = 0; k < count; ++k) {
                const EncodedDoc& doc = train_docs[order[start + k]];
                ad::Tape tape;
                const ForwardOutput out = forward_huapa(tape, model, make_grid(doc));
                const CombinedLoss loss = combined_loss(tape, out, doc.label, config.lambdas);
                const double value = loss.total.item();
                if (!std::isfinite(value)) {
                    fail(ErrorKind::numeric, "non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                                 std::to_string(batch.batch));
                }
                tape.backward(ad::scale(tape, loss.total, 1.0 / static_cast<double>(count)));
                result.peak_tape_nodes = std::max(result.peak_tape_nodes, tape.size());

                batch.loss += value;
                batch.loss1 += loss.terms[0].item();
                if (loss.terms[1].valid()) batch.loss2 += loss.terms[1].item();
                if (loss.terms[2].valid()) batch.loss3 += loss.terms[2].item();
            }
            if (config.clip_norm > 0.0) clip_grad_norm(trainable, config.clip_norm);
            adam_step(adam);
            model.params().zero_grad();
            batch.adam_steps = adam.steps();

            sum_loss += batch.loss;
            sum1 += batch.loss1;
            sum2 += batch.loss2;
            sum3 += batch.loss3;
            if (hooks.on_batch) hooks.on_batch(batch);
        }

        const double n = static_cast<double>(train_docs.size());
        EpochLog log;
        log.epoch = epoch;
        log.loss = sum_loss / n;
        log.loss1 = sum1 / n;
        log.loss2 = sum2 / n;
        log.loss3 = sum3 / n;
        const EvalResult dev = evaluate(model, dev_docs, config.eval_threads);
        log.dev_accuracy = dev.accuracy;
        log.dev_rmse = dev.rmse;
        if (result.best_epoch == 0 || dev.accuracy > result.best_dev_accuracy) {
            result.best_epoch = epoch;
            result.best_dev_accuracy = dev.accuracy;
            snapshot();
        }
        log.best_epoch = result.best_epoch;
        log.best_dev_accuracy = result.best_dev_accuracy;
        result.epochs.push_back(log);
        if (hooks.on_epoch) hooks.on_epoch(log);

        if (epoch - result.best_epoch >= config.patience) break;
    }

    for (std::size_t k = 0; k < trainable.size(); ++k)
        std::copy(best_params[k].begin(), best_params[k].end(), trainable[k]->data().begin());
    result.steps = adam.steps();
    return result;
}

}  // namespace huapa
