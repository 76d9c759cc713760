#include "huapa/model.hpp"
#include "huapa/training.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace huapa;

namespace {

ModelDims dims_for(std::size_t hidden)
{
    ModelDims d;
    d.word = hidden * 2;
    d.user = hidden * 2;
    d.product = hidden * 2;
    d.hidden = hidden;
    d.attention = hidden;
    return d;
}

EncodedDoc make_doc(std::size_t sentences, std::size_t words, std::size_t vocab)
{
    std::mt19937_64 rng(3);
    EncodedDoc doc;
    doc.sentences.assign(sentences, std::vector<TokenId>(words));
    for (auto& s : doc.sentences)
        for (auto& w : s) w = static_cast<TokenId>(1 + rng() % (vocab - 1));
    return doc;
}

void BM_LstmStep(benchmark::State& state)
{
    const auto h = static_cast<std::size_t>(state.range(0));
    ad::ParameterSet ps;
    LstmParams p;
    p.gates_w = &ps.add("w", {3 * h, 2 * h});
    p.gates_b = &ps.add("b", ad::Shape::vec(3 * h));
    p.cell_w = &ps.add("wc", {h, 2 * h});
    p.cell_b = &ps.add("bc", ad::Shape::vec(h));
    for (auto& param : ps)
        for (double& x : param.data()) x = 0.01;
    for (auto _ : state) {
        ad::Tape tape(false);
        const ad::Value x = tape.constant(ad::Shape::vec(h), std::vector<double>(h, 0.5));
        const ad::Value zero = tape.constant(ad::Shape::vec(h), std::vector<double>(h, 0.0));
        benchmark::DoNotOptimize(lstm_step(tape, p, x, zero, zero).h.data().data());
    }
}
BENCHMARK(BM_LstmStep)->Arg(8)->Arg(50)->Arg(100);

void run_forward(benchmark::State& state, bool backward)
{
    const auto h = static_cast<std::size_t>(state.range(0));
    const std::size_t sentences = static_cast<std::size_t>(state.range(1));
    HuapaModel model(dims_for(h), Variant::huapa, {500, 10, 10});
    model.init_uniform(1, 0.05);
    const EncodedDoc doc = make_doc(sentences, 20, 500);
    const DocGrid grid = make_grid(doc);
    for (auto _ : state) {
        ad::Tape tape(backward);
        const ForwardOutput out = forward_huapa(tape, model, grid);
        if (backward) {
            tape.backward(combined_loss(tape, out, 0, {}).total);
            model.params().zero_grad();
        }
        benchmark::DoNotOptimize(out.p.data().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sentences * 20));
}

void BM_Forward(benchmark::State& state) { run_forward(state, false); }
void BM_ForwardBackward(benchmark::State& state) { run_forward(state, true); }
BENCHMARK(BM_Forward)->Args({8, 5})->Args({50, 10})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardBackward)->Args({8, 5})->Args({50, 10})->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state)
{
    HuapaModel model(dims_for(8), Variant::huapa, {500, 10, 10});
    model.init_uniform(1, 0.05);
    std::vector<EncodedDoc> docs(64, make_doc(4, 12, 500));
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(model, docs, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_Evaluate)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
