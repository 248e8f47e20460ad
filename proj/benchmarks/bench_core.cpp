#include <benchmark/benchmark.h>

#include <vector>

#include "dfcn/forest.hpp"
#include "dfcn/masking.hpp"
#include "dfcn/models.hpp"
#include "dfcn/nn.hpp"
#include "dfcn/rng.hpp"
#include "dfcn/stats.hpp"
#include "dfcn/synthetic.hpp"

namespace {

std::vector<dfcn::MaskedSample> masked_batch(std::size_t n, double imp) {
    const auto ds = dfcn::synthetic::generate_simple(n, 28, 0.1, 7);
    dfcn::Rng rng(3);
    std::vector<dfcn::MaskedSample> out;
    for (const auto& r : ds.records) out.push_back(dfcn::apply_random_mask(r, imp, rng));
    return out;
}

void BM_ForwardBackward(benchmark::State& state) {
    const auto params = dfcn::nn::init_network(dfcn::nn::wide_architecture(28), 1);
    const auto samples = masked_batch(static_cast<std::size_t>(state.range(0)), 0.5);
    const auto batch = dfcn::nn::make_batch(samples);
    for (auto _ : state) {
        const auto cache = dfcn::nn::forward(params, batch.inputs);
        auto grads = dfcn::nn::backward(params, cache, batch, dfcn::nn::Objective::composite(1.0));
        benchmark::DoNotOptimize(grads);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(256);

void BM_RocAuc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    dfcn::Rng rng(5);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 3 == 0);
        scores[i] = dfcn::uniform01(rng) + 0.3 * labels[i];
    }
    for (auto _ : state) benchmark::DoNotOptimize(dfcn::stats::roc_auc(scores, labels, false));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

void BM_DeLong(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    dfcn::Rng rng(9);
    std::vector<double> a(n), b(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 2);
        a[i] = dfcn::uniform01(rng) + 0.4 * labels[i];
        b[i] = a[i] + 0.2 * dfcn::standard_normal(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(dfcn::stats::delong_test(a, b, labels));
}
BENCHMARK(BM_DeLong)->Arg(1000)->Arg(100000);

void BM_ForestPredict(benchmark::State& state) {
    auto spec = dfcn::default_spec(dfcn::ModelKind::RF, 28, 0.3, 11);
    spec.forest.trees = 100;
    const auto ds = dfcn::synthetic::generate_simple(400, 28, 0.1, 13);
    const auto model = dfcn::train_rf(spec, ds, ds, dfcn::Normalizer::identity(28));
    const auto samples = masked_batch(1024, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(dfcn::predict_batch(model, samples));
    state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_ForestPredict);

void BM_ForestSinglePredict(benchmark::State& state) {
    auto spec = dfcn::default_spec(dfcn::ModelKind::RF, 28, 0.3, 11);
    spec.forest.trees = 100;
    const auto ds = dfcn::synthetic::generate_simple(400, 28, 0.1, 13);
    const auto model = dfcn::train_rf(spec, ds, ds, dfcn::Normalizer::identity(28));
    const auto samples = masked_batch(1024, 0.5);
    for (auto _ : state)
        for (const auto& s : samples) benchmark::DoNotOptimize(dfcn::predict(model, s));
    state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_ForestSinglePredict);

}  // namespace

BENCHMARK_MAIN();
