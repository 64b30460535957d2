#include <random>

#include <benchmark/benchmark.h>

#include "ants/kernels.hpp"

using namespace ants;

namespace {

EmbeddingMatrix random_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    std::vector<float> data(rows * dim);
    for (auto& x : data) {
        x = g(rng);
    }
    return EmbeddingMatrix::with_positional_ids(std::move(data), dim);
}

// 512 images against 100 ID classes and three 1000-row negative spaces, as in one batch.
struct Workload {
    EmbeddingMatrix images = random_rows(512, 512, 1);
    EmbeddingMatrix ids = random_rows(100, 512, 2);
    EmbeddingMatrix nl = random_rows(1000, 512, 3);
    EmbeddingMatrix ens = random_rows(1000, 512, 4);
    EmbeddingMatrix vsnl = random_rows(1000, 512, 5);
    std::vector<kernels::SpaceRef> spaces{{&nl, 100}, {&ens, 100}, {&vsnl, 100}};
};

const Workload& workload() {
    static const Workload w;
    return w;
}

void BM_ScoreImagesSerial(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::serial::score_images(w.images, w.ids, w.spaces, 0.01));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(w.images.rows()));
}

void BM_ScoreImagesParallel(benchmark::State& state) {
    const auto& w = workload();
    kernels::set_thread_limit(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::score_images(w.images, w.ids, w.spaces, 0.01));
    }
    kernels::set_thread_limit(0);
    state.SetItemsProcessed(state.iterations() * static_cast<long>(w.images.rows()));
}

void BM_MaxSimilaritySerial(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::serial::max_similarity(w.images, w.ens));
    }
}

void BM_MaxSimilarityParallel(benchmark::State& state) {
    const auto& w = workload();
    kernels::set_thread_limit(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::max_similarity(w.images, w.ens));
    }
    kernels::set_thread_limit(0);
}

} // namespace

// Wall time: OpenMP workers do not show up in the main thread's CPU time.
BENCHMARK(BM_ScoreImagesSerial)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreImagesParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxSimilaritySerial)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxSimilarityParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
