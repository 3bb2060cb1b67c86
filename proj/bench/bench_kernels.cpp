// Serial vs OpenMP timings for the three hot kernels. Arg(0) is the serial
// reference, Arg(1) the OpenMP build.

#include "divsel/diversity.hpp"
#include "divsel/kernels.hpp"
#include "divsel/rng.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using divsel::Matrix;
using divsel::kernels::Backend;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    divsel::Rng rng(seed);
    std::normal_distribution<double> g;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = g(rng);
    return m;
}

Backend backend_of(const benchmark::State& state) { return state.range(0) ? Backend::OpenMP : Backend::Serial; }

void BM_AssignNearest(benchmark::State& state) {
    const auto points = random_matrix(20000, 16, 1);
    const auto centroids = random_matrix(32, 16, 2);
    std::vector<int> labels(points.rows());
    std::vector<double> dist(points.rows());
    for (auto _ : state) {
        divsel::kernels::assign_nearest(backend_of(state), points, centroids, labels, dist);
        benchmark::DoNotOptimize(labels.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(points.rows()));
}
BENCHMARK(BM_AssignNearest)->Arg(0)->Arg(1)->ArgName("omp");

void BM_AllPairCounts(benchmark::State& state) {
    divsel::Rng rng(3);
    std::vector<std::vector<int>> labelings(100, std::vector<int>(5000));
    for (auto& l : labelings)
        for (auto& v : l) v = static_cast<int>(divsel::uniform_index(rng, 12));
    for (auto _ : state) {
        auto counts = divsel::kernels::all_pair_counts(backend_of(state), labelings);
        benchmark::DoNotOptimize(counts.data());
    }
    state.SetItemsProcessed(state.iterations() * 100 * 99 / 2);
}
BENCHMARK(BM_AllPairCounts)->Arg(0)->Arg(1)->ArgName("omp");

void BM_KnnPredict(benchmark::State& state) {
    const auto train = random_matrix(3000, 8, 4);
    const auto queries = random_matrix(1000, 8, 5);
    std::vector<int> labels(train.rows());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);
    std::vector<int> out(queries.rows());
    for (auto _ : state) {
        divsel::kernels::knn_predict(backend_of(state), train, labels, 4, 3, queries, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.rows()));
}
BENCHMARK(BM_KnnPredict)->Arg(0)->Arg(1)->ArgName("omp");

} // namespace

BENCHMARK_MAIN();
