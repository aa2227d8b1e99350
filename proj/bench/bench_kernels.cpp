// Serial vs OpenMP-parallel variants of the data-parallel kernels.
#include <benchmark/benchmark.h>

#include "fsd/conenet.hpp"
#include "fsd/rng.hpp"

using namespace fsd;

namespace {

std::vector<conenet::ConeSample> make_batch(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<conenet::ConeSample> out(n);
    for (auto& s : out) {
        const int cones = rng.uniform_int(4, conenet::kMaxCones);
        for (int i = 0; i < cones; ++i) {
            s.input[2 * i] = rng.uniform(0.0, 10.0);
            s.input[2 * i + 1] = rng.uniform(-6.0, 6.0);
            s.labels[i] = rng.bernoulli(0.5) ? 1 : 2;
        }
    }
    return out;
}

void bench_batch_gradient(benchmark::State& state, conenet::ExecMode mode) {
    const conenet::Network net(7);
    const auto batch = make_batch(static_cast<int>(state.range(0)), 11);
    std::vector<int> idx(batch.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::vector<double> grad;
    for (auto _ : state) {
        const double loss = conenet::batch_gradient(net, batch, idx, grad, mode);
        benchmark::DoNotOptimize(loss);
        benchmark::DoNotOptimize(grad.data());
    }
}

void bench_dataset(benchmark::State& state, conenet::ExecMode mode) {
    conenet::DatasetSpec spec;
    spec.n_samples = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const auto data = conenet::generate_dataset(spec, 3, mode);
        benchmark::DoNotOptimize(data.data());
    }
}

}  // namespace

BENCHMARK_CAPTURE(bench_batch_gradient, serial, conenet::ExecMode::kSerial)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(bench_batch_gradient, parallel, conenet::ExecMode::kParallel)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(bench_dataset, serial, conenet::ExecMode::kSerial)->Arg(1000);
BENCHMARK_CAPTURE(bench_dataset, parallel, conenet::ExecMode::kParallel)->Arg(1000);

BENCHMARK_MAIN();
