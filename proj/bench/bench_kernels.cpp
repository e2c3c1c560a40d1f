// SPDX-License-Identifier: Apache-2.0
// Serial vs OpenMP kernels, plus evaluation episodes run both ways.
#include <benchmark/benchmark.h>

#include <vector>

#include "dmsd/kernels.hpp"
#include "dmsd/rng.hpp"
#include "dmsd/trainer.hpp"

namespace {

using dmsd::kernels::MatmulDims;

struct Operands {
    std::vector<double> a, b, out;
    MatmulDims d;
};

// Square-ish shapes: stacked episode frames [rows x D] times a [D x D] projection.
Operands make(std::size_t rows, std::size_t dim) {
    dmsd::Rng rng(1);
    Operands o;
    o.d = {rows, dim, dim};
    o.a.resize(rows * dim);
    o.b.resize(dim * dim);
    o.out.resize(rows * dim);
    for (double& x : o.a) x = rng.normal();
    for (double& x : o.b) x = rng.normal();
    return o;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
    auto o = make(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    for (auto _ : state) {
        Kernel(o.a, o.b, o.out, o.d);
        benchmark::DoNotOptimize(o.out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(o.d.p * o.d.q * o.d.r));
}

template <auto Kernel>
void bm_matmul_tn(benchmark::State& state) {
    auto o = make(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    std::vector<double> acc(o.d.q * o.d.r);
    for (auto _ : state) {
        // a [rows x D], g [rows x D] -> acc [D x D]
        Kernel(o.a, o.out, acc, o.d);
        benchmark::DoNotOptimize(acc.data());
    }
}

void shapes(benchmark::internal::Benchmark* b) {
    // 16 videos x 8 frames at D=32, then larger feature sizes.
    for (auto [rows, dim] : {std::pair{128, 32}, {128, 128}, {512, 128}, {512, 512}}) b->Args({rows, dim});
}

BENCHMARK(bm_matmul<dmsd::kernels::serial::matmul>)->Name("matmul/serial")->Apply(shapes);
BENCHMARK(bm_matmul<dmsd::kernels::omp::matmul>)->Name("matmul/omp")->Apply(shapes)->UseRealTime();
BENCHMARK(bm_matmul_tn<dmsd::kernels::serial::matmul_tn_acc>)->Name("matmul_tn_acc/serial")->Apply(shapes);
BENCHMARK(bm_matmul_tn<dmsd::kernels::omp::matmul_tn_acc>)->Name("matmul_tn_acc/omp")->Apply(shapes)->UseRealTime();

void bm_eval(benchmark::State& state) {
    const bool parallel = state.range(0) != 0;
    const dmsd::Config c = dmsd::parse_config("record_wall_time=false\n");
    const auto data = dmsd::prepare_data(c);
    dmsd::Rng rng(2);
    dmsd::Checkpoint ckpt;
    ckpt.params = dmsd::checkpoint_params(dmsd::Model::init(c.dim, c.hidden(), data.num_classes, rng).all());
    for (auto _ : state) {
        auto r = dmsd::run_eval(c, data, ckpt, 200, parallel);
        benchmark::DoNotOptimize(r.mean_accuracy);
    }
}
BENCHMARK(bm_eval)->Name("eval_200_episodes")->Arg(0)->Arg(1)->ArgName("parallel")->UseRealTime()->Unit(
    benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
