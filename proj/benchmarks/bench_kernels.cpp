// Serial vs OpenMP lane comparison for the compute kernels, plus whole-model
// forward/backward timings at the desk-scale configuration.

#include "pdp/kernels.hpp"
#include "pdp/model.hpp"
#include "pdp/rng.hpp"
#include "pdp/synth.hpp"
#include "pdp/trainer.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace pdp;

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

void bench_matmul(benchmark::State& state, kernels::Backend backend) {
    const int n = static_cast<int>(state.range(0));
    kernels::set_backend(backend);
    const auto a = random_vec(static_cast<size_t>(n) * n, 1);
    const auto b = random_vec(static_cast<size_t>(n) * n, 2);
    std::vector<double> y(static_cast<size_t>(n) * n);
    for (auto _ : state) {
        kernels::matmul(a.data(), b.data(), y.data(), n, n, n, false);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
    kernels::set_backend(kernels::Backend::openmp);
}

void bench_conv(benchmark::State& state, kernels::Backend backend) {
    kernels::set_backend(backend);
    kernels::Conv2dGeom g;
    g.cin = 16;
    g.h = g.w = 32;
    g.cout = 32;
    g.ksize = 3;
    g.stride = 2;
    g.pad = 1;
    g.hout = g.wout = 16;
    const auto x = random_vec(static_cast<size_t>(g.cin) * g.h * g.w, 3);
    const auto w = random_vec(static_cast<size_t>(g.cout) * g.cin * 9, 4);
    const auto bias = random_vec(g.cout, 5);
    std::vector<double> y(static_cast<size_t>(g.cout) * g.hout * g.wout);
    for (auto _ : state) {
        kernels::conv2d_fwd(g, x.data(), w.data(), bias.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * g.cout * g.cin * 9 * g.hout * g.wout);
    kernels::set_backend(kernels::Backend::openmp);
}

void bench_deconv(benchmark::State& state, kernels::Backend backend) {
    kernels::set_backend(backend);
    kernels::Deconv2dGeom g;
    g.cin = 16;
    g.h = g.w = 8;
    g.cout = 8;
    g.ksize = 3;
    g.stride = 2;
    g.pad = 1;
    g.outpad = 1;
    g.hout = g.wout = 16;
    const auto x = random_vec(static_cast<size_t>(g.cin) * g.h * g.w, 6);
    const auto w = random_vec(static_cast<size_t>(g.cin) * g.cout * 9, 7);
    const auto bias = random_vec(g.cout, 8);
    std::vector<double> y(static_cast<size_t>(g.cout) * g.hout * g.wout);
    for (auto _ : state) {
        kernels::deconv2d_fwd(g, x.data(), w.data(), bias.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    kernels::set_backend(kernels::Backend::openmp);
}

void bench_model_forward(benchmark::State& state) {
    const PdpModel model = PdpModel::make(ModelConfig{}, 0);
    GeneratorSpec spec;
    const GazeSample sample = generate_sample(11, spec);
    const auto in = to_tensors(sample.input);
    for (auto _ : state) {
        auto out = model.forward_single(in);
        benchmark::DoNotOptimize(out.heatmap.data().data());
    }
}

void bench_model_train_step(benchmark::State& state) {
    PdpModel model = PdpModel::make(ModelConfig{}, 0);
    TrainConfig cfg;
    GeneratorSpec spec;
    const GazeSample sample = generate_sample(11, spec);
    const auto in = to_tensors(sample.input);
    for (auto _ : state) {
        model.zero_grad();
        auto out = model.forward_single(in);
        Tensor loss = sample_loss(out, sample, cfg);
        backward(loss);
        benchmark::DoNotOptimize(loss.value());
    }
}

} // namespace

BENCHMARK_CAPTURE(bench_matmul, serial, kernels::Backend::serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(bench_matmul, openmp, kernels::Backend::openmp)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(bench_conv, serial, kernels::Backend::serial);
BENCHMARK_CAPTURE(bench_conv, openmp, kernels::Backend::openmp);
BENCHMARK_CAPTURE(bench_deconv, serial, kernels::Backend::serial);
BENCHMARK_CAPTURE(bench_deconv, openmp, kernels::Backend::openmp);
BENCHMARK(bench_model_forward);
BENCHMARK(bench_model_train_step);

BENCHMARK_MAIN();
