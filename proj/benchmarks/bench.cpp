#include <benchmark/benchmark.h>

#include <random>

#include "greit/accounting.hpp"
#include "greit/io.hpp"
#include "greit/posedecode.hpp"

using namespace greit;

namespace {

Tensor<float> rand_input(int h, int w, std::uint64_t seed) {
    Tensor<float> x({1, 3, h, w});
    std::mt19937_64 rng(seed);
    fill_uniform(x, rng, -1.0f, 1.0f);
    return x;
}

void bm_forward(benchmark::State& state, const char* variant, int h, int w) {
    auto net = Network::build(ArchConfig::for_variant(variant), InitKind::Random, 1);
    auto x = rand_input(h, w, 2);
    for (auto _ : state) {
        auto y = net.forward(x);
        benchmark::DoNotOptimize(y.data());
    }
}

void bm_conv3x3(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    std::mt19937_64 rng(3);
    Conv2dParams<Tensor<float>> p;
    p.weight = Tensor<float>({c, c, 3, 3});
    p.pad_h = p.pad_w = 1;
    fill_uniform(p.weight, rng, -0.1f, 0.1f);
    Tensor<float> x({1, c, 32, 32});
    fill_uniform(x, rng, -1.0f, 1.0f);
    for (auto _ : state) {
        auto y = conv2d(x, p);
        benchmark::DoNotOptimize(y.data());
    }
}

void bm_depthwise3x3(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    std::mt19937_64 rng(4);
    Conv2dParams<Tensor<float>> p;
    p.weight = Tensor<float>({c, 1, 3, 3});
    p.groups = c;
    p.pad_h = p.pad_w = 1;
    fill_uniform(p.weight, rng, -0.1f, 0.1f);
    Tensor<float> x({1, c, 64, 48});
    fill_uniform(x, rng, -1.0f, 1.0f);
    for (auto _ : state) {
        auto y = conv2d(x, p);
        benchmark::DoNotOptimize(y.data());
    }
}

void bm_decode(benchmark::State& state) {
    Tensor<float> hm({1, 17, 64, 48});
    std::mt19937_64 rng(5);
    fill_uniform(hm, rng, 0.0f, 1.0f);
    for (auto _ : state) {
        auto kps = decode_heatmaps(hm, true);
        benchmark::DoNotOptimize(kps);
    }
}

void bm_count_flops(benchmark::State& state) {
    auto net = Network::build(ArchConfig::for_variant("greit18"), InitKind::Zero);
    for (auto _ : state) {
        auto rep = count_flops(net, 256, 192);
        benchmark::DoNotOptimize(rep.total_flops);
    }
}

void bm_crop_resize(benchmark::State& state) {
    auto img = rand_input(480, 640, 6);
    auto bt = BoxTransform::from_box(extend_box({50, 40, 300, 420}), 256, 192);
    for (auto _ : state) {
        auto crop = crop_resize(img, bt);
        benchmark::DoNotOptimize(crop.data());
    }
}

BENCHMARK_CAPTURE(bm_forward, greit18_256x192, "greit18", 256, 192)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_forward, lite18_256x192, "lite18", 256, 192)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv3x3)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_depthwise3x3)->Arg(40)->Arg(160)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_decode)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_count_flops)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_crop_resize)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
