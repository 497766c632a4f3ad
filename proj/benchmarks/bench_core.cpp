#include <benchmark/benchmark.h>

#include "inn/baselines.hpp"
#include "inn/config.hpp"
#include "inn/experiment.hpp"
#include "inn/interval.hpp"

using namespace inn;

namespace {

struct Fixture {
    RunConfig cfg;
    Network net;
    IntervalNetwork inn;
    Tensor x, y;

    explicit Fixture(Scale scale, std::size_t batch) : cfg(default_config(scale)), net(build_deconv_net(cfg)) {
        Rng rng(1);
        net.init_params(rng);
        inn = IntervalNetwork(net);
        auto tensors = inn.trainable_tensors();
        for (std::size_t i = 0; i < tensors.size(); ++i)
            for (auto& v : tensors[i]->values()) v += (i % 2 == 0 ? -1.0 : 1.0) * 1e-3 * rng.uniform();
        const std::size_t n = cfg.data.n;
        x = Tensor({batch, 1, n});
        y = Tensor({batch, n});
        for (auto& v : x.values()) v = rng.uniform();
        for (auto& v : y.values()) v = rng.uniform();
    }
};

const Fixture& desk(std::size_t batch) {
    static Fixture f1(Scale::Desk, 1), f32(Scale::Desk, 32);
    return batch == 1 ? f1 : f32;
}

void BM_Forward(benchmark::State& state) {
    const auto& f = desk(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(predict(f.net, f.x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_IntervalForward(benchmark::State& state) {
    const auto& f = desk(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(interval_forward(f.inn, f.x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_McDrop(benchmark::State& state) {
    const auto& f = desk(state.range(0));
    const McDropConfig mc{f.cfg.mcdrop.samples, 3};
    for (auto _ : state) benchmark::DoNotOptimize(mcdrop_predict(f.net, f.x, mc));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ForwardBackward(benchmark::State& state) {
    const auto& f = desk(state.range(0));
    const Tensor g(Shape{static_cast<std::size_t>(state.range(0)), f.cfg.data.n}, 1.0);
    for (auto _ : state) {
        auto fwd = forward(f.net, f.x, Mode::Eval);
        benchmark::DoNotOptimize(backward(f.net, fwd.cache, g));
    }
}

void BM_IntervalForwardBackward(benchmark::State& state) {
    const auto& f = desk(state.range(0));
    const double beta = 2e-3;
    for (auto _ : state) {
        auto r = interval_forward(f.inn, f.x);
        benchmark::DoNotOptimize(interval_backward(f.inn, r.cache, f.y, beta));
    }
}

} // namespace

BENCHMARK(BM_Forward)->Arg(1)->Arg(32)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_IntervalForward)->Arg(1)->Arg(32)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_McDrop)->Arg(1)->Arg(32)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ForwardBackward)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntervalForwardBackward)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
