#include <benchmark/benchmark.h>

#include "leadnet/tensor.hpp"

using namespace leadnet;

static void BM_Matmul(benchmark::State& state) {
    const auto dim = state.range(0);
    Rng rng(1);
    auto a = randn({250, dim}, rng, 1.0, true);
    auto b = randn({dim, dim}, rng, 1.0, true);
    for (auto _ : state) {
        auto c = matmul(a, b);
        benchmark::DoNotOptimize(c->data.data());
    }
    state.SetItemsProcessed(state.iterations() * 250 * dim * dim);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_MatmulBackward(benchmark::State& state) {
    const auto dim = state.range(0);
    Rng rng(1);
    auto a = randn({250, dim}, rng, 1.0, true);
    auto b = randn({dim, dim}, rng, 1.0, true);
    for (auto _ : state) {
        auto loss = sum_all(matmul(a, b));
        loss->backward();
        a->zero_grad();
        b->zero_grad();
        benchmark::DoNotOptimize(loss->data.data());
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

static void BM_LayerNorm(benchmark::State& state) {
    Rng rng(1);
    auto x = randn({250, 64}, rng, 1.0, true);
    auto gain = full({1, 64}, 1.0, true);
    auto bias = zeros({1, 64}, true);
    for (auto _ : state) {
        auto y = layer_norm(x, gain, bias);
        benchmark::DoNotOptimize(y->data.data());
    }
}
BENCHMARK(BM_LayerNorm);

static void BM_CrossEntropy(benchmark::State& state) {
    Rng rng(1);
    auto logits = randn({250, 9}, rng, 1.0, true);
    std::vector<int> targets(250);
    for (auto& t : targets) {
        t = rng.uniform_int(1, 8);
    }
    for (auto _ : state) {
        auto loss = cross_entropy(logits, targets);
        benchmark::DoNotOptimize(loss->data.data());
    }
}
BENCHMARK(BM_CrossEntropy);
