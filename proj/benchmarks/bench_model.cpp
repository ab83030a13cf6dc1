#include <benchmark/benchmark.h>

#include "leadnet/model.hpp"

using namespace leadnet;

namespace {

struct Fixture {
    ModelConfig cfg;
    ModelParams params;
    ModelInput input;
    std::vector<int> labels;

    explicit Fixture(int dim, int n_tracks) {
        cfg.feature_dim = dim;
        cfg.heads = 4;
        cfg.n_mels = 64;
        cfg.dropout_p = 0.8;
        cfg.instruments = {"voice", "guitar", "bass", "keys", "flute", "brass", "organ"};
        Rng rng(1);
        params = ModelParams::init(cfg, rng);
        input.mix.mel = randn({250, 64}, rng, 1.0);
        input.mix.meta = TrackMeta{kMixTrackId, kInstMix};
        for (int i = 0; i < n_tracks; ++i) {
            TrackInput ti;
            ti.mel = randn({250, 64}, rng, 1.0);
            ti.meta.track_id = i + 1;
            ti.meta.instrument = 2 + i % 7;
            input.tracks.push_back(std::move(ti));
        }
        for (int t = 0; t < 250; ++t) {
            labels.push_back(1 + rng.uniform_int(0, n_tracks - 1));
        }
    }
};

}  // namespace

static void BM_ForwardEval(benchmark::State& state) {
    Fixture f(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    Rng rng(2);
    for (auto _ : state) {
        auto out = forward(f.input, f.cfg, f.params, /*training=*/false, rng);
        benchmark::DoNotOptimize(out.logits->data.data());
    }
}
BENCHMARK(BM_ForwardEval)->Args({32, 4})->Args({64, 4})->Args({64, 6});

static void BM_TrainStep(benchmark::State& state) {
    Fixture f(static_cast<int>(state.range(0)), 4);
    Rng rng(2);
    for (auto _ : state) {
        auto out = forward(f.input, f.cfg, f.params, /*training=*/true, rng);
        auto loss = cross_entropy(out.logits, f.labels);
        loss->backward();
        for (auto& np : f.params.registry) {
            np.t->zero_grad();
        }
        benchmark::DoNotOptimize(loss->data.data());
    }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64);

static void BM_AttentionCore(benchmark::State& state) {
    Rng rng(3);
    const int n = static_cast<int>(state.range(0));
    auto q = randn({250, 64}, rng, 1.0);
    std::vector<TensorPtr> ks;
    std::vector<TensorPtr> vs;
    for (int i = 0; i < n; ++i) {
        ks.push_back(randn({250, 64}, rng, 1.0));
        vs.push_back(randn({250, 64}, rng, 1.0));
    }
    for (auto _ : state) {
        auto [out, trace] = attention_weighted_sum(q, ks, vs, 4);
        benchmark::DoNotOptimize(out->data.data());
        benchmark::DoNotOptimize(trace.weights.data());
    }
}
BENCHMARK(BM_AttentionCore)->Arg(2)->Arg(4)->Arg(6);
