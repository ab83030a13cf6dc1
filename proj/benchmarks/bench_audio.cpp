#include <benchmark/benchmark.h>

#include <cmath>

#include "leadnet/datagen.hpp"
#include "leadnet/frontend.hpp"

using namespace leadnet;

namespace {

Waveform tone(double freq, double seconds, int rate) {
    Waveform w;
    w.sample_rate = rate;
    w.channels = 1;
    const auto n = static_cast<std::size_t>(seconds * rate);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.samples[i] = 0.5 * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
    }
    return w;
}

}  // namespace

static void BM_LogMel(benchmark::State& state) {
    MelConfig cfg;
    auto clip = tone(440.0, 5.0, 24000);
    for (auto _ : state) {
        auto mel = log_mel(clip, cfg);
        benchmark::DoNotOptimize(mel->data.data());
    }
}
BENCHMARK(BM_LogMel);

static void BM_Resample48to24(benchmark::State& state) {
    auto w = tone(1000.0, 1.0, 48000);
    for (auto _ : state) {
        auto out = resample(w, 24000);
        benchmark::DoNotOptimize(out.samples.data());
    }
}
BENCHMARK(BM_Resample48to24);

static void BM_NormalizePeak(benchmark::State& state) {
    auto w = tone(440.0, 10.0, 24000);
    for (auto _ : state) {
        auto out = normalize_peak(w);
        benchmark::DoNotOptimize(out.samples.data());
    }
}
BENCHMARK(BM_NormalizePeak);

static void BM_SynthSong(benchmark::State& state) {
    SongParams p;
    p.seed = 7;
    p.n_tracks = static_cast<int>(state.range(0));
    p.duration_sec = 10.0;
    for (auto _ : state) {
        auto song = synth_song(p);
        benchmark::DoNotOptimize(song.mixture.samples.data());
    }
}
BENCHMARK(BM_SynthSong)->Arg(3)->Arg(5);
