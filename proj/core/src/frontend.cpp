#include "leadnet/frontend.hpp"

#include <cmath>
#include <complex>

#include "leadnet/errors.hpp"

namespace leadnet {

namespace {

// Iterative radix-2 FFT, in place. Sizes are powers of two (fft_size=1024).
void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters on the power spectrum, rows = mel bands.
std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg) {
    const int n_bins = cfg.fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin_hz);
    const double mel_hi = hz_to_mel(cfg.fmax_hz);
    std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (cfg.n_mels + 1);
        edges[i] = mel_to_hz(mel);
    }
    std::vector<std::vector<double>> fb(static_cast<std::size_t>(cfg.n_mels),
                                        std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
    const double hz_per_bin = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[static_cast<std::size_t>(m)];
        const double mid = edges[static_cast<std::size_t>(m) + 1];
        const double hi = edges[static_cast<std::size_t>(m) + 2];
        for (int b = 0; b < n_bins; ++b) {
            const double hz = b * hz_per_bin;
            double w = 0.0;
            if (hz > lo && hz < mid) {
                w = (hz - lo) / (mid - lo);
            } else if (hz >= mid && hz < hi) {
                w = (hi - hz) / (hi - mid);
            }
            fb[static_cast<std::size_t>(m)][static_cast<std::size_t>(b)] = w;
        }
    }
    return fb;
}

}  // namespace

TensorPtr log_mel(const Waveform& clip, const MelConfig& cfg) {
    const auto expected = static_cast<std::int64_t>(cfg.clip_sec * cfg.sample_rate);
    if (clip.channels != 1 || clip.frames() != expected) {
        throw ShapeError("log_mel: clip must be mono and exactly clip_sec long");
    }
    if (clip.sample_rate != cfg.sample_rate) {
        throw ShapeError("log_mel: clip sample rate mismatch");
    }
    const int frames = cfg.frames_per_clip();
    const int n_bins = cfg.fft_size / 2 + 1;
    const auto fb = mel_filterbank(cfg);

    std::vector<double> window(static_cast<std::size_t>(cfg.fft_size));
    for (int i = 0; i < cfg.fft_size; ++i) {
        window[static_cast<std::size_t>(i)] =
            0.5 * (1.0 - std::cos(2.0 * M_PI * i / cfg.fft_size));
    }

    std::vector<double> out(static_cast<std::size_t>(frames) * cfg.n_mels);
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_size));
    std::vector<double> power(static_cast<std::size_t>(n_bins));
    const std::int64_t total = clip.frames();

    for (int t = 0; t < frames; ++t) {
        const std::int64_t start = static_cast<std::int64_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.fft_size; ++i) {
            const std::int64_t idx = start + i;
            const double s = (idx < total) ? clip.samples[static_cast<std::size_t>(idx)] : 0.0;
            buf[static_cast<std::size_t>(i)] = {s * window[static_cast<std::size_t>(i)], 0.0};
        }
        fft(buf);
        for (int b = 0; b < n_bins; ++b) {
            power[static_cast<std::size_t>(b)] = std::norm(buf[static_cast<std::size_t>(b)]);
        }
        for (int m = 0; m < cfg.n_mels; ++m) {
            double acc = 0.0;
            const auto& row = fb[static_cast<std::size_t>(m)];
            for (int b = 0; b < n_bins; ++b) {
                acc += row[static_cast<std::size_t>(b)] * power[static_cast<std::size_t>(b)];
            }
            out[static_cast<std::size_t>(t) * cfg.n_mels + static_cast<std::size_t>(m)] =
                std::log(acc + cfg.log_floor);
        }
    }
    return tensor(std::move(out), {frames, cfg.n_mels}, false);
}

EncoderParams EncoderParams::init(int n_mels, int dim, Rng& rng) {
    EncoderParams p;
    p.n_mels = n_mels;
    p.dim = dim;
    const double proj_std = std::sqrt(2.0 / (n_mels + dim));
    const double block_std = std::sqrt(1.0 / dim);
    p.proj_w = randn({n_mels, dim}, rng, proj_std, true);
    p.proj_b = zeros({1, dim}, true);
    p.blocks.resize(2);
    for (auto& b : p.blocks) {
        b.w1 = randn({dim, dim}, rng, block_std, true);
        b.b1 = zeros({1, dim}, true);
        b.w2 = randn({dim, dim}, rng, block_std, true);
        b.b2 = zeros({1, dim}, true);
        b.ln_gain = full({1, dim}, 1.0, true);
        b.ln_bias = zeros({1, dim}, true);
    }
    return p;
}

std::vector<TensorPtr> EncoderParams::tensors() const {
    std::vector<TensorPtr> v{proj_w, proj_b};
    for (const auto& b : blocks) {
        v.insert(v.end(), {b.w1, b.b1, b.w2, b.b2, b.ln_gain, b.ln_bias});
    }
    return v;
}

// Log-power mels live roughly in [-23, 3]; this fixed affine brings them
// into a tanh-friendly range while preserving level differences between
// tracks (no per-frame normalization, which would erase loudness cues).
constexpr double kMelScale = 0.25;
constexpr double kMelShift = 2.0;

TensorPtr encode(const TensorPtr& mel, const EncoderParams& params) {
    if (mel->shape.size() != 2 || mel->cols() != params.n_mels) {
        throw ShapeError("encode: input must be frames x n_mels");
    }
    TensorPtr h = add_row(matmul(affine(mel, kMelScale, kMelShift), params.proj_w), params.proj_b);
    for (const auto& b : params.blocks) {
        TensorPtr z = add_row(matmul(h, b.w1), b.b1);
        z = tanh_op(z);
        z = add_row(matmul(z, b.w2), b.b2);
        h = layer_norm(add(h, z), b.ln_gain, b.ln_bias);
    }
    return h;
}

}  // namespace leadnet
