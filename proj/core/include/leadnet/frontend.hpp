#pragma once

#include <vector>

#include "leadnet/audio.hpp"
#include "leadnet/tensor.hpp"

namespace leadnet {

/// Log-mel analysis settings. With the defaults a 5 s clip at 24 kHz yields
/// 250 frames (50 frames/s); the hop must divide the clip length.
struct MelConfig {
    int fft_size = 1024;
    int hop = 480;
    int n_mels = 64;
    double fmin_hz = 30.0;
    double fmax_hz = 12000.0;
    double log_floor = 1e-10;
    int sample_rate = 24000;
    double clip_sec = 5.0;

    int frames_per_clip() const { return static_cast<int>(clip_sec * sample_rate) / hop; }
    double frame_rate() const { return static_cast<double>(sample_rate) / hop; }

    /// Center time of frame t; the frame covers samples [t*hop, t*hop+fft_size).
    double frame_center_sec(int t) const {
        return (static_cast<double>(t) * hop + fft_size / 2.0) / sample_rate;
    }
};

/// Hann-windowed power STFT -> triangular mel filterbank -> log(x + floor).
/// The clip must be exactly clip_sec long at the configured rate. Returns a
/// frames x n_mels constant tensor.
TensorPtr log_mel(const Waveform& clip, const MelConfig& cfg);

/// Small trainable frame-wise encoder: a linear projection from n_mels to D
/// followed by two residual blocks (linear -> tanh -> linear, layer norm).
/// One parameter set is shared by every track.
struct EncoderParams {
    int n_mels = 64;
    int dim = 64;

    TensorPtr proj_w, proj_b;
    struct Block {
        TensorPtr w1, b1, w2, b2, ln_gain, ln_bias;
    };
    std::vector<Block> blocks;

    static EncoderParams init(int n_mels, int dim, Rng& rng);

    std::vector<TensorPtr> tensors() const;
};

/// Encode a frames x n_mels feature map into frames x D. Strictly frame-local:
/// no cross-frame mixing.
TensorPtr encode(const TensorPtr& mel, const EncoderParams& params);

}  // namespace leadnet
