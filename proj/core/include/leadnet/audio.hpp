#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace leadnet {

/// Interleaved waveform. Mono or stereo, samples nominally in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 24000;
    int channels = 1;

    std::int64_t frames() const {
        return channels > 0 ? static_cast<std::int64_t>(samples.size()) / channels : 0;
    }
    double duration_sec() const {
        return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0;
    }
};

/// Fixed-length analysis window walked along a waveform.
struct ClipWindow {
    double duration_sec = 5.0;
    double hop_sec = 2.5;
};

/// Scale uniformly so the peak sits at target_db (dBFS). Throws DataError on
/// silent input.
Waveform normalize_peak(const Waveform& w, double target_db = -0.1);

/// Average stereo channels; mono passes through unchanged.
Waveform downmix_mono(const Waveform& w);

/// Windowed-sinc rate conversion (Kaiser window, 64 taps per output sample).
/// Output length is round(n * to_hz / from_hz); equal rates pass through.
Waveform resample(const Waveform& w, int to_hz = 24000);

/// Clips starting at k * hop_sec while a full window fits; the incomplete
/// tail is dropped. Shorter-than-window input yields an empty list.
std::vector<Waveform> segment(const Waveform& w, const ClipWindow& win);

/// Full preprocessing chain: peak normalize, downmix, resample.
Waveform preprocess(const Waveform& w, int to_hz = 24000, double target_db = -0.1);

/// RIFF/WAVE reader for PCM-16 and IEEE float-32. PCM-16 is scaled by 1/32768.
Waveform read_wav(const std::string& path);

/// Write mono/stereo float-32 WAV (lossless round-trip with read_wav).
void write_wav(const std::string& path, const Waveform& w);

}  // namespace leadnet
