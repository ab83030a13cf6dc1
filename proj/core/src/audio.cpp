#include "leadnet/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "leadnet/errors.hpp"

namespace leadnet {

namespace {

constexpr int kSincHalfTaps = 32;
constexpr double kKaiserBeta = 9.0;

// Modified Bessel function of the first kind, order zero (series expansion).
double bessel_i0(double x) {
    double sum = 1.0;
    double term = 1.0;
    const double half_x = x * 0.5;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < 1e-18 * sum) {
            break;
        }
    }
    return sum;
}

double kaiser(double u) {  // u in [-1, 1]
    const double v = 1.0 - u * u;
    if (v < 0.0) {
        return 0.0;
    }
    return bessel_i0(kKaiserBeta * std::sqrt(v)) / bessel_i0(kKaiserBeta);
}

double sinc(double x) {
    if (x == 0.0) {
        return 1.0;
    }
    const double px = M_PI * x;
    return std::sin(px) / px;
}

}  // namespace

Waveform normalize_peak(const Waveform& w, double target_db) {
    if (w.samples.empty()) {
        throw DataError("normalize_peak: empty waveform");
    }
    double peak = 0.0;
    for (double s : w.samples) {
        peak = std::max(peak, std::abs(s));
    }
    if (peak == 0.0) {
        throw DataError("normalize_peak: silent audio cannot be normalized");
    }
    const double target = std::pow(10.0, target_db / 20.0);
    const double gain = target / peak;
    Waveform out = w;
    for (double& s : out.samples) {
        s *= gain;
    }
    return out;
}

Waveform downmix_mono(const Waveform& w) {
    if (w.channels == 1) {
        return w;
    }
    if (w.channels != 2) {
        throw DataError("downmix_mono: unsupported channel count");
    }
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.channels = 1;
    out.samples.resize(w.samples.size() / 2);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] = 0.5 * (w.samples[2 * i] + w.samples[2 * i + 1]);
    }
    return out;
}

Waveform resample(const Waveform& w, int to_hz) {
    if (to_hz <= 0) {
        throw ConfigError("resample: target rate must be positive");
    }
    if (w.channels != 1) {
        throw DataError("resample: mono input expected (downmix first)");
    }
    if (w.sample_rate == to_hz) {
        return w;
    }
    const double ratio = static_cast<double>(to_hz) / w.sample_rate;
    const double scale = std::min(1.0, ratio);  // kernel stretch when decimating
    const double half = kSincHalfTaps / scale;
    const std::int64_t n_in = w.frames();
    const std::int64_t n_out = std::llround(static_cast<double>(n_in) * ratio);

    Waveform out;
    out.sample_rate = to_hz;
    out.channels = 1;
    out.samples.resize(static_cast<std::size_t>(n_out), 0.0);
    for (std::int64_t n = 0; n < n_out; ++n) {
        const double t = static_cast<double>(n) / ratio;
        const auto lo = static_cast<std::int64_t>(std::ceil(t - half));
        const auto hi = static_cast<std::int64_t>(std::floor(t + half));
        double acc = 0.0;
        for (std::int64_t i = std::max<std::int64_t>(lo, 0); i <= std::min(hi, n_in - 1); ++i) {
            const double x = t - static_cast<double>(i);
            acc += w.samples[static_cast<std::size_t>(i)] * scale * sinc(scale * x) * kaiser(x / half);
        }
        out.samples[static_cast<std::size_t>(n)] = acc;
    }
    return out;
}

std::vector<Waveform> segment(const Waveform& w, const ClipWindow& win) {
    if (!(win.hop_sec > 0.0 && win.hop_sec <= win.duration_sec)) {
        throw ConfigError("segment: need 0 < hop <= duration");
    }
    if (w.channels != 1) {
        throw DataError("segment: mono input expected");
    }
    const auto len = static_cast<std::int64_t>(std::llround(win.duration_sec * w.sample_rate));
    const auto hop = static_cast<std::int64_t>(std::llround(win.hop_sec * w.sample_rate));
    const std::int64_t total = w.frames();

    std::vector<Waveform> clips;
    for (std::int64_t start = 0; start + len <= total; start += hop) {
        Waveform c;
        c.sample_rate = w.sample_rate;
        c.channels = 1;
        c.samples.assign(w.samples.begin() + start, w.samples.begin() + start + len);
        clips.push_back(std::move(c));
    }
    return clips;
}

Waveform preprocess(const Waveform& w, int to_hz, double target_db) {
    return resample(downmix_mono(normalize_peak(w, target_db)), to_hz);
}

namespace {

struct Reader {
    const std::vector<char>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) {
            throw DataError("wav: truncated file");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v;
        std::memcpy(&v, buf.data() + pos, 2);
        pos += 2;
        return v;
    }
    std::string tag() {
        need(4);
        std::string s(buf.data() + pos, 4);
        pos += 4;
        return s;
    }
};

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("wav: cannot open " + path);
    }
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf};

    if (r.tag() != "RIFF") {
        throw DataError("wav: missing RIFF header: " + path);
    }
    r.u32();  // riff size, unreliable in practice
    if (r.tag() != "WAVE") {
        throw DataError("wav: missing WAVE tag: " + path);
    }

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;

    Waveform out;
    while (r.pos + 8 <= buf.size()) {
        const std::string id = r.tag();
        const std::uint32_t size = r.u32();
        if (id == "fmt ") {
            if (size < 16) {
                throw DataError("wav: malformed fmt chunk");
            }
            const std::size_t fmt_end = r.pos + size;
            format = r.u16();
            channels = r.u16();
            rate = r.u32();
            r.u32();  // byte rate
            r.u16();  // block align
            bits = r.u16();
            r.pos = fmt_end;
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) {
                throw DataError("wav: data chunk before fmt");
            }
            if (channels < 1 || channels > 2) {
                throw DataError("wav: unsupported channel count");
            }
            r.need(size);
            const char* p = buf.data() + r.pos;
            if (format == 1 && bits == 16) {
                const std::size_t n = size / 2;
                out.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    std::int16_t v;
                    std::memcpy(&v, p + 2 * i, 2);
                    out.samples[i] = static_cast<double>(v) / 32768.0;
                }
            } else if (format == 3 && bits == 32) {
                const std::size_t n = size / 4;
                out.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    float v;
                    std::memcpy(&v, p + 4 * i, 4);
                    out.samples[i] = static_cast<double>(v);
                }
            } else {
                throw DataError("wav: unsupported codec (PCM-16 or float-32 only)");
            }
            out.sample_rate = static_cast<int>(rate);
            out.channels = channels;
            return out;
        } else {
            // skip unknown chunk (word-aligned)
            r.need(size);
            r.pos += size + (size & 1);
        }
    }
    throw DataError("wav: no data chunk found: " + path);
}

void write_wav(const std::string& path, const Waveform& w) {
    if (w.channels < 1 || w.channels > 2) {
        throw DataError("wav: unsupported channel count");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("wav: cannot write " + path);
    }
    const std::uint32_t data_size = static_cast<std::uint32_t>(w.samples.size() * 4);
    auto put_u32 = [&f](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u16 = [&f](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };

    f.write("RIFF", 4);
    put_u32(36 + data_size);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(16);
    put_u16(3);  // IEEE float
    put_u16(static_cast<std::uint16_t>(w.channels));
    put_u32(static_cast<std::uint32_t>(w.sample_rate));
    put_u32(static_cast<std::uint32_t>(w.sample_rate * w.channels * 4));
    put_u16(static_cast<std::uint16_t>(w.channels * 4));
    put_u16(32);
    f.write("data", 4);
    put_u32(data_size);
    for (double s : w.samples) {
        const float v = static_cast<float>(s);
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    if (!f) {
        throw DataError("wav: write failed: " + path);
    }
}

}  // namespace leadnet
