#include "leadnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "leadnet/errors.hpp"
#include "leadnet/frontend.hpp"

namespace fs = std::filesystem;

namespace leadnet {

namespace {

std::vector<InstrumentTimbre> make_domain_a() {
    std::vector<InstrumentTimbre> v;
    v.push_back({"voice",
                 {1.0, 0.85, 0.45, 0.55, 0.30, 0.12, 0.08, 0.05},
                 5.5, 0.012, 0.06, 0.8, 0.85, 200.0, 420.0});
    v.push_back({"guitar",
                 {1.0, 0.50, 0.33, 0.25, 0.20, 0.17, 0.14, 0.12, 0.10, 0.08},
                 0.0, 0.0, 0.005, 0.45, 0.30, 110.0, 330.0});
    v.push_back({"bass",
                 {1.0, 0.5, 0.28, 0.14, 0.08, 0.05},
                 0.0, 0.0, 0.01, 0.5, 0.45, 60.0, 150.0});
    v.push_back({"keys",
                 {1.0, 0.60, 0.20, 0.30, 0.10, 0.15, 0.05},
                 0.0, 0.0, 0.008, 0.6, 0.35, 130.0, 520.0});
    v.push_back({"flute",
                 {1.0, 0.32, 0.14, 0.06, 0.03},
                 5.0, 0.008, 0.08, 0.9, 0.9, 520.0, 1040.0});
    v.push_back({"brass",
                 {0.6, 1.0, 0.85, 0.55, 0.35, 0.22, 0.12, 0.07},
                 0.0, 0.0, 0.05, 0.9, 0.8, 150.0, 400.0});
    v.push_back({"organ",
                 {1.0, 0.9, 0.75, 0.25, 0.55, 0.12, 0.35},
                 0.0, 0.0, 0.02, 0.95, 0.95, 130.0, 520.0});
    return v;
}

std::vector<InstrumentTimbre> make_domain_b() {
    std::vector<InstrumentTimbre> v;
    v.push_back({"synthlead",
                 {1.0, 0.05, 0.65, 0.04, 0.40, 0.03, 0.28, 0.02, 0.20},
                 0.0, 0.0, 0.004, 0.9, 0.9, 260.0, 780.0});
    v.push_back({"strings",
                 {1.0, 0.70, 0.55, 0.45, 0.38, 0.30, 0.24, 0.18, 0.14, 0.10},
                 4.5, 0.006, 0.15, 0.9, 0.9, 190.0, 600.0});
    v.push_back({"clarinet",
                 {1.0, 0.04, 0.55, 0.03, 0.30, 0.02, 0.12},
                 0.0, 0.0, 0.04, 0.85, 0.85, 150.0, 470.0});
    v.push_back({"marimba",
                 {1.0, 0.02, 0.01, 0.45, 0.01, 0.01, 0.01, 0.01, 0.01, 0.25},
                 0.0, 0.0, 0.003, 0.25, 0.15, 220.0, 660.0});
    v.push_back({"cello",
                 {1.0, 0.55, 0.60, 0.35, 0.28, 0.20, 0.12, 0.08},
                 5.0, 0.008, 0.1, 0.8, 0.8, 70.0, 240.0});
    return v;
}

constexpr double kGridSec = 2.5;
constexpr double kAccompRms = 0.08;
constexpr int kSampleRate = 24000;
constexpr double kMaxPartialHz = 10500.0;

struct NoteStyle {
    double min_dur, max_dur;
    int walk_step;
    double gain;
    double sustain_floor = 0.0;   // lead lines hold notes harder than accompaniment
    double attack_cap_sec = 1.0;  // lead onsets are hard regardless of timbre
    double harmonic_exp = 1.0;    // < 1 flattens the partial profile (brighter playing)
    double min_pos_frac = 0.0;    // lead lines favor the top of the register
};

// Render a continuous sequence of notes into buf over [start, end) samples.
void render_span(std::vector<double>& buf, std::int64_t start, std::int64_t end,
                 const InstrumentTimbre& tb, const std::vector<double>& pitches, int& walk_pos,
                 const NoteStyle& style, double amp, Rng& rng) {
    std::int64_t cursor = start;
    const double sr = kSampleRate;
    while (cursor < end) {
        const double dur = rng.uniform(style.min_dur, style.max_dur);
        const auto note_len = std::min<std::int64_t>(
            end - cursor, std::max<std::int64_t>(1, std::llround(dur * sr)));
        walk_pos += rng.uniform_int(-style.walk_step, style.walk_step);
        const int floor_pos =
            static_cast<int>(style.min_pos_frac * static_cast<double>(pitches.size() - 1));
        walk_pos = std::clamp(walk_pos, floor_pos, static_cast<int>(pitches.size()) - 1);
        const double f0 = pitches[static_cast<std::size_t>(walk_pos)];
        const double note_amp = amp * style.gain * rng.uniform(0.85, 1.15);

        // drop partials that would alias
        int n_partials = 0;
        for (std::size_t k = 0; k < tb.harmonics.size(); ++k) {
            if (f0 * static_cast<double>(k + 1) < kMaxPartialHz) {
                n_partials = static_cast<int>(k + 1);
            }
        }
        std::vector<double> phases(static_cast<std::size_t>(n_partials));
        for (auto& p : phases) {
            p = rng.uniform(0.0, 2.0 * M_PI);
        }
        std::vector<double> amps(static_cast<std::size_t>(n_partials));
        for (int k = 0; k < n_partials; ++k) {
            amps[static_cast<std::size_t>(k)] =
                std::pow(tb.harmonics[static_cast<std::size_t>(k)], style.harmonic_exp);
        }

        const double fade = 0.008 * sr;
        double theta = 0.0;
        for (std::int64_t i = 0; i < note_len; ++i) {
            const double t = static_cast<double>(i) / sr;
            const double vib =
                tb.vibrato_depth > 0.0
                    ? 1.0 + tb.vibrato_depth * std::sin(2.0 * M_PI * tb.vibrato_hz * t)
                    : 1.0;
            theta += 2.0 * M_PI * f0 * vib / sr;
            const double sustain = std::max(tb.sustain, style.sustain_floor);
            const double attack = std::min(tb.attack_sec, style.attack_cap_sec);
            double env = std::min(1.0, t / std::max(attack, 1e-4)) *
                         (sustain + (1.0 - sustain) * std::exp(-t / tb.decay_tau_sec));
            const double to_end = static_cast<double>(note_len - 1 - i);
            if (to_end < fade) {
                env *= to_end / fade;
            }
            double s = 0.0;
            for (int k = 0; k < n_partials; ++k) {
                s += amps[static_cast<std::size_t>(k)] *
                     std::sin(static_cast<double>(k + 1) * theta + phases[static_cast<std::size_t>(k)]);
            }
            buf[static_cast<std::size_t>(cursor + i)] += note_amp * env * s;
        }
        cursor += note_len;
    }
}

std::vector<double> scale_pitches(const InstrumentTimbre& tb, double root_hz) {
    static const int kPentatonic[] = {0, 2, 4, 7, 9};
    std::vector<double> out;
    for (int octave = -4; octave <= 5; ++octave) {
        for (int deg : kPentatonic) {
            const double f = root_hz * std::pow(2.0, octave + deg / 12.0);
            if (f >= tb.pitch_lo_hz && f <= tb.pitch_hi_hz) {
                out.push_back(f);
            }
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) {
        out.push_back(0.5 * (tb.pitch_lo_hz + tb.pitch_hi_hz));
    }
    return out;
}

// Stream RMS of a representative accompaniment note, used to equalize
// perceived level across envelope shapes.
double timbre_level_calibration(const InstrumentTimbre& tb) {
    Rng rng(42);
    std::vector<double> buf(static_cast<std::size_t>(kSampleRate * 3 / 5), 0.0);
    const auto pitches = scale_pitches(tb, 220.0);
    int pos = static_cast<int>(pitches.size()) / 2;
    render_span(buf, 0, static_cast<std::int64_t>(buf.size()), tb, pitches, pos,
                {0.6, 0.6, 0, 1.0}, 1.0, rng);
    double acc = 0.0;
    for (double s : buf) {
        acc += s * s;
    }
    const double rms = std::sqrt(acc / static_cast<double>(buf.size()));
    return rms > 1e-9 ? kAccompRms / rms : 1.0;
}

double rms(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        acc += v[i] * v[i];
    }
    return std::sqrt(acc / static_cast<double>(hi - lo));
}

}  // namespace

const std::vector<InstrumentTimbre>& timbre_set(TimbreDomain domain) {
    static const std::vector<InstrumentTimbre> a = make_domain_a();
    static const std::vector<InstrumentTimbre> b = make_domain_b();
    return domain == TimbreDomain::A ? a : b;
}

std::string held_out_timbre_name() { return "organ"; }

void verify_timbre_distinctness(const std::vector<InstrumentTimbre>& timbres) {
    MelConfig mel_cfg;
    std::vector<std::vector<double>> sigs;
    for (const auto& tb : timbres) {
        Rng rng(7);
        Waveform w;
        w.sample_rate = kSampleRate;
        w.channels = 1;
        w.samples.assign(static_cast<std::size_t>(kSampleRate * 5), 0.0);
        const auto pitches = scale_pitches(tb, 220.0);
        int pos = static_cast<int>(pitches.size()) / 2;
        render_span(w.samples, 0, w.frames(), tb, pitches, pos, {0.5, 0.7, 1, 1.0},
                    timbre_level_calibration(tb), rng);
        auto mel = log_mel(w, mel_cfg);
        std::vector<double> sig(static_cast<std::size_t>(mel_cfg.n_mels), 0.0);
        for (std::int64_t t = 0; t < mel->rows(); ++t) {
            for (int m = 0; m < mel_cfg.n_mels; ++m) {
                sig[static_cast<std::size_t>(m)] += mel->at(t, m);
            }
        }
        for (auto& v : sig) {
            v /= static_cast<double>(mel->rows());
        }
        sigs.push_back(std::move(sig));
    }
    constexpr double kMinDistance = 0.5;
    for (std::size_t i = 0; i < sigs.size(); ++i) {
        for (std::size_t j = i + 1; j < sigs.size(); ++j) {
            double acc = 0.0;
            for (std::size_t m = 0; m < sigs[i].size(); ++m) {
                const double d = sigs[i][m] - sigs[j][m];
                acc += d * d;
            }
            const double dist = std::sqrt(acc / static_cast<double>(sigs[i].size()));
            if (dist < kMinDistance) {
                throw DataError("timbres too similar: " + timbres[i].name + " vs " +
                                timbres[j].name);
            }
        }
    }
}

void LeadSchedule::validate(double min_duration_sec) {
    if (segments.empty()) {
        throw DataError("schedule: no segments");
    }
    std::sort(segments.begin(), segments.end(),
              [](const LeadSegment& a, const LeadSegment& b) { return a.onset_sec < b.onset_sec; });
    constexpr double tol = 1e-9;
    if (std::abs(segments.front().onset_sec) > tol) {
        throw DataError("schedule: does not start at 0");
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (s.offset_sec - s.onset_sec < min_duration_sec - tol) {
            throw DataError("schedule: segment shorter than minimum duration");
        }
        if (i + 1 < segments.size()) {
            const double next = segments[i + 1].onset_sec;
            if (s.offset_sec > next + tol) {
                throw DataError("schedule: overlapping segments");
            }
            if (s.offset_sec < next - tol) {
                throw DataError("schedule: gap between segments");
            }
        }
    }
    if (std::abs(segments.back().offset_sec - duration_sec) > tol) {
        throw DataError("schedule: does not cover the full duration");
    }
}

const LeadSegment& LeadSchedule::at(double t) const {
    for (const auto& s : segments) {
        if (t >= s.onset_sec && t < s.offset_sec) {
            return s;
        }
    }
    throw DataError("schedule: time not covered by any segment");
}

void write_annotation(const LeadSchedule& sched, const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw DataError("annotation: cannot write " + path);
    }
    f << "onset_sec,offset_sec,track_id,instrument\n";
    char buf[128];
    for (const auto& s : sched.segments) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%d,", s.onset_sec, s.offset_sec, s.track_id);
        f << buf << s.instrument << "\n";
    }
}

LeadSchedule read_annotation(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("annotation: cannot open " + path);
    }
    std::string line;
    if (!std::getline(f, line)) {
        throw DataError("annotation: empty file " + path);
    }
    LeadSchedule sched;
    while (std::getline(f, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string onset, offset, id, inst;
        if (!std::getline(ss, onset, ',') || !std::getline(ss, offset, ',') ||
            !std::getline(ss, id, ',') || !std::getline(ss, inst)) {
            throw DataError("annotation: malformed row: " + line);
        }
        LeadSegment seg;
        try {
            seg.onset_sec = std::stod(onset);
            seg.offset_sec = std::stod(offset);
            seg.track_id = std::stoi(id);
        } catch (const std::exception&) {
            throw DataError("annotation: malformed numeric field: " + line);
        }
        seg.instrument = inst;
        sched.segments.push_back(std::move(seg));
    }
    if (sched.segments.empty()) {
        throw DataError("annotation: no segments in " + path);
    }
    for (const auto& s : sched.segments) {
        sched.duration_sec = std::max(sched.duration_sec, s.offset_sec);
    }
    sched.validate();
    return sched;
}

std::vector<int> labels_from_schedule(const LeadSchedule& sched, const MelConfig& mel_cfg,
                                      double clip_start_sec) {
    const int frames = mel_cfg.frames_per_clip();
    std::vector<int> labels(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        double center = clip_start_sec + mel_cfg.frame_center_sec(t);
        center = std::min(center, sched.duration_sec - 1e-9);
        labels[static_cast<std::size_t>(t)] = sched.at(center).track_id;
    }
    return labels;
}

SynthSong synth_song(const SongParams& params) {
    const double grid_units = params.duration_sec / kGridSec;
    if (params.duration_sec <= 0.0 ||
        std::abs(grid_units - std::round(grid_units)) > 1e-9) {
        throw ConfigError("synth_song: duration must be a positive multiple of 2.5 s");
    }
    if (params.n_tracks < 1) {
        throw ConfigError("synth_song: need at least one track");
    }
    Rng rng(params.seed);

    // pick timbres
    const auto& pool = timbre_set(params.domain);
    std::vector<const InstrumentTimbre*> chosen;
    std::vector<const InstrumentTimbre*> candidates;
    for (const auto& tb : pool) {
        bool excluded = false;
        for (const auto& name : params.exclude_timbres) {
            excluded = excluded || name == tb.name;
        }
        bool included = false;
        for (const auto& name : params.include_timbres) {
            included = included || name == tb.name;
        }
        if (included) {
            chosen.push_back(&tb);
        } else if (!excluded) {
            candidates.push_back(&tb);
        }
    }
    if (static_cast<int>(chosen.size() + candidates.size()) < params.n_tracks) {
        throw ConfigError("synth_song: not enough timbres for requested track count");
    }
    rng.shuffle(candidates);
    while (static_cast<int>(chosen.size()) < params.n_tracks) {
        chosen.push_back(candidates.back());
        candidates.pop_back();
    }
    chosen.resize(static_cast<std::size_t>(params.n_tracks));
    if (params.skew != 1.0) {
        // stable priority order so label skew lines up with instruments
        const auto priority = [&pool](const InstrumentTimbre* tb) {
            for (std::size_t i = 0; i < pool.size(); ++i) {
                if (&pool[i] == tb) {
                    return i;
                }
            }
            return pool.size();
        };
        std::sort(chosen.begin(), chosen.end(),
                  [&priority](const auto* a, const auto* b) { return priority(a) < priority(b); });
    } else {
        rng.shuffle(chosen);
    }
    if (!params.first_timbre.empty()) {
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            if (chosen[i]->name == params.first_timbre) {
                std::swap(chosen[0], chosen[i]);
            }
        }
        if (chosen[0]->name != params.first_timbre) {
            throw ConfigError("synth_song: first_timbre not among tracks");
        }
    }

    const int n = params.n_tracks;
    const auto total = static_cast<std::int64_t>(std::llround(params.duration_sec * kSampleRate));

    // lead schedule on the 2.5 s grid
    SynthSong song;
    song.schedule.duration_sec = params.duration_sec;
    {
        const int total_units = static_cast<int>(std::llround(grid_units));
        // Segment lengths on the 2.5 s grid, drawn from [5 s, 15 s]. When the
        // song is long enough, redraw until every track can lead at least
        // once: a track that never leads would otherwise be boosted to the
        // lead level by per-track peak normalization downstream.
        const int want_segments =
            params.fixed_leader > 0 ? 1 : std::min(n, total_units / 2);
        std::vector<int> lengths;
        for (int attempt = 0; attempt < 64; ++attempt) {
            lengths.clear();
            int units_left = total_units;
            while (units_left > 0) {
                int u = rng.uniform_int(2, 6);
                u = std::min(u, units_left);
                if (units_left - u == 1) {
                    u = units_left;
                }
                lengths.push_back(u);
                units_left -= u;
            }
            if (static_cast<int>(lengths.size()) >= want_segments) {
                break;
            }
        }

        // lead assignment: a shuffled pass over all tracks first (coverage),
        // then free draws
        std::vector<int> coverage(static_cast<std::size_t>(n));
        std::iota(coverage.begin(), coverage.end(), 1);
        rng.shuffle(coverage);

        double onset = 0.0;
        int prev_track = -1;
        for (std::size_t si = 0; si < lengths.size(); ++si) {
            int lead;
            if (params.fixed_leader > 0) {
                lead = params.fixed_leader;
            } else if (si < coverage.size() && params.skew == 1.0) {
                lead = coverage[si];
            } else {
                // uniform draws avoid repeating the previous lead; skewed
                // draws weight by the timbre's global priority so the lead
                // frequency ratio between adjacent priorities tracks `skew`
                std::vector<double> w(static_cast<std::size_t>(n));
                double sum = 0.0;
                for (int i = 0; i < n; ++i) {
                    double wi;
                    if (params.skew == 1.0) {
                        wi = (i + 1 == prev_track && n > 1) ? 0.0 : 1.0;
                    } else {
                        std::size_t priority = pool.size();
                        for (std::size_t pi = 0; pi < pool.size(); ++pi) {
                            if (&pool[pi] == chosen[static_cast<std::size_t>(i)]) {
                                priority = pi;
                            }
                        }
                        wi = std::pow(params.skew, static_cast<double>(priority));
                    }
                    w[static_cast<std::size_t>(i)] = wi;
                    sum += wi;
                }
                double r = rng.uniform() * sum;
                lead = n;
                for (int i = 0; i < n; ++i) {
                    r -= w[static_cast<std::size_t>(i)];
                    if (r <= 0.0) {
                        lead = i + 1;
                        break;
                    }
                }
                lead = std::min(lead, n);
            }
            LeadSegment seg;
            seg.onset_sec = onset;
            seg.offset_sec = onset + lengths[si] * kGridSec;
            seg.track_id = lead;
            seg.instrument = chosen[static_cast<std::size_t>(lead - 1)]->name;
            song.schedule.segments.push_back(seg);
            onset = seg.offset_sec;
            prev_track = lead;
        }
    }
    if (!params.force_lead_timbre.empty()) {
        int forced_track = 0;
        for (int i = 0; i < n; ++i) {
            if (chosen[static_cast<std::size_t>(i)]->name == params.force_lead_timbre) {
                forced_track = i + 1;
            }
        }
        if (forced_track == 0) {
            throw ConfigError("synth_song: forced lead timbre not among tracks");
        }
        bool has_lead = false;
        for (const auto& s : song.schedule.segments) {
            has_lead = has_lead || s.track_id == forced_track;
        }
        if (!has_lead) {
            auto& seg = song.schedule.segments[static_cast<std::size_t>(rng.uniform_int(
                0, static_cast<int>(song.schedule.segments.size()) - 1))];
            seg.track_id = forced_track;
            seg.instrument = params.force_lead_timbre;
        }
    }
    song.schedule.validate(kGridSec);

    // render tracks
    const double root_hz = 110.0 * std::pow(2.0, rng.uniform_int(0, 11) / 12.0);
    const double lead_gain = std::pow(10.0, params.lead_gain_db / 20.0);
    const NoteStyle accomp{0.4, 0.8, 1, 1.0, 0.0, 1.0, 1.0, 0.0};
    const NoteStyle lead{0.12, 0.3, 3, lead_gain, 0.75, 0.012, 0.6, 0.5};

    song.clean_tracks.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& tb = *chosen[static_cast<std::size_t>(i)];
        auto& wav = song.clean_tracks[static_cast<std::size_t>(i)];
        wav.sample_rate = kSampleRate;
        wav.channels = 1;
        wav.samples.assign(static_cast<std::size_t>(total), 0.0);
        const double amp = timbre_level_calibration(tb);
        const auto pitches = scale_pitches(tb, root_hz);
        int walk = static_cast<int>(pitches.size()) / 2;
        for (const auto& seg : song.schedule.segments) {
            const auto s0 = static_cast<std::int64_t>(std::llround(seg.onset_sec * kSampleRate));
            const auto s1 = static_cast<std::int64_t>(std::llround(seg.offset_sec * kSampleRate));
            const bool is_lead = seg.track_id == i + 1;
            render_span(wav.samples, s0, s1, tb, pitches, walk, is_lead ? lead : accomp, amp, rng);
        }
        song.metas.push_back({i + 1, tb.name});
    }

    // bleed, mix gains, mixture
    const double bleed = params.bleed_off ? 0.0 : std::pow(10.0, params.bleed_db / 20.0);
    song.tracks = song.clean_tracks;
    if (bleed > 0.0) {
        for (int i = 0; i < n; ++i) {
            auto& rec = song.tracks[static_cast<std::size_t>(i)].samples;
            for (int j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                const auto& other = song.clean_tracks[static_cast<std::size_t>(j)].samples;
                for (std::size_t k = 0; k < rec.size(); ++k) {
                    rec[k] += bleed * other[k];
                }
            }
        }
    }
    const double gain_lo = params.domain == TimbreDomain::A ? 0.7 : 0.4;
    const double gain_hi = params.domain == TimbreDomain::A ? 1.3 : 1.6;
    for (int i = 0; i < n; ++i) {
        song.mix_gains.push_back(rng.uniform(gain_lo, gain_hi));
    }

    // headroom scale, applied to tracks first so the mixture is exactly the
    // gain-weighted sum of the written tracks
    double peak = 0.0;
    std::vector<double> mix(static_cast<std::size_t>(total), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& rec = song.tracks[static_cast<std::size_t>(i)].samples;
        for (std::size_t k = 0; k < mix.size(); ++k) {
            mix[k] += song.mix_gains[static_cast<std::size_t>(i)] * rec[k];
        }
    }
    for (double s : mix) {
        peak = std::max(peak, std::abs(s));
    }
    for (const auto& t : song.tracks) {
        for (double s : t.samples) {
            peak = std::max(peak, std::abs(s));
        }
    }
    const double scale = peak > 0.0 ? 0.95 / peak : 1.0;
    for (auto& t : song.tracks) {
        for (auto& s : t.samples) {
            s *= scale;
        }
    }
    for (auto& t : song.clean_tracks) {
        for (auto& s : t.samples) {
            s *= scale;
        }
    }
    song.mixture.sample_rate = kSampleRate;
    song.mixture.channels = 1;
    song.mixture.samples.assign(static_cast<std::size_t>(total), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& rec = song.tracks[static_cast<std::size_t>(i)].samples;
        const double g = song.mix_gains[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < rec.size(); ++k) {
            song.mixture.samples[k] += g * rec[k];
        }
    }

    // lead saliency check: per lead segment, the lead track must dominate
    for (const auto& seg : song.schedule.segments) {
        const auto lo = static_cast<std::size_t>(std::llround(seg.onset_sec * kSampleRate));
        const auto hi = static_cast<std::size_t>(std::llround(seg.offset_sec * kSampleRate));
        const double lead_rms =
            rms(song.clean_tracks[static_cast<std::size_t>(seg.track_id - 1)].samples, lo, hi);
        for (int j = 0; j < n; ++j) {
            if (j + 1 == seg.track_id) {
                continue;
            }
            const double other = rms(song.clean_tracks[static_cast<std::size_t>(j)].samples, lo, hi);
            if (lead_rms < other * std::pow(10.0, 4.0 / 20.0)) {
                throw DataError("synth_song: lead track does not dominate its segment");
            }
        }
    }
    return song;
}

std::vector<const ManifestSong*> DatasetManifest::split_songs(const std::string& split) const {
    std::vector<const ManifestSong*> out;
    for (const auto& s : songs) {
        if (s.split == split) {
            out.push_back(&s);
        }
    }
    return out;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    nlohmann::json j;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["sample_rate"] = m.sample_rate;
    j["instruments"] = m.instruments;
    j["songs"] = nlohmann::json::array();
    for (const auto& s : m.songs) {
        nlohmann::json js;
        js["id"] = s.id;
        js["duration_sec"] = s.duration_sec;
        js["split"] = s.split;
        js["domain"] = s.domain;
        js["mix_path"] = s.mix_path;
        js["annotation_path"] = s.annotation_path;
        js["mix_gains"] = s.mix_gains;
        js["tracks"] = nlohmann::json::array();
        for (const auto& t : s.tracks) {
            js["tracks"].push_back({{"path", t.path}, {"track_id", t.track_id}, {"instrument", t.instrument}});
        }
        j["songs"].push_back(std::move(js));
    }
    std::ofstream f(path);
    if (!f) {
        throw DataError("manifest: cannot write " + path);
    }
    f << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("manifest: cannot open " + path);
    }
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: invalid JSON: ") + e.what());
    }
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != 1) {
            throw DataError("manifest: unsupported version");
        }
        m.seed = j.at("seed").get<std::uint64_t>();
        m.sample_rate = j.at("sample_rate").get<int>();
        m.instruments = j.at("instruments").get<std::vector<std::string>>();
        for (const auto& js : j.at("songs")) {
            ManifestSong s;
            s.id = js.at("id").get<std::string>();
            s.duration_sec = js.at("duration_sec").get<double>();
            s.split = js.at("split").get<std::string>();
            s.domain = js.at("domain").get<std::string>();
            s.mix_path = js.at("mix_path").get<std::string>();
            s.annotation_path = js.at("annotation_path").get<std::string>();
            s.mix_gains = js.at("mix_gains").get<std::vector<double>>();
            for (const auto& jt : js.at("tracks")) {
                ManifestTrack t;
                t.path = jt.at("path").get<std::string>();
                t.track_id = jt.at("track_id").get<int>();
                t.instrument = jt.at("instrument").get<std::string>();
                s.tracks.push_back(std::move(t));
            }
            m.songs.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: missing or malformed field: ") + e.what());
    }

    m.root_dir = fs::path(path).parent_path().string();
    std::set<std::string> ids;
    for (const auto& s : m.songs) {
        if (!ids.insert(s.id).second) {
            throw DataError("manifest: duplicate song id " + s.id);
        }
        if (s.split != "train" && s.split != "valid" && s.split != "test") {
            throw DataError("manifest: unknown split " + s.split);
        }
        std::set<int> track_ids;
        for (const auto& t : s.tracks) {
            if (!track_ids.insert(t.track_id).second) {
                throw DataError("manifest: duplicate track id in song " + s.id);
            }
            if (!fs::exists(fs::path(m.root_dir) / t.path)) {
                throw DataError("manifest: missing file " + t.path);
            }
        }
        if (!fs::exists(fs::path(m.root_dir) / s.mix_path) ||
            !fs::exists(fs::path(m.root_dir) / s.annotation_path)) {
            throw DataError("manifest: missing mix or annotation for song " + s.id);
        }
    }
    return m;
}

DatasetManifest make_dataset(const DatasetConfig& cfg) {
    if (cfg.n_songs < 1) {
        throw ConfigError("make_dataset: need at least one song");
    }
    if (cfg.min_tracks < 1 || cfg.max_tracks < cfg.min_tracks) {
        throw ConfigError("make_dataset: bad track count range");
    }
    verify_timbre_distinctness(timbre_set(TimbreDomain::A));
    if (cfg.domain_b_songs > 0) {
        verify_timbre_distinctness(timbre_set(TimbreDomain::B));
    }

    fs::create_directories(fs::path(cfg.out_dir) / "audio");
    fs::create_directories(fs::path(cfg.out_dir) / "annotations");

    Rng rng(cfg.seed);
    Rng split_rng = rng.derive(1);

    // song-level split
    std::vector<int> order(static_cast<std::size_t>(cfg.n_songs));
    for (int i = 0; i < cfg.n_songs; ++i) {
        order[static_cast<std::size_t>(i)] = i;
    }
    split_rng.shuffle(order);
    const int n_train = static_cast<int>(std::llround(cfg.train_frac * cfg.n_songs));
    const int n_valid = static_cast<int>(std::llround(cfg.valid_frac * cfg.n_songs));
    std::vector<std::string> split_of(static_cast<std::size_t>(cfg.n_songs));
    for (int rank = 0; rank < cfg.n_songs; ++rank) {
        const int song = order[static_cast<std::size_t>(rank)];
        split_of[static_cast<std::size_t>(song)] =
            rank < n_train ? "train" : (rank < n_train + n_valid ? "valid" : "test");
    }

    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    manifest.sample_rate = kSampleRate;

    std::set<std::string> inst_names;
    const int total_songs = cfg.n_songs + cfg.domain_b_songs;
    for (int i = 0; i < total_songs; ++i) {
        const bool domain_b = i >= cfg.n_songs;
        const std::string split = domain_b ? "test" : split_of[static_cast<std::size_t>(i)];

        SongParams sp;
        sp.seed = rng.derive(static_cast<std::uint64_t>(1000 + i)).serialize()[0];
        sp.duration_sec = cfg.duration_sec;
        sp.bleed_db = cfg.bleed_db;
        sp.bleed_off = cfg.bleed_off;
        sp.domain = domain_b ? TimbreDomain::B : TimbreDomain::A;
        sp.skew = cfg.skew;
        Rng song_rng = rng.derive(static_cast<std::uint64_t>(5000 + i));
        const int max_tracks =
            std::min(cfg.max_tracks, static_cast<int>(timbre_set(sp.domain).size()));
        sp.n_tracks = song_rng.uniform_int(std::min(cfg.min_tracks, max_tracks), max_tracks);
        if (cfg.leaky_layout) {
            // training songs have a single leader pinned to track 1 (the id
            // shortcut); valid/test songs pin a random track instead, so a
            // content-blind model cannot carry the shortcut over
            if (split == "train") {
                sp.fixed_leader = 1;
                // rotate the pinned leader's timbre so every instrument
                // still appears as a lead somewhere in the training split
                const auto& pool = timbre_set(TimbreDomain::A);
                sp.first_timbre = pool[static_cast<std::size_t>(i) % pool.size()].name;
                sp.include_timbres.push_back(sp.first_timbre);
            } else {
                sp.fixed_leader = song_rng.uniform_int(1, sp.n_tracks);
            }
        }
        if (cfg.unseen_instrument && !domain_b) {
            if (split == "test") {
                sp.include_timbres = {held_out_timbre_name()};
                sp.force_lead_timbre = held_out_timbre_name();
            } else {
                sp.exclude_timbres = {held_out_timbre_name()};
            }
        }

        SynthSong song = synth_song(sp);

        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "song_%04d", i);
        ManifestSong ms;
        ms.id = idbuf;
        ms.duration_sec = cfg.duration_sec;
        ms.split = split;
        ms.domain = domain_b ? "B" : "A";
        ms.mix_gains = song.mix_gains;
        ms.mix_path = std::string("audio/") + idbuf + "_mix.wav";
        ms.annotation_path = std::string("annotations/") + idbuf + ".csv";
        write_wav((fs::path(cfg.out_dir) / ms.mix_path).string(), song.mixture);
        write_annotation(song.schedule, (fs::path(cfg.out_dir) / ms.annotation_path).string());
        for (std::size_t t = 0; t < song.tracks.size(); ++t) {
            ManifestTrack mt;
            mt.track_id = song.metas[t].track_id;
            mt.instrument = song.metas[t].instrument;
            mt.path = std::string("audio/") + idbuf + "_t" + std::to_string(mt.track_id) + ".wav";
            write_wav((fs::path(cfg.out_dir) / mt.path).string(), song.tracks[t]);
            inst_names.insert(mt.instrument);
            ms.tracks.push_back(std::move(mt));
        }
        manifest.songs.push_back(std::move(ms));
    }
    manifest.instruments.assign(inst_names.begin(), inst_names.end());
    save_manifest(manifest, (fs::path(cfg.out_dir) / "manifest.json").string());
    manifest.root_dir = cfg.out_dir;
    return manifest;
}

}  // namespace leadnet
