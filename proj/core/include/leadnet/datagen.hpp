#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leadnet/audio.hpp"
#include "leadnet/frontend.hpp"
#include "leadnet/rng.hpp"

namespace leadnet {

/// Additive-synthesis voice: per-partial amplitudes, vibrato, envelope and
/// pitch register. Distinct timbres are required to have measurably distinct
/// long-term log-mel spectra.
struct InstrumentTimbre {
    std::string name;
    std::vector<double> harmonics;   // amplitude per partial, fundamental first
    double vibrato_hz = 0.0;
    double vibrato_depth = 0.0;      // fractional pitch excursion
    double attack_sec = 0.01;
    double decay_tau_sec = 0.4;      // exponential decay toward the sustain level
    double sustain = 0.3;
    double pitch_lo_hz = 130.0;
    double pitch_hi_hz = 520.0;
};

/// Domain A is the in-domain timbre set; domain B is disjoint and mixed with
/// a wider gain spread, standing in for out-of-domain material.
enum class TimbreDomain { A, B };

const std::vector<InstrumentTimbre>& timbre_set(TimbreDomain domain);

/// Name of the timbre reserved for the unseen-instrument protocol.
std::string held_out_timbre_name();

/// Throws if any two timbres have long-term log-mel signatures closer than a
/// fixed floor. Called once per dataset generation.
void verify_timbre_distinctness(const std::vector<InstrumentTimbre>& timbres);

/// One lead span; track_id names the track carrying the lead line.
struct LeadSegment {
    double onset_sec = 0.0;
    double offset_sec = 0.0;
    int track_id = 0;
    std::string instrument;
};

/// Sorted, disjoint, gap-free cover of [0, duration].
struct LeadSchedule {
    double duration_sec = 0.0;
    std::vector<LeadSegment> segments;

    /// Sorts segments, then throws DataError on overlap, gap or empty cover.
    void validate(double min_duration_sec = 0.0);

    /// Segment index containing time t (half-open spans). Throws on gaps.
    const LeadSegment& at(double t) const;
};

void write_annotation(const LeadSchedule& sched, const std::string& path);
LeadSchedule read_annotation(const std::string& path);

/// Frame labels (track ids) for one clip: frame t takes the label of the
/// segment containing its center time. Centers of the last frames of the
/// final clip can spill just past the schedule end and are clamped; interior
/// gaps raise DataError.
std::vector<int> labels_from_schedule(const LeadSchedule& sched, const MelConfig& mel_cfg,
                                      double clip_start_sec);

struct SynthTrackMeta {
    int track_id = 0;
    std::string instrument;
};

/// In-memory result of synthesizing one song. Track waveforms include bleed;
/// clean renders are kept for tests. The mixture is exactly the gain-weighted
/// sum of the (bled) tracks.
struct SynthSong {
    std::vector<Waveform> tracks;
    std::vector<Waveform> clean_tracks;
    Waveform mixture;
    std::vector<double> mix_gains;
    std::vector<SynthTrackMeta> metas;
    LeadSchedule schedule;
};

struct SongParams {
    std::uint64_t seed = 1;
    int n_tracks = 4;                  // in [3, 6]
    double duration_sec = 20.0;        // multiple of 2.5
    double bleed_db = -20.0;           // cross-talk level; bleed_off disables it
    bool bleed_off = false;
    TimbreDomain domain = TimbreDomain::A;
    double skew = 1.0;                 // lead-frequency ratio between adjacent tracks
    int fixed_leader = 0;              // pin every lead segment to this track (0 = free)
    std::vector<std::string> exclude_timbres;
    std::vector<std::string> include_timbres;   // forced members of the track list
    std::string force_lead_timbre;              // guarantee this timbre leads somewhere
    std::string first_timbre;                   // pin this timbre to track 1
    double lead_gain_db = 9.0;
};

/// Deterministically render one multitrack song with its lead schedule.
/// Every track plays a continuous accompaniment and switches to a louder,
/// busier line during its own lead segments. Lead spans are multiples of
/// 2.5 s drawn from [5 s, 15 s].
SynthSong synth_song(const SongParams& params);

struct ManifestTrack {
    std::string path;
    int track_id = 0;
    std::string instrument;
};

struct ManifestSong {
    std::string id;
    double duration_sec = 0.0;
    std::string split;   // train | valid | test
    std::string domain;  // A | B
    std::string mix_path;
    std::string annotation_path;
    std::vector<double> mix_gains;
    std::vector<ManifestTrack> tracks;
};

struct DatasetManifest {
    int version = 1;
    std::uint64_t seed = 0;
    int sample_rate = 24000;
    std::vector<std::string> instruments;  // every instrument name in the dataset
    std::vector<ManifestSong> songs;
    std::string root_dir;  // set on load; paths are relative to it

    std::vector<const ManifestSong*> split_songs(const std::string& split) const;
};

struct DatasetConfig {
    std::string out_dir;
    int n_songs = 20;
    std::uint64_t seed = 1;
    double duration_sec = 20.0;
    double bleed_db = -20.0;
    bool bleed_off = false;
    double skew = 1.0;
    bool unseen_instrument = false;  // hold one timbre out of train/valid
    int domain_b_songs = 0;          // extra out-of-domain songs appended to the test split
    bool leaky_layout = false;       // train songs lead always track 1; valid/test shuffled
    double train_frac = 0.70;
    double valid_frac = 0.15;
    int min_tracks = 3;
    int max_tracks = 6;
};

/// Generate songs, write WAVs + annotation CSVs + manifest.json under
/// out_dir, with a song-level split. Returns the manifest.
DatasetManifest make_dataset(const DatasetConfig& cfg);

void save_manifest(const DatasetManifest& m, const std::string& path);

/// Load and validate a manifest: referenced files must exist and splits must
/// be disjoint at the song level.
DatasetManifest load_manifest(const std::string& path);

}  // namespace leadnet
