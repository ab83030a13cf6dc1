#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "leadnet/config_io.hpp"
#include "leadnet/dataset.hpp"
#include "leadnet/datagen.hpp"
#include "leadnet/errors.hpp"
#include "leadnet/metrics.hpp"
#include "leadnet/model.hpp"
#include "leadnet/train.hpp"

namespace fs = std::filesystem;
using namespace leadnet;

namespace {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    MelConfig mel;
};

nlohmann::json run_config_to_json(const RunConfig& rc) {
    return nlohmann::json{{"model", rc.model}, {"train", rc.train}, {"mel", rc.mel}};
}

// Merge a (possibly partial) JSON section over the current values; unknown
// keys are rejected.
template <typename Config>
void merge_section(const nlohmann::json& section, Config& cfg, const std::string& name) {
    nlohmann::json current = cfg;
    for (const auto& [key, value] : section.items()) {
        if (!current.contains(key)) {
            throw ConfigError("config: unknown key '" + key + "' in section '" + name + "'");
        }
        current[key] = value;
    }
    current.get_to(cfg);
}

RunConfig load_run_config(const std::string& path, const RunConfig& defaults) {
    RunConfig rc = defaults;
    if (path.empty()) {
        return rc;
    }
    std::ifstream f(path);
    if (!f) {
        throw DataError("config: cannot open " + path);
    }
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "model") {
            merge_section(value, rc.model, "model");
        } else if (key == "train") {
            merge_section(value, rc.train, "train");
        } else if (key == "mel") {
            merge_section(value, rc.mel, "mel");
        } else {
            throw ConfigError("config: unknown section '" + key + "'");
        }
    }
    return rc;
}

std::vector<TrackMeta> read_meta_csv(const std::string& path, const ModelConfig& cfg,
                                     std::vector<std::string>* names_out) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("meta: cannot open " + path);
    }
    std::string line;
    if (!std::getline(f, line) || line.rfind("track_id,instrument", 0) != 0) {
        throw DataError("meta: expected header 'track_id,instrument'");
    }
    std::vector<TrackMeta> metas;
    while (std::getline(f, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string id, inst;
        if (!std::getline(ss, id, ',') || !std::getline(ss, inst)) {
            throw DataError("meta: malformed row: " + line);
        }
        TrackMeta m;
        try {
            m.track_id = std::stoi(id);
        } catch (const std::exception&) {
            throw DataError("meta: bad track id: " + line);
        }
        m.instrument = cfg.instrument_index(inst);
        metas.push_back(m);
        if (names_out) {
            names_out->push_back(inst);
        }
    }
    return metas;
}

struct LoadedSong {
    std::vector<Waveform> tracks;
    Waveform mix;
};

LoadedSong load_song_audio(const std::vector<std::string>& track_paths,
                           const std::string& mix_path) {
    LoadedSong song;
    for (const auto& p : track_paths) {
        song.tracks.push_back(preprocess(read_wav(p)));
    }
    if (!mix_path.empty()) {
        song.mix = preprocess(read_wav(mix_path));
    } else {
        song.mix = normalize_peak(pseudo_mix(song.tracks));
    }
    return song;
}

// Build model inputs for every 5 s window of a song.
std::vector<ModelInput> clip_inputs(const LoadedSong& song, const std::vector<TrackMeta>& metas,
                                    const MelConfig& mel) {
    const ClipWindow window{mel.clip_sec, 2.5};
    const auto mix_clips = segment(song.mix, window);
    std::vector<std::vector<Waveform>> track_clips;
    for (const auto& t : song.tracks) {
        track_clips.push_back(segment(t, window));
        if (track_clips.back().size() != mix_clips.size()) {
            throw DataError("infer: track/mix lengths differ");
        }
    }
    std::vector<ModelInput> inputs;
    for (std::size_t c = 0; c < mix_clips.size(); ++c) {
        ModelInput in;
        in.mix.mel = log_mel(mix_clips[c], mel);
        in.mix.meta = TrackMeta{kMixTrackId, kInstMix};
        for (std::size_t t = 0; t < song.tracks.size(); ++t) {
            in.tracks.push_back({log_mel(track_clips[t][c], mel), metas[t]});
        }
        inputs.push_back(std::move(in));
    }
    return inputs;
}

int cmd_synth_data(const std::string& out, int songs, std::uint64_t seed, const std::string& bleed,
                   double skew, bool unseen, double duration, int domain_b, bool leaky,
                   int min_tracks, int max_tracks) {
    DatasetConfig cfg;
    cfg.out_dir = out;
    cfg.n_songs = songs;
    cfg.seed = seed;
    cfg.duration_sec = duration;
    cfg.min_tracks = min_tracks;
    cfg.max_tracks = max_tracks;
    if (bleed == "off") {
        cfg.bleed_off = true;
    } else {
        try {
            cfg.bleed_db = std::stod(bleed);
        } catch (const std::exception&) {
            throw ConfigError("synth-data: --bleed expects a dB value or 'off'");
        }
    }
    cfg.skew = skew;
    cfg.unseen_instrument = unseen;
    cfg.domain_b_songs = domain_b;
    cfg.leaky_layout = leaky;
    const auto manifest = make_dataset(cfg);
    std::printf("wrote %zu songs to %s (train %zu / valid %zu / test %zu)\n", manifest.songs.size(),
                out.c_str(), manifest.split_songs("train").size(),
                manifest.split_songs("valid").size(), manifest.split_songs("test").size());
    return 0;
}

int cmd_train(const RunConfig& rc, const std::string& data, const std::string& out) {
    const auto manifest = load_manifest(data);
    RunConfig cfg = rc;
    cfg.model.instruments = manifest.instruments;
    cfg.model.n_mels = cfg.mel.n_mels;

    fs::create_directories(out);
    {
        std::ofstream echo(fs::path(out) / "config.json");
        echo << run_config_to_json(cfg).dump(2) << "\n";
    }

    LoadOptions opts;
    opts.mel = cfg.mel;
    opts.use_oracle_mix = cfg.model.use_oracle_mix;
    const auto train_clips = load_clips(manifest, "train", cfg.model, opts);
    const auto valid_clips = load_clips(manifest, "valid", cfg.model, opts);
    if (train_clips.empty() || valid_clips.empty()) {
        throw DataError("train: manifest yields an empty train or valid split");
    }

    const auto result = train(train_clips, valid_clips, cfg.model, cfg.mel, cfg.train,
                              (fs::path(out) / "log.jsonl").string());
    save_checkpoint((fs::path(out) / "best.ckpt").string(), result.best);
    save_checkpoint((fs::path(out) / "final.ckpt").string(), result.final);
    std::printf("trained %zu steps; best validation inst macro-F1 %.4f\n",
                result.loss_curve.size(), result.best.best_val_f1);
    std::printf("checkpoints written to %s\n", out.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& split,
             const std::string& report_path, const std::string& confusion_path) {
    const auto ckpt = load_checkpoint(ckpt_path);
    const auto params = build_params(ckpt);
    const auto manifest = load_manifest(data);
    LoadOptions opts;
    opts.mel = ckpt.mel_cfg;
    opts.use_oracle_mix = ckpt.model_cfg.use_oracle_mix;
    const auto clips = load_clips(manifest, split, ckpt.model_cfg, opts);
    if (clips.empty()) {
        throw DataError("eval: split '" + split + "' is empty");
    }
    const auto report = evaluate(ckpt.model_cfg, params, clips);
    std::fputs(format_report(report, ckpt.model_cfg).c_str(), stdout);
    if (!report_path.empty()) {
        write_report_json(report, ckpt.model_cfg, report_path);
    }
    if (!confusion_path.empty()) {
        write_confusion_csv(report, confusion_path);
    }
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::vector<std::string>& track_paths,
              const std::string& meta_path, const std::string& mix_path,
              const std::string& frames_path, const std::string& segments_path) {
    const auto ckpt = load_checkpoint(ckpt_path);
    const auto params = build_params(ckpt);
    const auto& cfg = ckpt.model_cfg;

    std::vector<std::string> names;
    const auto metas = read_meta_csv(meta_path, cfg, &names);
    if (metas.size() != track_paths.size()) {
        throw DataError("infer: --tracks count does not match --meta rows");
    }
    const auto song = load_song_audio(track_paths, mix_path);
    const auto inputs = clip_inputs(song, metas, ckpt.mel_cfg);
    if (inputs.empty()) {
        throw DataError("infer: audio shorter than one analysis window");
    }

    // stitch overlapping windows: every clip contributes its first hop worth
    // of frames, the final clip contributes all of them
    const int frames_per_clip = ckpt.mel_cfg.frames_per_clip();
    const int hop_frames = frames_per_clip / 2;
    std::vector<int> timeline;
    Rng rng(0);
    for (std::size_t c = 0; c < inputs.size(); ++c) {
        const auto fwd = forward(inputs[c], cfg, params, /*training=*/false, rng);
        const auto pred = predict(fwd.logits);
        const int keep = c + 1 == inputs.size() ? frames_per_clip : hop_frames;
        timeline.insert(timeline.end(), pred.begin(), pred.begin() + keep);
    }

    std::map<int, std::string> id_to_name;
    for (std::size_t i = 0; i < metas.size(); ++i) {
        id_to_name[metas[i].track_id] = names[i];
    }
    const auto label_name = [&](int label) {
        if (cfg.scheme == Scheme::Track) {
            const auto it = id_to_name.find(label);
            return it == id_to_name.end() ? std::string("__unknown__") : it->second;
        }
        return cfg.instrument_name(label);
    };
    const auto label_track_id = [&](int label) { return cfg.scheme == Scheme::Track ? label : -1; };

    const double frame_dt = 1.0 / ckpt.mel_cfg.frame_rate();
    if (!frames_path.empty()) {
        std::ofstream f(frames_path);
        if (!f) {
            throw DataError("infer: cannot write " + frames_path);
        }
        f << "time_sec,track_id,instrument\n";
        char buf[64];
        for (std::size_t t = 0; t < timeline.size(); ++t) {
            std::snprintf(buf, sizeof(buf), "%.3f,%d,", static_cast<double>(t) * frame_dt,
                          label_track_id(timeline[t]));
            f << buf << label_name(timeline[t]) << "\n";
        }
    }
    if (!segments_path.empty()) {
        std::ofstream f(segments_path);
        if (!f) {
            throw DataError("infer: cannot write " + segments_path);
        }
        f << "onset_sec,offset_sec,track_id,instrument\n";
        char buf[96];
        std::size_t start = 0;
        for (std::size_t t = 1; t <= timeline.size(); ++t) {
            if (t == timeline.size() || timeline[t] != timeline[start]) {
                std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%d,", static_cast<double>(start) * frame_dt,
                              static_cast<double>(t) * frame_dt, label_track_id(timeline[start]));
                f << buf << label_name(timeline[start]) << "\n";
                start = t;
            }
        }
    }
    std::printf("inferred %zu frames over %zu clips\n", timeline.size(), inputs.size());
    return 0;
}

int cmd_attn_dump(const std::string& ckpt_path, const std::vector<std::string>& track_paths,
                  const std::string& meta_path, const std::string& mix_path, double clip_start,
                  const std::string& out_path, const std::string& summary_path) {
    const auto ckpt = load_checkpoint(ckpt_path);
    if (ckpt.model_cfg.variant != Variant::TrackAttn) {
        throw DataError("attn-dump: checkpoint does not use track attention");
    }
    const auto params = build_params(ckpt);

    std::vector<std::string> names;
    const auto metas = read_meta_csv(meta_path, ckpt.model_cfg, &names);
    if (metas.size() != track_paths.size()) {
        throw DataError("attn-dump: --tracks count does not match --meta rows");
    }
    const auto song = load_song_audio(track_paths, mix_path);

    const auto clip_of = [&](const Waveform& w) {
        const auto start = static_cast<std::int64_t>(std::llround(clip_start * w.sample_rate));
        const auto len = static_cast<std::int64_t>(
            std::llround(ckpt.mel_cfg.clip_sec * w.sample_rate));
        if (start < 0 || start + len > w.frames()) {
            throw DataError("attn-dump: --clip-start window exceeds the audio");
        }
        Waveform c;
        c.sample_rate = w.sample_rate;
        c.channels = 1;
        c.samples.assign(w.samples.begin() + start, w.samples.begin() + start + len);
        return c;
    };

    ModelInput input;
    input.mix.mel = log_mel(clip_of(song.mix), ckpt.mel_cfg);
    input.mix.meta = TrackMeta{kMixTrackId, kInstMix};
    for (std::size_t t = 0; t < song.tracks.size(); ++t) {
        input.tracks.push_back({log_mel(clip_of(song.tracks[t]), ckpt.mel_cfg), metas[t]});
    }

    Rng rng(0);
    const auto fwd = forward(input, ckpt.model_cfg, params, /*training=*/false, rng);
    if (!fwd.trace) {
        throw DataError("attn-dump: forward produced no attention trace");
    }
    const auto& trace = *fwd.trace;

    std::ofstream f(out_path);
    if (!f) {
        throw DataError("attn-dump: cannot write " + out_path);
    }
    f << "head,frame,track_id,weight\n";
    char buf[96];
    for (int h = 0; h < trace.heads; ++h) {
        for (int t = 0; t < trace.frames; ++t) {
            for (int i = 0; i < trace.n_tracks; ++i) {
                std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.12f\n", h, t,
                              trace.track_ids[static_cast<std::size_t>(i)], trace.at(h, t, i));
                f << buf;
            }
        }
    }
    if (!summary_path.empty()) {
        std::ofstream s(summary_path);
        if (!s) {
            throw DataError("attn-dump: cannot write " + summary_path);
        }
        s << "frame,time_sec,dominant_track_id\n";
        for (int t = 0; t < trace.frames; ++t) {
            int best = 0;
            double best_w = -1.0;
            for (int i = 0; i < trace.n_tracks; ++i) {
                double w = 0.0;
                for (int h = 0; h < trace.heads; ++h) {
                    w += trace.at(h, t, i);
                }
                if (w > best_w) {
                    best_w = w;
                    best = trace.track_ids[static_cast<std::size_t>(i)];
                }
            }
            std::snprintf(buf, sizeof(buf), "%d,%.3f,%d\n", t,
                          clip_start + ckpt.mel_cfg.frame_center_sec(t), best);
            s << buf;
        }
    }
    std::printf("wrote %d x %d x %d attention weights to %s\n", trace.heads, trace.frames,
                trace.n_tracks, out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lead instrument detection on multitrack audio"};
    app.require_subcommand(1);

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "Generate a synthetic multitrack dataset");
    std::string synth_out;
    int synth_songs = 20;
    std::uint64_t synth_seed = 1;
    std::string synth_bleed = "-20";
    double synth_skew = 1.0;
    bool synth_unseen = false;
    double synth_duration = 20.0;
    int synth_domain_b = 0;
    bool synth_leaky = false;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--songs", synth_songs, "Number of songs");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--bleed", synth_bleed, "Cross-talk level in dB, or 'off'");
    synth->add_option("--skew", synth_skew, "Lead-frequency ratio between adjacent tracks");
    synth->add_flag("--unseen-instrument", synth_unseen,
                    "Hold one timbre out of the train/valid splits");
    synth->add_option("--duration", synth_duration, "Song length in seconds (multiple of 2.5)");
    synth->add_option("--domain-b-songs", synth_domain_b,
                      "Extra out-of-domain songs appended to the test split");
    synth->add_flag("--leaky-layout", synth_leaky,
                    "Pin the lead to track 1 in training songs (augmentation stress test)");
    int synth_min_tracks = 3;
    int synth_max_tracks = 6;
    synth->add_option("--min-tracks", synth_min_tracks, "Minimum tracks per song");
    synth->add_option("--max-tracks", synth_max_tracks, "Maximum tracks per song");

    // train
    auto* tr = app.add_subcommand("train", "Train a model from a dataset manifest");
    std::string tr_data, tr_config, tr_out;
    std::string tr_variant, tr_scheme;
    bool no_track_perm = false, no_inst_emb = false, no_track_emb = false, no_oracle_mix = false,
         freeze_encoder = false, segment_level = false;
    std::optional<std::uint64_t> tr_seed;
    std::optional<int> tr_epochs;
    tr->add_option("--data", tr_data, "Path to manifest.json")->required();
    tr->add_option("--config", tr_config, "JSON config file (sections: model, train, mel)");
    tr->add_option("--out", tr_out, "Run output directory")->required();
    tr->add_option("--variant", tr_variant, "from_mix | track_avg | track_attn");
    tr->add_option("--scheme", tr_scheme, "inst | track");
    tr->add_flag("--no-track-perm", no_track_perm, "Disable track permutation augmentation");
    tr->add_flag("--no-inst-emb", no_inst_emb, "Disable instrument embeddings");
    tr->add_flag("--no-track-emb", no_track_emb, "Disable track-id embeddings");
    tr->add_flag("--no-oracle-mix", no_oracle_mix, "Replace the mixture with a waveform average");
    tr->add_flag("--freeze-encoder", freeze_encoder, "Exclude encoder parameters from training");
    tr->add_flag("--segment-level", segment_level, "Classify whole clips instead of frames");
    bool mask_absent = false;
    tr->add_flag("--mask-absent-tracks", mask_absent,
                 "Restrict track-scheme predictions to ids present in each sample (analysis)");
    tr->add_option("--seed", tr_seed, "Training seed");
    tr->add_option("--epochs", tr_epochs, "Training epochs");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
    std::string ev_ckpt, ev_data, ev_split = "test", ev_report, ev_confusion;
    ev->add_option("--ckpt", ev_ckpt, "Checkpoint file")->required();
    ev->add_option("--data", ev_data, "Path to manifest.json")->required();
    ev->add_option("--split", ev_split, "test | valid | train");
    ev->add_option("--report", ev_report, "Write a JSON metrics report here");
    ev->add_option("--confusion", ev_confusion, "Write the confusion matrix CSV here");

    // infer
    auto* in = app.add_subcommand("infer", "Predict per-frame lead labels for a song");
    std::string in_ckpt, in_meta, in_mix, in_frames = "frames.csv", in_segments = "segments.csv";
    std::vector<std::string> in_tracks;
    in->add_option("--ckpt", in_ckpt, "Checkpoint file")->required();
    in->add_option("--tracks", in_tracks, "Track WAV files")->required()->expected(-1);
    in->add_option("--meta", in_meta, "CSV with header track_id,instrument")->required();
    in->add_option("--mix", in_mix, "Mixture WAV (omit to use the track average)");
    in->add_option("--out-frames", in_frames, "Frame label CSV path");
    in->add_option("--out-segments", in_segments, "Merged segment CSV path");

    // attn-dump
    auto* ad = app.add_subcommand("attn-dump", "Export attention weights for one 5 s window");
    std::string ad_ckpt, ad_meta, ad_mix, ad_out, ad_summary;
    std::vector<std::string> ad_tracks;
    double ad_start = 0.0;
    ad->add_option("--ckpt", ad_ckpt, "Checkpoint file")->required();
    ad->add_option("--tracks", ad_tracks, "Track WAV files")->required()->expected(-1);
    ad->add_option("--meta", ad_meta, "CSV with header track_id,instrument")->required();
    ad->add_option("--mix", ad_mix, "Mixture WAV (omit to use the track average)");
    ad->add_option("--clip-start", ad_start, "Window start in seconds");
    ad->add_option("--out", ad_out, "Weight CSV path")->required();
    ad->add_option("--summary", ad_summary, "Optional per-frame dominant-track CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth_data(synth_out, synth_songs, synth_seed, synth_bleed, synth_skew,
                                  synth_unseen, synth_duration, synth_domain_b, synth_leaky,
                                  synth_min_tracks, synth_max_tracks);
        }
        if (tr->parsed()) {
            RunConfig rc = load_run_config(tr_config, RunConfig{});
            if (!tr_variant.empty()) {
                rc.model.variant = variant_from_string(tr_variant);
            }
            if (!tr_scheme.empty()) {
                rc.model.scheme = scheme_from_string(tr_scheme);
            }
            if (no_track_perm) {
                rc.train.track_perm = false;
            }
            if (no_inst_emb) {
                rc.model.use_inst_emb = false;
            }
            if (no_track_emb) {
                rc.model.use_track_emb = false;
            }
            if (no_oracle_mix) {
                rc.model.use_oracle_mix = false;
            }
            if (freeze_encoder) {
                rc.train.freeze_encoder = true;
            }
            if (segment_level) {
                rc.model.segment_level = true;
            }
            if (mask_absent) {
                rc.model.mask_absent_tracks = true;
            }
            if (tr_seed) {
                rc.train.seed = *tr_seed;
            }
            if (tr_epochs) {
                rc.train.epochs = *tr_epochs;
            }
            return cmd_train(rc, tr_data, tr_out);
        }
        if (ev->parsed()) {
            return cmd_eval(ev_ckpt, ev_data, ev_split, ev_report, ev_confusion);
        }
        if (in->parsed()) {
            return cmd_infer(in_ckpt, in_tracks, in_meta, in_mix, in_frames, in_segments);
        }
        if (ad->parsed()) {
            return cmd_attn_dump(ad_ckpt, ad_tracks, ad_meta, ad_mix, ad_start, ad_out, ad_summary);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric abort: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
