#include "leadnet/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "leadnet/errors.hpp"

namespace fs = std::filesystem;

namespace leadnet {

const std::vector<int>& labels_for(const ClipSample& s, Scheme scheme) {
    return scheme == Scheme::Track ? s.labels_track : s.labels_inst;
}

int segment_label(const ClipSample& s, Scheme scheme) {
    const auto& labels = labels_for(s, scheme);
    std::map<int, int> counts;
    for (int v : labels) {
        ++counts[v];
    }
    int best = -1;
    int best_count = 0;
    for (const auto& [label, count] : counts) {  // map order breaks ties low
        if (count > best_count) {
            best = label;
            best_count = count;
        }
    }
    return best;
}

std::vector<ClipSample> load_clips(const DatasetManifest& manifest, const std::string& split,
                                   const ModelConfig& cfg, const LoadOptions& opts) {
    const ClipWindow window{opts.mel.clip_sec, 2.5};
    std::vector<ClipSample> out;

    for (const ManifestSong* song : manifest.split_songs(split)) {
        const fs::path root(manifest.root_dir);
        LeadSchedule sched = read_annotation((root / song->annotation_path).string());

        std::vector<Waveform> track_waves;
        std::vector<TrackMeta> metas;
        std::map<int, int> id_to_inst;
        for (const auto& t : song->tracks) {
            track_waves.push_back(preprocess(read_wav((root / t.path).string())));
            TrackMeta meta;
            meta.track_id = t.track_id;
            meta.instrument = cfg.instrument_index(t.instrument);
            id_to_inst[meta.track_id] = meta.instrument;
            metas.push_back(meta);
        }

        Waveform mix;
        if (opts.use_oracle_mix) {
            mix = preprocess(read_wav((root / song->mix_path).string()));
        } else {
            mix = normalize_peak(pseudo_mix(track_waves));
        }

        std::vector<std::vector<Waveform>> track_clips;
        track_clips.reserve(track_waves.size());
        for (const auto& w : track_waves) {
            track_clips.push_back(segment(w, window));
        }
        const auto mix_clips = segment(mix, window);
        for (const auto& clips : track_clips) {
            if (clips.size() != mix_clips.size()) {
                throw DataError("load_clips: track/mixture clip count mismatch in " + song->id);
            }
        }

        for (std::size_t c = 0; c < mix_clips.size(); ++c) {
            ClipSample s;
            s.song_id = song->id;
            s.clip_index = static_cast<int>(c);
            s.start_sec = static_cast<double>(c) * window.hop_sec;
            s.input.mix.mel = log_mel(mix_clips[c], opts.mel);
            s.input.mix.meta = TrackMeta{kMixTrackId, kInstMix};
            for (std::size_t t = 0; t < track_waves.size(); ++t) {
                TrackInput ti;
                ti.mel = log_mel(track_clips[t][c], opts.mel);
                ti.meta = metas[t];
                s.input.tracks.push_back(std::move(ti));
            }
            s.labels_track = labels_from_schedule(sched, opts.mel, s.start_sec);
            s.labels_inst.reserve(s.labels_track.size());
            for (int id : s.labels_track) {
                const auto it = id_to_inst.find(id);
                if (it == id_to_inst.end()) {
                    throw DataError("load_clips: annotation labels unknown track id in " + song->id);
                }
                s.labels_inst.push_back(it->second);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

ClipSample apply_permutation(const ClipSample& s, const TrackPermutation& p) {
    ClipSample out = s;  // shares feature tensors
    for (auto& tr : out.input.tracks) {
        tr.meta.track_id = p.apply(tr.meta.track_id);
    }
    for (auto& label : out.labels_track) {
        label = p.apply(label);
    }
    return out;
}

}  // namespace leadnet
