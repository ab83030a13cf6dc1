#pragma once

#include <string>
#include <vector>

#include "leadnet/augment.hpp"
#include "leadnet/datagen.hpp"
#include "leadnet/model.hpp"

namespace leadnet {

/// One 5 s training/evaluation unit: featurized mixture and tracks plus the
/// frame labels under both classification schemes.
struct ClipSample {
    std::string song_id;
    int clip_index = 0;
    double start_sec = 0.0;
    ModelInput input;
    std::vector<int> labels_track;  // frame-level track ids
    std::vector<int> labels_inst;   // frame-level instrument indices
};

const std::vector<int>& labels_for(const ClipSample& s, Scheme scheme);

/// Majority frame label of the clip; ties go to the lowest class index.
int segment_label(const ClipSample& s, Scheme scheme);

struct LoadOptions {
    MelConfig mel;
    bool use_oracle_mix = true;  // false substitutes the waveform-average pseudo mix
};

/// Load a manifest split into featurized clips: per track peak-normalize,
/// downmix, resample, segment, log-mel. Instrument names map through the
/// model vocabulary (unknown names fall back to the reserved slot).
std::vector<ClipSample> load_clips(const DatasetManifest& manifest, const std::string& split,
                                   const ModelConfig& cfg, const LoadOptions& opts);

/// Track permutation augmentation: remap track-id metadata and track-scheme
/// labels through p. Audio features and instrument labels are untouched;
/// feature tensors are shared with the source sample.
ClipSample apply_permutation(const ClipSample& s, const TrackPermutation& p);

}  // namespace leadnet
