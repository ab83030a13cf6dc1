#pragma once

#include <map>
#include <vector>

#include "leadnet/rng.hpp"

namespace leadnet {

/// Injective remapping of the track ids present in one sample into the full
/// id space [1, max_tracks]; the mixture id 0 is always a fixed point.
struct TrackPermutation {
    std::map<int, int> mapping;  // old id -> new id, includes 0 -> 0

    int apply(int track_id) const;
    TrackPermutation inverse() const;
};

/// Uniformly sample a remapping of the given instrument-track ids into
/// [1, max_tracks]. Ids may land on previously unused slots.
TrackPermutation sample_permutation(const std::vector<int>& track_ids, int max_tracks, Rng& rng);

}  // namespace leadnet
