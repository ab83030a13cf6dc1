#include "leadnet/augment.hpp"

#include <numeric>

#include "leadnet/errors.hpp"
#include "leadnet/model.hpp"

namespace leadnet {

int TrackPermutation::apply(int track_id) const {
    const auto it = mapping.find(track_id);
    if (it == mapping.end()) {
        throw DataError("permutation: id not in mapping domain");
    }
    return it->second;
}

TrackPermutation TrackPermutation::inverse() const {
    TrackPermutation inv;
    for (const auto& [from, to] : mapping) {
        inv.mapping[to] = from;
    }
    if (inv.mapping.size() != mapping.size()) {
        throw DataError("permutation: mapping is not injective");
    }
    return inv;
}

TrackPermutation sample_permutation(const std::vector<int>& track_ids, int max_tracks, Rng& rng) {
    if (track_ids.empty()) {
        throw DataError("sample_permutation: no instrument tracks");
    }
    if (static_cast<int>(track_ids.size()) > max_tracks) {
        throw DataError("sample_permutation: more tracks than id slots");
    }
    for (int id : track_ids) {
        if (id < 1 || id > max_tracks) {
            throw DataError("sample_permutation: track id outside [1, max_tracks]");
        }
    }
    std::vector<int> slots(static_cast<std::size_t>(max_tracks));
    std::iota(slots.begin(), slots.end(), 1);
    rng.shuffle(slots);

    TrackPermutation p;
    p.mapping[kMixTrackId] = kMixTrackId;
    for (std::size_t i = 0; i < track_ids.size(); ++i) {
        p.mapping[track_ids[i]] = slots[i];
    }
    if (p.mapping.size() != track_ids.size() + 1) {
        throw DataError("sample_permutation: duplicate track ids");
    }
    return p;
}

}  // namespace leadnet
