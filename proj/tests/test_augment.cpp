#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "leadnet/augment.hpp"
#include "leadnet/dataset.hpp"
#include "leadnet/errors.hpp"

using namespace leadnet;

namespace {

ClipSample small_sample() {
    ClipSample s;
    s.input.mix.mel = zeros({4, 8});
    s.input.mix.meta = TrackMeta{kMixTrackId, kInstMix};
    for (int id : {1, 2}) {
        TrackInput ti;
        ti.mel = zeros({4, 8});
        ti.meta.track_id = id;
        ti.meta.instrument = 2 + id;
        s.input.tracks.push_back(std::move(ti));
    }
    s.labels_track = {2, 2, 1, 1};
    s.labels_inst = {4, 4, 3, 3};
    return s;
}

}  // namespace

TEST_CASE("identity permutation leaves the sample unchanged") {
    auto s = small_sample();
    TrackPermutation identity;
    identity.mapping = {{0, 0}, {1, 1}, {2, 2}};
    auto out = apply_permutation(s, identity);
    CHECK(out.labels_track == s.labels_track);
    CHECK(out.labels_inst == s.labels_inst);
    for (std::size_t i = 0; i < s.input.tracks.size(); ++i) {
        CHECK(out.input.tracks[i].meta.track_id == s.input.tracks[i].meta.track_id);
    }
}

TEST_CASE("swap remaps labels with the metadata") {
    auto s = small_sample();
    TrackPermutation swap;
    swap.mapping = {{0, 0}, {1, 2}, {2, 1}};
    auto out = apply_permutation(s, swap);
    CHECK(out.labels_track == std::vector<int>{1, 1, 2, 2});
    CHECK(out.input.tracks[0].meta.track_id == 2);
    CHECK(out.input.tracks[1].meta.track_id == 1);
    // instrument labels and features untouched
    CHECK(out.labels_inst == s.labels_inst);
    CHECK(out.input.tracks[0].mel.get() == s.input.tracks[0].mel.get());
}

TEST_CASE("round trip through the inverse is exact") {
    auto s = small_sample();
    Rng rng(5);
    const auto p = sample_permutation({1, 2}, 6, rng);
    const auto there = apply_permutation(s, p);
    const auto back = apply_permutation(there, p.inverse());
    CHECK(back.labels_track == s.labels_track);
    for (std::size_t i = 0; i < s.input.tracks.size(); ++i) {
        CHECK(back.input.tracks[i].meta.track_id == s.input.tracks[i].meta.track_id);
    }
}

TEST_CASE("single track with one slot forces the identity") {
    Rng rng(1);
    const auto p = sample_permutation({1}, 1, rng);
    CHECK(p.apply(1) == 1);
    CHECK(p.apply(0) == 0);
}

TEST_CASE("seeded draws are reproducible") {
    Rng a(77);
    Rng b(77);
    for (int i = 0; i < 20; ++i) {
        const auto pa = sample_permutation({1, 2, 3}, 8, a);
        const auto pb = sample_permutation({1, 2, 3}, 8, b);
        CHECK(pa.mapping == pb.mapping);
    }
}

TEST_CASE("two tracks into two slots are uniform over both bijections") {
    Rng rng(123);
    int identity_count = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const auto p = sample_permutation({1, 2}, 2, rng);
        identity_count += p.apply(1) == 1 ? 1 : 0;
    }
    const double frac = static_cast<double>(identity_count) / draws;
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
}

TEST_CASE("ids may move into unused slots") {
    Rng rng(9);
    bool saw_new_slot = false;
    for (int i = 0; i < 200 && !saw_new_slot; ++i) {
        const auto p = sample_permutation({1, 2}, 8, rng);
        saw_new_slot = p.apply(1) > 2 || p.apply(2) > 2;
    }
    CHECK(saw_new_slot);
}

TEST_CASE("labels outside the mapping are rejected") {
    auto s = small_sample();
    s.labels_track[0] = 5;  // no track with id 5
    Rng rng(2);
    const auto p = sample_permutation({1, 2}, 6, rng);
    CHECK_THROWS_AS(apply_permutation(s, p), DataError);
}

TEST_CASE("sample_permutation validates its inputs") {
    Rng rng(3);
    CHECK_THROWS_AS(sample_permutation({}, 4, rng), DataError);
    CHECK_THROWS_AS(sample_permutation({0}, 4, rng), DataError);
    CHECK_THROWS_AS(sample_permutation({1, 2, 3, 4, 5}, 4, rng), DataError);
    CHECK_THROWS_AS(sample_permutation({1, 1}, 4, rng), DataError);
}

TEST_CASE("augmentation is a no-op for instrument labels on real samples") {
    auto s = small_sample();
    Rng rng(31);
    for (int i = 0; i < 10; ++i) {
        const auto p = sample_permutation({1, 2}, 8, rng);
        const auto out = apply_permutation(s, p);
        CHECK(out.labels_inst == s.labels_inst);
        // content-label binding: the label still names the physical track
        // that carried the lead, wherever its id moved
        for (std::size_t t = 0; t < out.labels_track.size(); ++t) {
            const int physical = s.labels_track[t] - 1;  // original ids are 1-based order
            CHECK(out.labels_track[t] ==
                  out.input.tracks[static_cast<std::size_t>(physical)].meta.track_id);
        }
    }
}
