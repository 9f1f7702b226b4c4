// patch_sampler.hpp
// Non-uniform random patch extraction. Center probabilities follow
// p = s / sum(s) with s = 6 on foreground voxels, s = 1 on voxels whose
// max-over-channels intensity lies strictly below the volume-wide 1st
// percentile of that max image, and s = 3 elsewhere. Foreground wins on
// conflict. Patches are always fully contained in the volume; a
// left-right flip is applied with probability 1/2 after extraction.

#pragma once

#include <array>
#include <span>
#include <vector>

#include "btseg/rng.hpp"
#include "btseg/volume.hpp"

namespace btseg {

struct SamplingWeights {
    int patch_size = 0;
    std::array<int, 3> lo{};  // inclusive valid-center bounds per axis
    std::array<int, 3> hi{};
    Grid3<uint8_t> weights;   // over [lo,hi]^3, values in {1,3,6}
    uint64_t total = 0;
    std::vector<uint64_t> cumulative;  // exact integer prefix sums

    size_t center_count() const { return weights.size(); }
    std::array<int, 3> center_at(size_t flat_index) const;
    // Patch block start for a given center: center - floor(N/2) per axis.
    std::array<int, 3> block_start(const std::array<int, 3>& center) const;
};

struct PatchSample {
    Grid4<float> image;  // (N,N,N,4)
    LabelMap labels;     // (N,N,N)
    std::array<int, 3> center{};
    bool flipped = false;
};

struct ChannelStats {
    std::array<double, 4> mean{};
    std::array<double, 4> stddev{};
};

SamplingWeights compute_sampling_weights(const MultiModalVolume& volume,
                                         const LabelMap& labels,
                                         int patch_size);

PatchSample sample_patch(Rng& rng, const SamplingWeights& w,
                         const MultiModalVolume& volume,
                         const LabelMap& labels, int patch_size);

// Deterministic extraction at a fixed center, no flip draw.
PatchSample extract_patch(const SamplingWeights& w,
                          const MultiModalVolume& volume,
                          const LabelMap& labels,
                          const std::array<int, 3>& center);

PatchSample lr_flip(const PatchSample& p);

// Grid-level building blocks, shared with sliding-window inference.
Grid4<float> crop_window(const Grid4<float>& volume,
                         const std::array<int, 3>& origin, int n);
void lr_flip(Grid4<float>& g);        // reverse axis 2 in place
void lr_flip(Grid3<uint8_t>& g);      // reverse axis 2 in place
void standardize(Grid4<float>& image, const ChannelStats& s);

// One training subject as seen by the sampler; weights precomputed.
struct SamplerSubject {
    const MultiModalVolume* volume = nullptr;
    const LabelMap* labels = nullptr;
    const SamplingWeights* weights = nullptr;
};

// Runs the extraction process `draws` times, each on a uniformly chosen
// subject, and accumulates per-channel mean/std over all patch voxels.
ChannelStats estimate_channel_stats(std::span<const SamplerSubject> subjects,
                                    int patch_size, int draws, Rng& rng);

// (x - mean_c) / std_c on the image channels; labels untouched.
PatchSample standardize(PatchSample p, const ChannelStats& s);

}  // namespace btseg
