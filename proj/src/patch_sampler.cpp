// patch_sampler.cpp

#include "btseg/patch_sampler.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "btseg/stats_util.hpp"

namespace btseg {

std::array<int, 3> SamplingWeights::center_at(size_t flat) const {
    const auto& s = weights.shape;
    const int k = static_cast<int>(flat % s[2]);
    const int j = static_cast<int>((flat / s[2]) % s[1]);
    const int i = static_cast<int>(flat / (static_cast<size_t>(s[1]) * s[2]));
    return {lo[0] + i, lo[1] + j, lo[2] + k};
}

std::array<int, 3> SamplingWeights::block_start(
    const std::array<int, 3>& center) const {
    const int h = patch_size / 2;
    return {center[0] - h, center[1] - h, center[2] - h};
}

SamplingWeights compute_sampling_weights(const MultiModalVolume& volume,
                                         const LabelMap& labels,
                                         int patch_size) {
    const auto sp = volume.spatial_shape();
    if (labels.shape != sp)
        throw std::runtime_error(
            "compute_sampling_weights: label shape mismatch");
    if (patch_size < 1)
        throw std::runtime_error("compute_sampling_weights: patch size < 1");
    for (int a = 0; a < 3; ++a)
        if (patch_size > sp[a])
            throw std::runtime_error(
                "compute_sampling_weights: patch size " +
                std::to_string(patch_size) + " exceeds volume extent " +
                shape_string(sp));

    // Per-voxel max over the 4 channels, and its volume-wide 1st
    // percentile. Voxels strictly below the threshold get weight 1.
    const size_t nvox = volume.voxels();
    const int nc = volume.channels();
    std::vector<float> maxint(nvox);
    for (size_t v = 0; v < nvox; ++v) {
        float m = volume.data[v * nc];
        for (int c = 1; c < nc; ++c)
            m = std::max(m, volume.data[v * nc + c]);
        maxint[v] = m;
    }
    const float threshold = static_cast<float>(percentile(maxint, 1.0));

    SamplingWeights w;
    w.patch_size = patch_size;
    const int h = patch_size / 2;
    for (int a = 0; a < 3; ++a) {
        w.lo[a] = h;
        w.hi[a] = sp[a] - patch_size + h;
    }
    w.weights = Grid3<uint8_t>(w.hi[0] - w.lo[0] + 1, w.hi[1] - w.lo[1] + 1,
                               w.hi[2] - w.lo[2] + 1);
    w.cumulative.resize(w.weights.size());

    size_t flat = 0;
    uint64_t running = 0;
    for (int i = w.lo[0]; i <= w.hi[0]; ++i)
        for (int j = w.lo[1]; j <= w.hi[1]; ++j)
            for (int k = w.lo[2]; k <= w.hi[2]; ++k, ++flat) {
                const size_t v = labels.index(i, j, k);
                uint8_t s;
                if (labels.data[v] != 0)
                    s = 6;  // foreground takes precedence
                else if (maxint[v] < threshold)
                    s = 1;
                else
                    s = 3;
                w.weights.data[flat] = s;
                running += s;
                w.cumulative[flat] = running;
            }
    w.total = running;
    return w;
}

PatchSample extract_patch(const SamplingWeights& w,
                          const MultiModalVolume& volume,
                          const LabelMap& labels,
                          const std::array<int, 3>& center) {
    const int n = w.patch_size;
    const auto start = w.block_start(center);
    const auto sp = volume.spatial_shape();
    for (int a = 0; a < 3; ++a)
        if (start[a] < 0 || start[a] + n > sp[a])
            throw std::runtime_error("extract_patch: center out of range");

    PatchSample p;
    p.center = center;
    p.image = Grid4<float>(n, n, n, 4);
    p.labels = LabelMap(n, n, n);
    const int nc = volume.channels();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const size_t src =
                volume.index(start[0] + i, start[1] + j, start[2], 0);
            std::memcpy(&p.image.data[p.image.index(i, j, 0, 0)],
                        &volume.data[src],
                        static_cast<size_t>(n) * nc * sizeof(float));
            const size_t lsrc =
                labels.index(start[0] + i, start[1] + j, start[2]);
            std::memcpy(&p.labels.data[p.labels.index(i, j, 0)],
                        &labels.data[lsrc], static_cast<size_t>(n));
        }
    return p;
}

PatchSample sample_patch(Rng& rng, const SamplingWeights& w,
                         const MultiModalVolume& volume,
                         const LabelMap& labels, int patch_size) {
    if (patch_size != w.patch_size)
        throw std::runtime_error("sample_patch: patch size mismatch");
    if (w.total == 0 || w.cumulative.empty())
        throw std::runtime_error("sample_patch: empty sampling weights");

    const uint64_t r = bounded_u64(rng, w.total);
    const auto it =
        std::upper_bound(w.cumulative.begin(), w.cumulative.end(), r);
    const size_t flat = static_cast<size_t>(it - w.cumulative.begin());
    PatchSample p = extract_patch(w, volume, labels, w.center_at(flat));
    if (uniform01(rng) < 0.5) p = lr_flip(p);
    return p;
}

PatchSample lr_flip(const PatchSample& p) {
    PatchSample out = p;
    out.flipped = !p.flipped;
    lr_flip(out.image);
    lr_flip(out.labels);
    return out;
}

Grid4<float> crop_window(const Grid4<float>& volume,
                         const std::array<int, 3>& origin, int n) {
    const auto sp = volume.spatial_shape();
    for (int a = 0; a < 3; ++a)
        if (origin[a] < 0 || origin[a] + n > sp[a])
            throw std::runtime_error("crop_window: window out of range");
    const int nc = volume.channels();
    Grid4<float> out(n, n, n, nc);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const size_t src =
                volume.index(origin[0] + i, origin[1] + j, origin[2], 0);
            std::memcpy(&out.data[out.index(i, j, 0, 0)], &volume.data[src],
                        static_cast<size_t>(n) * nc * sizeof(float));
        }
    return out;
}

void lr_flip(Grid4<float>& g) {
    const int d0 = g.shape[0], d1 = g.shape[1], d2 = g.shape[2],
              nc = g.shape[3];
    for (int i = 0; i < d0; ++i)
        for (int j = 0; j < d1; ++j)
            for (int k = 0; k < d2 / 2; ++k) {
                float* a = &g.data[g.index(i, j, k, 0)];
                float* b = &g.data[g.index(i, j, d2 - 1 - k, 0)];
                std::swap_ranges(a, a + nc, b);
            }
}

void lr_flip(Grid3<uint8_t>& g) {
    const int d0 = g.shape[0], d1 = g.shape[1], d2 = g.shape[2];
    for (int i = 0; i < d0; ++i)
        for (int j = 0; j < d1; ++j) {
            uint8_t* row = &g.data[g.index(i, j, 0)];
            std::reverse(row, row + d2);
        }
}

void standardize(Grid4<float>& image, const ChannelStats& s) {
    const int64_t nc = image.channels();
    if (nc != 4)
        throw std::runtime_error("standardize: expected 4 channels");
    for (int c = 0; c < 4; ++c)
        if (!(s.stddev[c] > 0))
            throw std::runtime_error("standardize: non-positive std");
    const size_t nvox = image.voxels();
    for (size_t v = 0; v < nvox; ++v)
        for (int c = 0; c < 4; ++c) {
            float& x = image.data[v * 4 + c];
            x = static_cast<float>((x - s.mean[c]) / s.stddev[c]);
        }
}

ChannelStats estimate_channel_stats(std::span<const SamplerSubject> subjects,
                                    int patch_size, int draws, Rng& rng) {
    if (subjects.empty())
        throw std::runtime_error("estimate_channel_stats: no subjects");
    if (draws < 1)
        throw std::runtime_error("estimate_channel_stats: draws < 1");

    std::array<double, 4> sum{}, sumsq{};
    uint64_t count = 0;
    for (int d = 0; d < draws; ++d) {
        const auto& s = subjects[bounded_u64(rng, subjects.size())];
        const PatchSample p =
            sample_patch(rng, *s.weights, *s.volume, *s.labels, patch_size);
        const size_t nvox = p.image.voxels();
        for (size_t v = 0; v < nvox; ++v)
            for (int c = 0; c < 4; ++c) {
                const double x = p.image.data[v * 4 + c];
                sum[c] += x;
                sumsq[c] += x * x;
            }
        count += nvox;
    }

    ChannelStats st;
    for (int c = 0; c < 4; ++c) {
        st.mean[c] = sum[c] / static_cast<double>(count);
        const double var =
            sumsq[c] / static_cast<double>(count) - st.mean[c] * st.mean[c];
        st.stddev[c] = std::sqrt(std::max(var, 0.0));
        if (!(st.stddev[c] > 1e-12))
            throw std::runtime_error(
                "estimate_channel_stats: zero standard deviation in channel " +
                std::to_string(c));
    }
    return st;
}

PatchSample standardize(PatchSample p, const ChannelStats& s) {
    standardize(p.image, s);
    return p;
}

}  // namespace btseg
