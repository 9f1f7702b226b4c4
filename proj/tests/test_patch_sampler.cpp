#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "btseg/patch_sampler.hpp"
#include "test_util.hpp"

using namespace btseg;

namespace {

// 24^3 volume, uniform 0.5 intensity on all channels, a 3^3 zero-intensity
// cube at [10,13) and a 3^3 class-1 cube at [15,18). The dark cube is
// under 1% of the voxels, so the strictly-below-1st-percentile rule puts
// exactly those centers in the low-intensity class.
struct Fixture {
    int dim = 24;
    MultiModalVolume volume;
    LabelMap labels;

    Fixture() : volume(24, 24, 24, 4, 0.5f), labels(24, 24, 24) {
        for (int i = 10; i < 13; ++i)
            for (int j = 10; j < 13; ++j)
                for (int k = 10; k < 13; ++k)
                    for (int c = 0; c < 4; ++c) volume.at(i, j, k, c) = 0.f;
        for (int i = 15; i < 18; ++i)
            for (int j = 15; j < 18; ++j)
                for (int k = 15; k < 18; ++k) labels.at(i, j, k) = 1;
    }

    // The sampling rule, restated independently of the implementation.
    int expected_weight(int i, int j, int k) const {
        if (labels.at(i, j, k) != 0) return 6;
        if (volume.at(i, j, k, 0) == 0.f) return 1;
        return 3;
    }
};

}  // namespace

TEST_CASE("sampling weights match the stated rule at every valid center") {
    const Fixture fx;
    const int n = 8;
    const SamplingWeights w = compute_sampling_weights(fx.volume, fx.labels, n);

    CHECK(w.patch_size == n);
    for (int a = 0; a < 3; ++a) {
        CHECK(w.lo[a] == n / 2);
        CHECK(w.hi[a] == fx.dim - n + n / 2);
    }

    uint64_t total = 0;
    size_t flat = 0;
    for (int i = w.lo[0]; i <= w.hi[0]; ++i)
        for (int j = w.lo[1]; j <= w.hi[1]; ++j)
            for (int k = w.lo[2]; k <= w.hi[2]; ++k, ++flat) {
                const int expect = fx.expected_weight(i, j, k);
                CHECK(int(w.weights.data[flat]) == expect);
                total += expect;
                CHECK(w.cumulative[flat] == total);
                CHECK(w.center_at(flat) == std::array<int, 3>{i, j, k});
            }
    // Normalization: the probabilities s/total sum to 1 exactly because the
    // integer prefix sums end at the integer total.
    CHECK(w.total == total);
    CHECK(w.cumulative.back() == w.total);
}

TEST_CASE("empirical center frequencies pass a chi-squared test") {
    const Fixture fx;
    const int n = 8;
    const SamplingWeights w = compute_sampling_weights(fx.volume, fx.labels, n);

    // Analytic class probabilities from independently counted centers.
    std::array<uint64_t, 3> count{};  // classes: weight 1, 3, 6
    for (int i = w.lo[0]; i <= w.hi[0]; ++i)
        for (int j = w.lo[1]; j <= w.hi[1]; ++j)
            for (int k = w.lo[2]; k <= w.hi[2]; ++k) {
                const int s = fx.expected_weight(i, j, k);
                ++count[s == 1 ? 0 : s == 3 ? 1 : 2];
            }
    const double total = double(count[0]) + 3.0 * count[1] + 6.0 * count[2];

    const int draws = 100000;
    Rng rng(424242);
    std::array<uint64_t, 3> obs{};
    for (int d = 0; d < draws; ++d) {
        const PatchSample p =
            sample_patch(rng, w, fx.volume, fx.labels, n);
        const int s =
            fx.expected_weight(p.center[0], p.center[1], p.center[2]);
        ++obs[s == 1 ? 0 : s == 3 ? 1 : 2];
    }

    double chi2 = 0;
    const std::array<double, 3> mult = {1.0, 3.0, 6.0};
    for (int c = 0; c < 3; ++c) {
        const double expect = draws * mult[c] * double(count[c]) / total;
        REQUIRE(expect > 5.0);
        chi2 += (obs[c] - expect) * (obs[c] - expect) / expect;
    }
    // 2 degrees of freedom, p > 0.01 -> chi2 below 9.210.
    CHECK(chi2 < 9.210);
}

TEST_CASE("every sampled patch is contained in the volume") {
    const Fixture fx;
    for (int n : {8, 7}) {
        const SamplingWeights w =
            compute_sampling_weights(fx.volume, fx.labels, n);
        Rng rng(99);
        for (int d = 0; d < 300; ++d) {
            const PatchSample p =
                sample_patch(rng, w, fx.volume, fx.labels, n);
            const auto start = w.block_start(p.center);
            for (int a = 0; a < 3; ++a) {
                CHECK(start[a] == p.center[a] - n / 2);
                CHECK(start[a] >= 0);
                CHECK(start[a] + n <= fx.dim);
            }
            CHECK(p.image.shape == std::array<int, 4>{n, n, n, 4});
            CHECK(p.labels.shape == std::array<int, 3>{n, n, n});
        }
    }
}

TEST_CASE("extract_patch copies the exact sub-block") {
    const Fixture fx;
    MultiModalVolume vol = fx.volume;
    Rng rng(7);
    for (auto& v : vol.data) v = static_cast<float>(uniform01(rng));
    const int n = 8;
    const SamplingWeights w = compute_sampling_weights(vol, fx.labels, n);

    const std::array<int, 3> center = {12, 9, 17};
    const PatchSample p = extract_patch(w, vol, fx.labels, center);
    const auto s = w.block_start(center);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                for (int c = 0; c < 4; ++c)
                    CHECK(p.image.at(i, j, k, c) ==
                          vol.at(s[0] + i, s[1] + j, s[2] + k, c));
                CHECK(p.labels.at(i, j, k) ==
                      fx.labels.at(s[0] + i, s[1] + j, s[2] + k));
            }

    CHECK_THROWS_WITH(extract_patch(w, vol, fx.labels, {2, 12, 12}),
                      doctest::Contains("out of range"));
}

TEST_CASE("lr_flip reverses the x axis and is an involution") {
    const Fixture fx;
    MultiModalVolume vol = fx.volume;
    Rng rng(5);
    for (auto& v : vol.data) v = static_cast<float>(uniform01(rng));
    LabelMap labels = fx.labels;
    const int n = 8;
    const SamplingWeights w = compute_sampling_weights(vol, labels, n);
    const PatchSample p = extract_patch(w, vol, labels, {12, 12, 12});

    const PatchSample f = lr_flip(p);
    CHECK(f.flipped);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                for (int c = 0; c < 4; ++c)
                    CHECK(f.image.at(i, j, k, c) ==
                          p.image.at(i, j, n - 1 - k, c));
                CHECK(f.labels.at(i, j, k) == p.labels.at(i, j, n - 1 - k));
            }

    const PatchSample ff = lr_flip(f);
    CHECK_FALSE(ff.flipped);
    CHECK(ff.image.data == p.image.data);
    CHECK(ff.labels.data == p.labels.data);
}

TEST_CASE("a widely shared minimum disables the low-intensity class") {
    // Half the volume at the minimum: the 1st percentile equals that
    // minimum and the strictly-below rule selects nothing.
    MultiModalVolume vol(16, 16, 16, 4, 0.5f);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 16; ++j)
            for (int k = 0; k < 16; ++k)
                for (int c = 0; c < 4; ++c) vol.at(i, j, k, c) = 0.f;
    LabelMap labels(16, 16, 16);
    labels.at(8, 8, 8) = 2;

    const SamplingWeights w = compute_sampling_weights(vol, labels, 8);
    for (uint8_t s : w.weights.data) CHECK((s == 3 || s == 6));
}

TEST_CASE("foreground weight wins over the low-intensity weight") {
    Fixture fx;
    fx.labels.at(11, 11, 11) = 3;  // inside the dark cube
    const SamplingWeights w = compute_sampling_weights(fx.volume, fx.labels, 8);
    const size_t flat =
        w.weights.index(11 - w.lo[0], 11 - w.lo[1], 11 - w.lo[2]);
    CHECK(int(w.weights.data[flat]) == 6);
}

TEST_CASE("channel statistics are deterministic and close to the source") {
    Rng fill(77);
    MultiModalVolume vol(24, 24, 24, 4);
    const std::array<float, 4> lo = {0.0f, 0.2f, 0.1f, 0.3f};
    const std::array<float, 4> hi = {1.0f, 0.8f, 0.9f, 0.7f};
    for (size_t v = 0; v < vol.voxels(); ++v)
        for (int c = 0; c < 4; ++c)
            vol.data[v * 4 + c] =
                lo[c] + static_cast<float>(uniform01(fill)) * (hi[c] - lo[c]);
    LabelMap labels(24, 24, 24);
    labels.at(12, 12, 12) = 1;
    const SamplingWeights w = compute_sampling_weights(vol, labels, 8);
    const SamplerSubject subj{&vol, &labels, &w};

    Rng r1(2024), r2(2024);
    const ChannelStats a =
        estimate_channel_stats(std::span(&subj, 1), 8, 60, r1);
    const ChannelStats b =
        estimate_channel_stats(std::span(&subj, 1), 8, 60, r2);
    CHECK(a.mean == b.mean);
    CHECK(a.stddev == b.stddev);

    for (int c = 0; c < 4; ++c) {
        const double m = 0.5 * (lo[c] + hi[c]);
        const double s = (hi[c] - lo[c]) / std::sqrt(12.0);
        CHECK(std::fabs(a.mean[c] - m) < 0.05);
        CHECK(std::fabs(a.stddev[c] - s) < 0.2 * s);
    }
}

TEST_CASE("standardize applies (x - mean) / std per channel") {
    const Fixture fx;
    const SamplingWeights w = compute_sampling_weights(fx.volume, fx.labels, 8);
    PatchSample p = extract_patch(w, fx.volume, fx.labels, {12, 12, 12});
    ChannelStats st;
    st.mean = {0.1, 0.2, 0.3, 0.4};
    st.stddev = {0.5, 1.0, 2.0, 0.25};

    const Grid4<float> before = p.image;
    const PatchSample z = standardize(std::move(p), st);
    for (size_t v = 0; v < z.image.voxels(); ++v)
        for (int c = 0; c < 4; ++c)
            CHECK(z.image.data[v * 4 + c] ==
                  static_cast<float>((before.data[v * 4 + c] - st.mean[c]) /
                                     st.stddev[c]));

    ChannelStats bad = st;
    bad.stddev[2] = 0.0;
    Grid4<float> img = before;
    CHECK_THROWS_WITH(standardize(img, bad),
                      doctest::Contains("non-positive std"));
}

TEST_CASE("degenerate sampler inputs are rejected") {
    const Fixture fx;
    CHECK_THROWS_WITH(compute_sampling_weights(fx.volume, fx.labels, 25),
                      doctest::Contains("exceeds volume extent"));
    LabelMap small(4, 4, 4);
    CHECK_THROWS_WITH(compute_sampling_weights(fx.volume, small, 8),
                      doctest::Contains("shape mismatch"));

    MultiModalVolume constant(16, 16, 16, 4, 0.5f);
    LabelMap labels(16, 16, 16);
    const SamplingWeights w = compute_sampling_weights(constant, labels, 8);
    const SamplerSubject subj{&constant, &labels, &w};
    Rng rng(3);
    CHECK_THROWS_WITH(estimate_channel_stats(std::span(&subj, 1), 8, 10, rng),
                      doctest::Contains("zero standard deviation"));
}
