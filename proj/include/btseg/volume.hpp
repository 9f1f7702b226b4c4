// volume.hpp
// Dense 3D/4D voxel grids and the domain types built on them.
//
// Conventions: Grid3 shape is (d0,d1,d2) with d2 the fastest-varying axis.
// Volumes loaded from NIfTI have shape (nz,ny,nx); axis 2 (x) is the
// left-right axis, so lr flips reverse axis 2. Grid4 is channel-last:
// shape (d0,d1,d2,C) with the channel index fastest in memory.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace btseg {

template <typename T>
struct Grid3 {
    std::array<int, 3> shape{0, 0, 0};
    std::vector<T> data;

    Grid3() = default;
    Grid3(int d0, int d1, int d2, T fill = T{})
        : shape{d0, d1, d2}, data(static_cast<size_t>(d0) * d1 * d2, fill) {
        if (d0 < 1 || d1 < 1 || d2 < 1)
            throw std::invalid_argument("Grid3: dims must be >= 1");
    }

    size_t size() const { return data.size(); }
    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(i) * shape[1] + j) * shape[2] + k;
    }
    T& at(int i, int j, int k) { return data[index(i, j, k)]; }
    const T& at(int i, int j, int k) const { return data[index(i, j, k)]; }

    bool same_shape(const Grid3& o) const { return shape == o.shape; }
};

template <typename T>
struct Grid4 {
    std::array<int, 4> shape{0, 0, 0, 0};  // (d0,d1,d2,C), C fastest
    std::vector<T> data;

    Grid4() = default;
    Grid4(int d0, int d1, int d2, int c, T fill = T{})
        : shape{d0, d1, d2, c},
          data(static_cast<size_t>(d0) * d1 * d2 * c, fill) {
        if (d0 < 1 || d1 < 1 || d2 < 1 || c < 1)
            throw std::invalid_argument("Grid4: dims must be >= 1");
    }

    size_t size() const { return data.size(); }
    int channels() const { return shape[3]; }
    size_t voxels() const {
        return static_cast<size_t>(shape[0]) * shape[1] * shape[2];
    }
    size_t index(int i, int j, int k, int c) const {
        return ((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) *
                   shape[3] +
               c;
    }
    T& at(int i, int j, int k, int c) { return data[index(i, j, k, c)]; }
    const T& at(int i, int j, int k, int c) const {
        return data[index(i, j, k, c)];
    }

    std::array<int, 3> spatial_shape() const {
        return {shape[0], shape[1], shape[2]};
    }
};

enum class Contrast { T1, T1Gd, T2, FLAIR };

inline const char* contrast_name(Contrast c) {
    switch (c) {
        case Contrast::T1: return "t1";
        case Contrast::T1Gd: return "t1gd";
        case Contrast::T2: return "t2";
        case Contrast::FLAIR: return "flair";
    }
    return "?";
}

inline constexpr std::array<Contrast, 4> kContrastOrder = {
    Contrast::T1, Contrast::T1Gd, Contrast::T2, Contrast::FLAIR};

inline constexpr int kNumClasses = 4;  // background + 3 tumor classes

// Single-contrast intensity volume.
struct ScalarVolume {
    Grid3<float> grid;
    Contrast contrast = Contrast::T1;
};

// Fused 4-channel volume, channel order [T1, T1Gd, T2, FLAIR].
using MultiModalVolume = Grid4<float>;

// Per-voxel class indices in {0,1,2,3}.
using LabelMap = Grid3<uint8_t>;

// Per-voxel class probabilities, K = 4, each row sums to 1.
using ProbabilityMap = Grid4<float>;

inline bool all_finite(const std::vector<float>& v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void check_label_values(const LabelMap& lm) {
    for (uint8_t v : lm.data)
        if (v >= kNumClasses)
            throw std::runtime_error("LabelMap: class index " +
                                     std::to_string(int(v)) +
                                     " out of range [0,3]");
}

// Probability rows must be non-negative and sum to 1 within tol.
inline void check_probability_rows(const ProbabilityMap& pm,
                                   float tol = 1e-5f) {
    const int k = pm.channels();
    const size_t n = pm.voxels();
    for (size_t v = 0; v < n; ++v) {
        float s = 0.f;
        for (int c = 0; c < k; ++c) {
            float p = pm.data[v * k + c];
            if (!(p >= -tol))
                throw std::runtime_error(
                    "ProbabilityMap: negative class probability");
            s += p;
        }
        if (std::fabs(s - 1.f) > tol)
            throw std::runtime_error(
                "ProbabilityMap: voxel probabilities sum to " +
                std::to_string(s) + ", expected 1");
    }
}

inline std::string shape_string(const std::array<int, 3>& s) {
    return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" +
           std::to_string(s[2]);
}

}  // namespace btseg
