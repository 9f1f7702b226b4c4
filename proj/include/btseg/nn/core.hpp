// nn/core.hpp
// Feature-map tensor and parameter plumbing shared by the layer kernels.
// Activations are stored channels-by-voxels (C x V, column-major), so one
// voxel's channel vector is contiguous, matching the channel-last grids.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "btseg/volume.hpp"

namespace btseg::nn {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct FeatureMap {
    std::array<int, 3> sp{0, 0, 0};
    MatX<T> m;  // channels x voxels

    FeatureMap() = default;
    FeatureMap(const std::array<int, 3>& spatial, int channels)
        : sp(spatial),
          m(MatX<T>::Zero(channels,
                          static_cast<long>(spatial[0]) * spatial[1] *
                              spatial[2])) {}

    int channels() const { return static_cast<int>(m.rows()); }
    long voxels() const { return m.cols(); }
};

template <typename T>
FeatureMap<T> from_grid(const Grid4<T>& g) {
    FeatureMap<T> f;
    f.sp = g.spatial_shape();
    f.m = Eigen::Map<const MatX<T>>(g.data.data(), g.channels(),
                                    static_cast<long>(g.voxels()));
    return f;
}

template <typename T, typename U>
FeatureMap<T> from_grid_cast(const Grid4<U>& g) {
    FeatureMap<T> f;
    f.sp = g.spatial_shape();
    f.m = Eigen::Map<const MatX<U>>(g.data.data(), g.channels(),
                                    static_cast<long>(g.voxels()))
              .template cast<T>();
    return f;
}

template <typename T>
Grid4<float> to_grid(const FeatureMap<T>& f) {
    Grid4<float> g(f.sp[0], f.sp[1], f.sp[2], f.channels());
    Eigen::Map<MatX<float>>(g.data.data(), f.channels(), f.voxels()) =
        f.m.template cast<float>();
    return g;
}

// Named view of one parameter tensor and its gradient.
template <typename T>
struct ParamView {
    std::string name;
    T* value = nullptr;
    T* grad = nullptr;
    size_t size = 0;
};

}  // namespace btseg::nn
