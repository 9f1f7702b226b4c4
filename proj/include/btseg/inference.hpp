// inference.hpp -- sliding-window inference with test-time mirror averaging.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "btseg/patch_sampler.hpp"
#include "btseg/unet3d.hpp"
#include "btseg/volume.hpp"

namespace btseg {

// Window placement along one axis: origins at multiples of the stride, with
// the last window clamped so it ends exactly at the volume boundary.
std::vector<int> axis_origins(int dim, int window, int stride);

struct SlidingPlan {
    int window = 0;
    int stride = 0;
    std::array<std::vector<int>, 3> origins;  // per axis (z, y, x)

    size_t window_count() const {
        return origins[0].size() * origins[1].size() * origins[2].size();
    }
};

// Build the window plan for a volume; stride defaults to window/2.
SlidingPlan plan_windows(const std::array<int, 3>& shape, int window,
                         int stride = 0);

// How many predictions are averaged at each voxel (doubled when mirror
// averaging is on).
Grid3<int32_t> coverage_count(const std::array<int, 3>& shape,
                              const SlidingPlan& plan, bool flip_tta);

// Anything that maps a (N,N,N,4) image window to per-voxel class
// probabilities of the same spatial shape.
class WindowPredictor {
public:
    virtual ~WindowPredictor() = default;
    virtual Grid4<float> predict(const Grid4<float>& window) const = 0;
};

// Standardizes the window with the training-set channel statistics, runs the
// network in inference mode and applies a softmax over the class logits.
class UNetPredictor : public WindowPredictor {
public:
    UNetPredictor(UNet3D<float>& model, const ChannelStats& stats)
        : model_(model), stats_(stats) {}
    Grid4<float> predict(const Grid4<float>& window) const override;

private:
    UNet3D<float>& model_;
    ChannelStats stats_;
};

// Full-volume probabilities: tile with the plan, optionally average each
// window with its left-right mirrored prediction, and normalize by the
// per-voxel coverage.
ProbabilityMap predict_volume(const MultiModalVolume& volume,
                              const WindowPredictor& predictor,
                              const SlidingPlan& plan, bool flip_tta);

}  // namespace btseg
