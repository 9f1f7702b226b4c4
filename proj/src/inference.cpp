// inference.cpp

#include "btseg/inference.hpp"

#include <stdexcept>
#include <string>

#include "btseg/nn/layers.hpp"

namespace btseg {

std::vector<int> axis_origins(int dim, int window, int stride) {
    if (window <= 0 || stride <= 0)
        throw std::invalid_argument(
            "axis_origins: window and stride must be positive");
    if (dim < window)
        throw std::invalid_argument(
            "axis_origins: volume extent " + std::to_string(dim) +
            " is smaller than the window size " + std::to_string(window));
    std::vector<int> origins;
    for (int o = 0;; o += stride) {
        if (o + window >= dim) {
            const int last = dim - window;
            if (origins.empty() || origins.back() != last)
                origins.push_back(last);
            break;
        }
        origins.push_back(o);
    }
    return origins;
}

SlidingPlan plan_windows(const std::array<int, 3>& shape, int window,
                         int stride) {
    if (stride == 0) stride = window / 2;
    if (stride <= 0)
        throw std::invalid_argument("plan_windows: stride must be positive");
    SlidingPlan plan;
    plan.window = window;
    plan.stride = stride;
    for (int a = 0; a < 3; ++a)
        plan.origins[a] = axis_origins(shape[a], window, stride);
    return plan;
}

Grid3<int32_t> coverage_count(const std::array<int, 3>& shape,
                              const SlidingPlan& plan, bool flip_tta) {
    Grid3<int32_t> cov(shape[0], shape[1], shape[2]);
    const int32_t per_window = flip_tta ? 2 : 1;
    const int n = plan.window;
    for (int oz : plan.origins[0])
        for (int oy : plan.origins[1])
            for (int ox : plan.origins[2])
                for (int z = oz; z < oz + n; ++z)
                    for (int y = oy; y < oy + n; ++y)
                        for (int x = ox; x < ox + n; ++x)
                            cov.at(z, y, x) += per_window;
    return cov;
}

Grid4<float> UNetPredictor::predict(const Grid4<float>& window) const {
    Grid4<float> w = window;
    standardize(w, stats_);
    nn::FeatureMap<float> x = nn::from_grid<float>(w);
    nn::FeatureMap<float> logits =
        model_.forward(x, /*training=*/false, nullptr);
    logits.m = nn::softmax_columns(logits.m);
    return nn::to_grid(logits);
}

ProbabilityMap predict_volume(const MultiModalVolume& volume,
                              const WindowPredictor& predictor,
                              const SlidingPlan& plan, bool flip_tta) {
    if (volume.channels() != 4)
        throw std::invalid_argument(
            "predict_volume: expected 4 input channels");
    const int nz = volume.shape[0], ny = volume.shape[1],
              nx = volume.shape[2];
    const int n = plan.window;

    ProbabilityMap sum(nz, ny, nx, kNumClasses);
    Grid3<int32_t> cov(nz, ny, nx);
    const int32_t per_window = flip_tta ? 2 : 1;

    for (int oz : plan.origins[0])
        for (int oy : plan.origins[1])
            for (int ox : plan.origins[2]) {
                Grid4<float> window = crop_window(volume, {oz, oy, ox}, n);
                Grid4<float> prob = predictor.predict(window);
                if (flip_tta) {
                    lr_flip(window);
                    Grid4<float> prob_m = predictor.predict(window);
                    lr_flip(prob_m);  // back to the original orientation
                    for (size_t i = 0; i < prob.data.size(); ++i)
                        prob.data[i] += prob_m.data[i];
                }
                for (int z = 0; z < n; ++z)
                    for (int y = 0; y < n; ++y)
                        for (int x = 0; x < n; ++x) {
                            float* dst = &sum.at(oz + z, oy + y, ox + x, 0);
                            const float* src = &prob.at(z, y, x, 0);
                            for (int c = 0; c < kNumClasses; ++c)
                                dst[c] += src[c];
                            cov.at(oz + z, oy + y, ox + x) += per_window;
                        }
            }

    const size_t nvox = sum.voxels();
    for (size_t v = 0; v < nvox; ++v) {
        const int32_t c = cov.data[v];
        if (c == 0)
            throw std::runtime_error(
                "predict_volume: voxel not covered by any window");
        for (int k = 0; k < kNumClasses; ++k)
            sum.data[v * kNumClasses + k] /= static_cast<float>(c);
    }
    return sum;
}

}  // namespace btseg
