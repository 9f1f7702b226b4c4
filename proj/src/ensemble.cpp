// ensemble.cpp

#include "btseg/ensemble.hpp"

#include <stdexcept>
#include <string>

namespace btseg {

ProbabilityMap average_probabilities(std::span<const ProbabilityMap> maps) {
    if (maps.empty())
        throw std::invalid_argument(
            "average_probabilities: need at least one map");
    const auto& first = maps.front();
    for (const auto& m : maps)
        if (m.shape != first.shape)
            throw std::invalid_argument(
                "average_probabilities: shape mismatch (" +
                shape_string(m.spatial_shape()) + " vs " +
                shape_string(first.spatial_shape()) + ")");

    ProbabilityMap out(first.shape[0], first.shape[1], first.shape[2],
                       first.shape[3]);
    const double inv = 1.0 / static_cast<double>(maps.size());
    for (size_t i = 0; i < out.data.size(); ++i) {
        double s = 0;
        for (const auto& m : maps) s += m.data[i];
        out.data[i] = static_cast<float>(s * inv);
    }
    return out;
}

LabelMap argmax_labels(const ProbabilityMap& probs) {
    const int k = probs.channels();
    if (k != kNumClasses)
        throw std::invalid_argument("argmax_labels: expected " +
                                    std::to_string(kNumClasses) + " classes");
    LabelMap lm(probs.shape[0], probs.shape[1], probs.shape[2]);
    const size_t nvox = probs.voxels();
    for (size_t v = 0; v < nvox; ++v) {
        const float* p = &probs.data[v * k];
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (p[c] > p[best]) best = c;  // strict: ties keep lowest index
        lm.data[v] = static_cast<uint8_t>(best);
    }
    return lm;
}

}  // namespace btseg
