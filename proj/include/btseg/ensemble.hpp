// ensemble.hpp -- probability averaging across models and label decoding.
#pragma once

#include <span>

#include "btseg/volume.hpp"

namespace btseg {

// Voxel-wise arithmetic mean of per-model probability maps. All maps must
// share the same shape; at least one is required.
ProbabilityMap average_probabilities(std::span<const ProbabilityMap> maps);

// Per-voxel argmax over classes; ties resolve to the lowest class index.
LabelMap argmax_labels(const ProbabilityMap& probs);

}  // namespace btseg
