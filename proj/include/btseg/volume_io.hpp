// volume_io.hpp
// Volume/label loading, validation, and the BraTS on-disk label codes.

#pragma once

#include <string>
#include <vector>

#include "btseg/volume.hpp"

namespace btseg {

// On-disk label codes follow the BraTS convention {0,1,2,4}; internal
// class indices are {0,1,2,3} (code 4 -> class 3).
LabelMap encode_labels(const Grid3<float>& raw);
Grid3<float> decode_labels(const LabelMap& lm);

ScalarVolume load_scalar_volume(const std::string& path, Contrast contrast);
LabelMap load_label_map(const std::string& path);

void save_probability_map(const ProbabilityMap& pm, const std::string& path);
ProbabilityMap load_probability_map(const std::string& path);

MultiModalVolume load_multimodal_volume(const std::string& path);
void save_multimodal_volume(const MultiModalVolume& v,
                            const std::string& path);

// Label maps are written back with on-disk codes, as uint8.
void save_label_map(const LabelMap& lm, const std::string& path);

}  // namespace btseg
