// volume_io.cpp

#include "btseg/volume_io.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "btseg/nifti.hpp"

namespace btseg {

LabelMap encode_labels(const Grid3<float>& raw) {
    LabelMap lm(raw.shape[0], raw.shape[1], raw.shape[2]);
    std::set<int> bad;
    for (size_t i = 0; i < raw.data.size(); ++i) {
        const float v = raw.data[i];
        const int code = static_cast<int>(std::lround(v));
        const bool integral =
            std::isfinite(v) && std::fabs(v - code) < 1e-3f;
        if (!integral || (code != 0 && code != 1 && code != 2 && code != 4)) {
            bad.insert(integral ? code : -1);
            continue;
        }
        lm.data[i] = static_cast<uint8_t>(code == 4 ? 3 : code);
    }
    if (!bad.empty()) {
        std::string msg = "label map contains invalid codes:";
        for (int c : bad)
            msg += c < 0 ? " <non-integer>" : " " + std::to_string(c);
        msg += " (expected {0,1,2,4})";
        throw std::runtime_error(msg);
    }
    return lm;
}

Grid3<float> decode_labels(const LabelMap& lm) {
    check_label_values(lm);
    Grid3<float> raw(lm.shape[0], lm.shape[1], lm.shape[2]);
    for (size_t i = 0; i < lm.data.size(); ++i)
        raw.data[i] = lm.data[i] == 3 ? 4.f : static_cast<float>(lm.data[i]);
    return raw;
}

ScalarVolume load_scalar_volume(const std::string& path, Contrast contrast) {
    const auto img = nifti::read(path);
    if (img.ndim != 3)
        throw std::runtime_error(path + ": expected 3D volume, got " +
                                 std::to_string(img.dim[3]) + " frames");
    if (!all_finite(img.data))
        throw std::runtime_error(path + ": non-finite intensities");
    ScalarVolume v;
    v.grid = nifti::to_grid3(img);
    v.contrast = contrast;
    return v;
}

LabelMap load_label_map(const std::string& path) {
    const auto img = nifti::read(path);
    if (img.ndim != 3)
        throw std::runtime_error(path + ": expected 3D label map");
    try {
        return encode_labels(nifti::to_grid3(img));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void save_probability_map(const ProbabilityMap& pm, const std::string& path) {
    if (pm.channels() != kNumClasses)
        throw std::runtime_error("probability map must have 4 channels");
    check_probability_rows(pm);
    nifti::write_float4d(path, pm);
}

ProbabilityMap load_probability_map(const std::string& path) {
    const auto img = nifti::read(path);
    if (img.ndim != 4 || img.dim[3] != kNumClasses)
        throw std::runtime_error(path + ": expected 4D probability map with " +
                                 std::to_string(kNumClasses) + " classes");
    ProbabilityMap pm = nifti::to_grid4(img);
    try {
        check_probability_rows(pm);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return pm;
}

MultiModalVolume load_multimodal_volume(const std::string& path) {
    const auto img = nifti::read(path);
    if (img.ndim != 4 || img.dim[3] != 4)
        throw std::runtime_error(path + ": expected 4-channel fused volume");
    if (!all_finite(img.data))
        throw std::runtime_error(path + ": non-finite intensities");
    return nifti::to_grid4(img);
}

void save_multimodal_volume(const MultiModalVolume& v,
                            const std::string& path) {
    if (v.channels() != 4)
        throw std::runtime_error("fused volume must have 4 channels");
    nifti::write_float4d(path, v);
}

void save_label_map(const LabelMap& lm, const std::string& path) {
    check_label_values(lm);
    Grid3<uint8_t> raw(lm.shape[0], lm.shape[1], lm.shape[2]);
    for (size_t i = 0; i < lm.data.size(); ++i)
        raw.data[i] = lm.data[i] == 3 ? 4 : lm.data[i];
    nifti::write_uint8_3d(path, raw);
}

}  // namespace btseg
