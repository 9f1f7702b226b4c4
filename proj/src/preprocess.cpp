// preprocess.cpp

#include "btseg/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

namespace btseg {

void PreprocessConfig::validate() const {
    if (!skip_external && external_stage_command.empty())
        throw std::runtime_error(
            "preprocess: external stage enabled but no command configured");
}

ScalarVolume minmax_normalize(const ScalarVolume& v) {
    if (v.grid.data.empty())
        throw std::runtime_error("minmax_normalize: empty volume");
    if (!all_finite(v.grid.data))
        throw std::runtime_error("minmax_normalize: non-finite intensities");
    const auto [mn_it, mx_it] =
        std::minmax_element(v.grid.data.begin(), v.grid.data.end());
    const float mn = *mn_it, mx = *mx_it;
    if (mx <= mn)
        throw std::runtime_error(
            "minmax_normalize: degenerate intensity range (constant volume)");
    ScalarVolume out;
    out.contrast = v.contrast;
    out.grid.shape = v.grid.shape;
    out.grid.data.resize(v.grid.data.size());
    const float range = mx - mn;
    for (size_t i = 0; i < v.grid.data.size(); ++i)
        out.grid.data[i] = (v.grid.data[i] - mn) / range;
    return out;
}

MultiModalVolume fuse_contrasts(const ScalarVolume& t1,
                                const ScalarVolume& t1gd,
                                const ScalarVolume& t2,
                                const ScalarVolume& flair) {
    const std::array<const ScalarVolume*, 4> in = {&t1, &t1gd, &t2, &flair};
    for (int c = 1; c < 4; ++c)
        if (!in[c]->grid.same_shape(in[0]->grid))
            throw std::runtime_error(
                "fuse_contrasts: shape mismatch between contrasts (" +
                shape_string(in[0]->grid.shape) + " vs " +
                shape_string(in[c]->grid.shape) + ")");
    for (const auto* v : in)
        for (float x : v->grid.data)
            if (!(x >= 0.f && x <= 1.f))
                throw std::runtime_error(
                    "fuse_contrasts: input not normalized to [0,1]");
    const auto& s = in[0]->grid.shape;
    MultiModalVolume mm(s[0], s[1], s[2], 4);
    const size_t nvox = mm.voxels();
    for (int c = 0; c < 4; ++c) {
        const float* src = in[c]->grid.data.data();
        for (size_t v = 0; v < nvox; ++v)
            mm.data[v * 4 + c] = src[v];
    }
    return mm;
}

namespace {

std::string substitute(std::string tmpl, const std::string& key,
                       const std::string& value) {
    size_t pos = 0;
    while ((pos = tmpl.find(key, pos)) != std::string::npos) {
        tmpl.replace(pos, key.size(), value);
        pos += value.size();
    }
    return tmpl;
}

}  // namespace

void run_external_stage(const PreprocessConfig& config,
                        const std::string& in_path,
                        const std::string& out_path) {
    config.validate();
    if (!std::filesystem::exists(in_path))
        throw std::runtime_error("external stage: missing input " + in_path);
    if (config.skip_external) {
        std::filesystem::copy_file(
            in_path, out_path,
            std::filesystem::copy_options::overwrite_existing);
        return;
    }
    std::string cmd = substitute(config.external_stage_command, "{in}",
                                 in_path);
    cmd = substitute(cmd, "{out}", out_path);
    cmd += " 2>&1";

    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        throw std::runtime_error("external stage: failed to launch: " + cmd);
    std::string output;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0)
        output.append(buf, n);
    const int status = pclose(pipe);
    if (status != 0)
        throw std::runtime_error("external stage failed (status " +
                                 std::to_string(status) + "): " + cmd +
                                 "\n--- tool output ---\n" + output);
    if (!std::filesystem::exists(out_path))
        throw std::runtime_error(
            "external stage produced no output file: " + out_path);
}

}  // namespace btseg
