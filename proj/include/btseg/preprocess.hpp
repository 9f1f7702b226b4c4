// preprocess.hpp
// Per-contrast min-max normalization and channel fusion. Bias correction
// and denoising are external tools invoked through a command template;
// they are not reimplemented here.

#pragma once

#include <string>

#include "btseg/volume.hpp"

namespace btseg {

struct PreprocessConfig {
    // Command template with {in} and {out} placeholders, e.g.
    // "N4BiasFieldCorrection -i {in} -o {out}".
    std::string external_stage_command;
    bool skip_external = true;

    void validate() const;
};

// (v - min) / (max - min); rejects constant volumes.
ScalarVolume minmax_normalize(const ScalarVolume& v);

// Stack four normalized contrasts into a (D,H,W,4) volume in the fixed
// channel order [T1, T1Gd, T2, FLAIR].
MultiModalVolume fuse_contrasts(const ScalarVolume& t1,
                                const ScalarVolume& t1gd,
                                const ScalarVolume& t2,
                                const ScalarVolume& flair);

// Runs the external bias-correction/denoising command on one file, or
// copies the input through byte-identically when skip_external is set.
// A nonzero tool exit propagates as an error carrying the tool output.
void run_external_stage(const PreprocessConfig& config,
                        const std::string& in_path,
                        const std::string& out_path);

}  // namespace btseg
