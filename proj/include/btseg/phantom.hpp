// phantom.hpp -- synthetic multi-contrast subjects with nested ellipsoid
// tumors. The test backbone: real scans cannot ship with the repository.
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "btseg/radiomics_survival.hpp"
#include "btseg/volume.hpp"

namespace btseg {

struct PhantomOptions {
    int count = 8;
    int dim = 64;  // cubic volumes, dim >= 32
    uint64_t seed = 1234;
};

struct PhantomSubject {
    std::string id;
    std::array<ScalarVolume, 4> contrasts;  // kContrastOrder, raw intensities
    LabelMap labels;
    ClinicalRecord clinical;
};

// Deterministic per (id, dim, subject_seed). Labels always contain all
// three foreground classes; survival follows phantom_survival_rule exactly.
PhantomSubject make_phantom(const std::string& id, int dim,
                            uint64_t subject_seed);

// The generating rule: a fixed linear function of the 9 survival features
// derived from the ground-truth labels and clinical data.
double phantom_survival_rule(const LabelMap& labels, double age,
                             const std::string& resection_status);

// Writes <out_dir>/<id>/<id>_{t1,t1gd,t2,flair,seg}.nii.gz per subject plus
// <out_dir>/clinical.csv. Existing files are overwritten.
void generate_phantoms(const PhantomOptions& opt, const std::string& out_dir);

}  // namespace btseg
