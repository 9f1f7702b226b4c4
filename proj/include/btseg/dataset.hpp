// dataset.hpp -- on-disk subject discovery and loading.
//
// Layout per subject: <root>/<id>/<id>_<contrast>.nii.gz with contrast in
// {t1, t1gd, t2, flair} and labels <id>_seg.nii.gz. For the post-contrast
// T1 channel the alternative BraTS spelling t1ce is accepted. Plain .nii
// files are accepted everywhere.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "btseg/volume.hpp"

namespace btseg {

struct SubjectPaths {
    std::string id;
    std::string dir;
    std::array<std::string, 4> contrasts;  // kContrastOrder
    std::string labels;                    // empty when absent
};

// Resolve the file set for one subject directory.
SubjectPaths locate_subject(const std::string& dir, bool require_labels);

// All subject subdirectories of root, sorted by name.
std::vector<SubjectPaths> discover_subjects(const std::string& root,
                                            bool require_labels);

std::array<ScalarVolume, 4> load_contrast_volumes(const SubjectPaths& s);

}  // namespace btseg
