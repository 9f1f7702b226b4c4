// dataset.cpp

#include "btseg/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

#include "btseg/volume_io.hpp"

namespace fs = std::filesystem;

namespace btseg {

namespace {

// First existing candidate path, else "".
std::string find_file(const fs::path& dir, const std::string& id,
                      const std::vector<std::string>& tags) {
    for (const auto& tag : tags)
        for (const char* ext : {".nii.gz", ".nii"}) {
            const fs::path p = dir / (id + "_" + tag + ext);
            if (fs::exists(p)) return p.string();
        }
    return {};
}

}  // namespace

SubjectPaths locate_subject(const std::string& dir, bool require_labels) {
    const fs::path d(dir);
    if (!fs::is_directory(d))
        throw std::runtime_error("subject directory not found: " + dir);
    SubjectPaths s;
    s.dir = dir;
    s.id = d.filename().string();
    if (s.id.empty()) s.id = d.parent_path().filename().string();

    const std::vector<std::vector<std::string>> tags = {
        {"t1"}, {"t1gd", "t1ce"}, {"t2"}, {"flair"}};
    for (int c = 0; c < 4; ++c) {
        s.contrasts[c] = find_file(d, s.id, tags[c]);
        if (s.contrasts[c].empty())
            throw std::runtime_error(
                "subject " + s.id + ": missing " +
                contrast_name(kContrastOrder[c]) + " volume (expected " +
                (d / (s.id + "_" + tags[c][0] + ".nii.gz")).string() + ")");
    }
    s.labels = find_file(d, s.id, {"seg"});
    if (require_labels && s.labels.empty())
        throw std::runtime_error("subject " + s.id +
                                 ": missing label map (expected " +
                                 (d / (s.id + "_seg.nii.gz")).string() + ")");
    return s;
}

std::vector<SubjectPaths> discover_subjects(const std::string& root,
                                            bool require_labels) {
    const fs::path r(root);
    if (!fs::is_directory(r))
        throw std::runtime_error("dataset root not found: " + root);
    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(r))
        if (e.is_directory()) dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty())
        throw std::runtime_error("dataset root has no subject directories: " +
                                 root);
    std::vector<SubjectPaths> subjects;
    subjects.reserve(dirs.size());
    for (const auto& d : dirs)
        subjects.push_back(locate_subject(d, require_labels));
    return subjects;
}

std::array<ScalarVolume, 4> load_contrast_volumes(const SubjectPaths& s) {
    std::array<ScalarVolume, 4> out;
    for (int c = 0; c < 4; ++c)
        out[c] = load_scalar_volume(s.contrasts[c], kContrastOrder[c]);
    return out;
}

}  // namespace btseg
