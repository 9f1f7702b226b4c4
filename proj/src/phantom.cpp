// phantom.cpp

#include "btseg/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "btseg/nifti.hpp"
#include "btseg/rng.hpp"
#include "btseg/volume_io.hpp"

namespace fs = std::filesystem;

namespace btseg {

namespace {

struct Ellipsoid {
    std::array<double, 3> center;
    std::array<double, 3> radii;

    bool contains(int i, int j, int k) const {
        const double a = (i - center[0]) / radii[0];
        const double b = (j - center[1]) / radii[1];
        const double c = (k - center[2]) / radii[2];
        return a * a + b * b + c * c <= 1.0;
    }
};

Ellipsoid random_ellipsoid(Rng& rng, const std::array<double, 3>& center,
                           double center_jitter, double rlo, double rhi) {
    Ellipsoid e;
    for (int a = 0; a < 3; ++a) {
        e.center[a] = center[a] + (uniform01(rng) * 2 - 1) * center_jitter;
        e.radii[a] = rlo + uniform01(rng) * (rhi - rlo);
    }
    return e;
}

// Mean intensity per (contrast, tissue). Tissues: 0 air, 1 healthy brain,
// then foreground classes 1..3 at indices 2..4. Chosen so every class is
// separable in at least one contrast (enhancing bright on T1Gd, edema
// bright on T2/FLAIR, necrosis dark on T1).
constexpr double kIntensity[4][5] = {
    // air   brain  necrotic  edema  enhancing
    {0.02, 0.55, 0.30, 0.45, 0.70},  // t1
    {0.02, 0.50, 0.20, 0.45, 0.90},  // t1gd
    {0.02, 0.40, 0.55, 0.75, 0.50},  // t2
    {0.02, 0.45, 0.50, 0.85, 0.60},  // flair
};

constexpr double kNoiseSigma = 0.03;

int tissue_index(uint8_t cls) {
    switch (cls) {
        case 1: return 2;  // necrotic / non-enhancing core
        case 2: return 3;  // edema
        case 3: return 4;  // enhancing
    }
    return 1;
}

}  // namespace

double phantom_survival_rule(const LabelMap& labels, double age,
                             const std::string& resection_status) {
    RadiomicRecord r;
    const auto f = extract_features(labels);
    r.volumes = {f[0], f[2], f[4]};
    r.surfaces = {f[1], f[3], f[5]};
    const auto clin = encode_clinical(age, resection_status);
    r.age = clin[0];
    r.resection = {clin[1], clin[2]};
    const auto x = r.features();
    constexpr std::array<double, kSurvivalFeatures> w = {
        0.003, 0.01, 0.002, 0.005, 0.01, 0.02, 3.0, 50.0, 25.0};
    double days = 100.0;
    for (int j = 0; j < kSurvivalFeatures; ++j) days += w[j] * x[j];
    return days;
}

PhantomSubject make_phantom(const std::string& id, int dim,
                            uint64_t subject_seed) {
    if (dim < 32)
        throw std::invalid_argument("make_phantom: dim must be >= 32");
    Rng rng(subject_seed);

    const double mid = (dim - 1) / 2.0;
    const std::array<double, 3> center{mid, mid, mid};
    const Ellipsoid brain =
        random_ellipsoid(rng, center, 0.01 * dim, 0.40 * dim, 0.45 * dim);
    const Ellipsoid wt =
        random_ellipsoid(rng, center, 0.06 * dim, 0.20 * dim, 0.27 * dim);
    Ellipsoid tc = wt;
    for (int a = 0; a < 3; ++a)
        tc.radii[a] = wt.radii[a] * (0.55 + 0.15 * uniform01(rng));
    Ellipsoid et = tc;
    for (int a = 0; a < 3; ++a)
        et.radii[a] = std::max(2.5, tc.radii[a] * (0.45 + 0.15 *
                                                   uniform01(rng)));

    PhantomSubject s;
    s.id = id;
    s.labels = LabelMap(dim, dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            for (int k = 0; k < dim; ++k) {
                uint8_t cls = 0;
                if (et.contains(i, j, k))
                    cls = 3;
                else if (tc.contains(i, j, k))
                    cls = 1;
                else if (wt.contains(i, j, k))
                    cls = 2;
                s.labels.at(i, j, k) = cls;
            }

    std::array<size_t, 4> counts{};
    for (uint8_t v : s.labels.data) ++counts[v];
    for (int cls = 1; cls <= 3; ++cls)
        if (counts[cls] == 0)
            throw std::runtime_error("make_phantom: class " +
                                     std::to_string(cls) +
                                     " is empty in subject " + id);

    for (int c = 0; c < 4; ++c) {
        s.contrasts[c].contrast = kContrastOrder[c];
        s.contrasts[c].grid = Grid3<float>(dim, dim, dim);
    }
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            for (int k = 0; k < dim; ++k) {
                int tissue;
                const uint8_t cls = s.labels.at(i, j, k);
                if (cls != 0)
                    tissue = tissue_index(cls);
                else
                    tissue = brain.contains(i, j, k) ? 1 : 0;
                for (int c = 0; c < 4; ++c) {
                    const double v = kIntensity[c][tissue] +
                                     kNoiseSigma * normal01(rng);
                    s.contrasts[c].grid.at(i, j, k) =
                        static_cast<float>(std::max(v, 0.0));
                }
            }

    s.clinical.subject_id = id;
    s.clinical.age = 30.0 + 50.0 * uniform01(rng);
    static const char* kStatuses[3] = {"GTR", "STR", "NA"};
    s.clinical.resection_status = kStatuses[bounded_u64(rng, 3)];
    s.clinical.survival_days = phantom_survival_rule(
        s.labels, s.clinical.age, s.clinical.resection_status);
    return s;
}

void generate_phantoms(const PhantomOptions& opt, const std::string& out_dir) {
    if (opt.count < 1)
        throw std::invalid_argument("generate_phantoms: count must be >= 1");
    fs::create_directories(out_dir);

    std::vector<ClinicalRecord> clinical;
    for (int i = 0; i < opt.count; ++i) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "phantom_%03d", i);
        const std::string id = idbuf;
        const PhantomSubject s = make_phantom(
            id, opt.dim, derive_seed(opt.seed, static_cast<uint64_t>(i)));

        const fs::path dir = fs::path(out_dir) / id;
        fs::create_directories(dir);
        for (int c = 0; c < 4; ++c) {
            const std::string name =
                id + "_" + contrast_name(kContrastOrder[c]) + ".nii.gz";
            nifti::write_float3d((dir / name).string(), s.contrasts[c].grid);
        }
        save_label_map(s.labels, (dir / (id + "_seg.nii.gz")).string());
        clinical.push_back(s.clinical);
    }
    save_clinical_table((fs::path(out_dir) / "clinical.csv").string(),
                        clinical);
}

}  // namespace btseg
