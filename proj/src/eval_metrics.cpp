// eval_metrics.cpp

#include "btseg/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "btseg/stats_util.hpp"

namespace btseg {

RegionMasks region_masks(const LabelMap& labels) {
    check_label_values(labels);
    const auto& s = labels.shape;
    RegionMasks out{RegionMask(s[0], s[1], s[2]), RegionMask(s[0], s[1], s[2]),
                    RegionMask(s[0], s[1], s[2])};
    for (size_t v = 0; v < labels.size(); ++v) {
        const uint8_t c = labels.data[v];
        out.wt.data[v] = c != 0;
        out.tc.data[v] = (c == 1 || c == 3);
        out.et.data[v] = c == 3;
    }
    return out;
}

size_t mask_count(const RegionMask& m) {
    size_t n = 0;
    for (uint8_t v : m.data) n += v != 0;
    return n;
}

double dice(const RegionMask& a, const RegionMask& b) {
    if (a.shape != b.shape)
        throw std::invalid_argument("dice: mask shape mismatch (" +
                                    shape_string(a.shape) + " vs " +
                                    shape_string(b.shape) + ")");
    size_t na = 0, nb = 0, both = 0;
    for (size_t v = 0; v < a.size(); ++v) {
        const bool ia = a.data[v] != 0, ib = b.data[v] != 0;
        na += ia;
        nb += ib;
        both += ia && ib;
    }
    if (na + nb == 0) return 1.0;  // both empty: perfect agreement
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<std::array<int, 3>> surface_voxels(const RegionMask& m) {
    const int d0 = m.shape[0], d1 = m.shape[1], d2 = m.shape[2];
    std::vector<std::array<int, 3>> out;
    auto inside = [&](int i, int j, int k) {
        return i >= 0 && i < d0 && j >= 0 && j < d1 && k >= 0 && k < d2 &&
               m.at(i, j, k) != 0;
    };
    static constexpr int off[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                      {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    for (int i = 0; i < d0; ++i)
        for (int j = 0; j < d1; ++j)
            for (int k = 0; k < d2; ++k) {
                if (m.at(i, j, k) == 0) continue;
                for (const auto& o : off)
                    if (!inside(i + o[0], j + o[1], k + o[2])) {
                        out.push_back({i, j, k});
                        break;
                    }
            }
    return out;
}

namespace {

constexpr double kFar = 1e20;

// Felzenszwalb/Huttenlocher 1D squared distance transform along one line.
void dt_line(std::vector<double>& f, std::vector<double>& d,
             std::vector<int>& v, std::vector<double>& z, int n) {
    int k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) /
                (2.0 * q - 2.0 * p);
            if (s <= z[k] && k > 0)
                --k;
            else
                break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFar;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = double(q) - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

// Exact squared Euclidean distance to the nearest seed voxel, full grid.
Grid3<double> squared_edt(const std::array<int, 3>& shape,
                          const std::vector<std::array<int, 3>>& seeds) {
    Grid3<double> g(shape[0], shape[1], shape[2], kFar);
    for (const auto& s : seeds) g.at(s[0], s[1], s[2]) = 0.0;

    const int nmax = std::max({shape[0], shape[1], shape[2]});
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    // axis 2 (contiguous)
    for (int i = 0; i < shape[0]; ++i)
        for (int j = 0; j < shape[1]; ++j) {
            for (int k = 0; k < shape[2]; ++k) f[k] = g.at(i, j, k);
            dt_line(f, d, v, z, shape[2]);
            for (int k = 0; k < shape[2]; ++k) g.at(i, j, k) = d[k];
        }
    // axis 1
    for (int i = 0; i < shape[0]; ++i)
        for (int k = 0; k < shape[2]; ++k) {
            for (int j = 0; j < shape[1]; ++j) f[j] = g.at(i, j, k);
            dt_line(f, d, v, z, shape[1]);
            for (int j = 0; j < shape[1]; ++j) g.at(i, j, k) = d[j];
        }
    // axis 0
    for (int j = 0; j < shape[1]; ++j)
        for (int k = 0; k < shape[2]; ++k) {
            for (int i = 0; i < shape[0]; ++i) f[i] = g.at(i, j, k);
            dt_line(f, d, v, z, shape[0]);
            for (int i = 0; i < shape[0]; ++i) g.at(i, j, k) = d[i];
        }
    return g;
}

double directed_p95(const std::vector<std::array<int, 3>>& from,
                    const Grid3<double>& sq_to) {
    std::vector<double> dist(from.size());
    for (size_t i = 0; i < from.size(); ++i)
        dist[i] = std::sqrt(sq_to.at(from[i][0], from[i][1], from[i][2]));
    return percentile(dist, 95.0);
}

}  // namespace

double hausdorff95(const RegionMask& a, const RegionMask& b) {
    if (a.shape != b.shape)
        throw std::invalid_argument("hausdorff95: mask shape mismatch");
    const auto sa = surface_voxels(a);
    const auto sb = surface_voxels(b);
    if (sa.empty() || sb.empty())
        throw std::runtime_error(
            "hausdorff95: undefined for an empty mask (|surface a|=" +
            std::to_string(sa.size()) + ", |surface b|=" +
            std::to_string(sb.size()) + ")");
    const Grid3<double> da = squared_edt(a.shape, sa);
    const Grid3<double> db = squared_edt(b.shape, sb);
    return std::max(directed_p95(sa, db), directed_p95(sb, da));
}

SensSpec sensitivity_specificity(const RegionMask& pred,
                                 const RegionMask& truth) {
    if (pred.shape != truth.shape)
        throw std::invalid_argument(
            "sensitivity_specificity: mask shape mismatch");
    size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (size_t v = 0; v < pred.size(); ++v) {
        const bool p = pred.data[v] != 0, t = truth.data[v] != 0;
        if (t)
            p ? ++tp : ++fn;
        else
            p ? ++fp : ++tn;
    }
    SensSpec out;
    if (tp + fn > 0)
        out.sensitivity = double(tp) / double(tp + fn);
    if (tn + fp > 0)
        out.specificity = double(tn) / double(tn + fp);
    return out;
}

SubjectEvaluation evaluate_subject(const std::string& subject_id,
                                   const LabelMap& prediction,
                                   const LabelMap& truth) {
    if (prediction.shape != truth.shape)
        throw std::invalid_argument("evaluate_subject: shape mismatch for " +
                                    subject_id);
    const RegionMasks pm = region_masks(prediction);
    const RegionMasks tm = region_masks(truth);

    SubjectEvaluation ev;
    ev.subject_id = subject_id;
    for (size_t r = 0; r < kAllRegions.size(); ++r) {
        const RegionMask& p = pm.of(kAllRegions[r]);
        const RegionMask& t = tm.of(kAllRegions[r]);
        RegionMetrics m;
        m.dice = dice(p, t);
        if (mask_count(p) > 0 && mask_count(t) > 0)
            m.hd95 = hausdorff95(p, t);
        const SensSpec ss = sensitivity_specificity(p, t);
        m.sensitivity = ss.sensitivity;
        m.specificity = ss.specificity;
        ev.regions[r] = m;
    }
    return ev;
}

MetricSummary summarize_metric(const std::vector<std::optional<double>>& xs) {
    MetricSummary s;
    std::vector<double> present;
    for (const auto& x : xs)
        if (x.has_value())
            present.push_back(*x);
        else
            ++s.absent;
    s.present = static_cast<int>(present.size());
    if (!present.empty()) {
        s.mean = mean_of(present);
        s.median = median_of(present);
    }
    return s;
}

}  // namespace btseg
