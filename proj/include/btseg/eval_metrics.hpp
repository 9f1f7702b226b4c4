// eval_metrics.hpp -- segmentation metrics over the composite tumor regions.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "btseg/volume.hpp"

namespace btseg {

// Composite regions in reporting order. Internally WT = classes {1,2,3},
// TC = {1,3}, ET = {3}, so WT ⊇ TC ⊇ ET always holds.
enum class TumorRegion { ET = 0, WT = 1, TC = 2 };
inline constexpr std::array<TumorRegion, 3> kAllRegions = {
    TumorRegion::ET, TumorRegion::WT, TumorRegion::TC};

inline const char* region_name(TumorRegion r) {
    switch (r) {
        case TumorRegion::ET: return "ET";
        case TumorRegion::WT: return "WT";
        case TumorRegion::TC: return "TC";
    }
    return "?";
}

using RegionMask = Grid3<uint8_t>;  // 0/1 per voxel

struct RegionMasks {
    RegionMask et, wt, tc;
    const RegionMask& of(TumorRegion r) const {
        switch (r) {
            case TumorRegion::ET: return et;
            case TumorRegion::WT: return wt;
            case TumorRegion::TC: return tc;
        }
        return et;
    }
};

RegionMasks region_masks(const LabelMap& labels);

size_t mask_count(const RegionMask& m);

// 2|a∩b| / (|a|+|b|); both masks empty -> 1, exactly one empty -> 0.
double dice(const RegionMask& a, const RegionMask& b);

// Surface voxels of a mask: foreground voxels removed by a 6-connectivity
// erosion (out-of-volume neighbors count as background).
std::vector<std::array<int, 3>> surface_voxels(const RegionMask& m);

// Max of the two directed 95th-percentile Euclidean surface distances, in
// voxel units. Throws if either mask is empty; callers decide the penalty.
double hausdorff95(const RegionMask& a, const RegionMask& b);

struct SensSpec {
    std::optional<double> sensitivity;  // absent when truth has no positives
    std::optional<double> specificity;  // absent when truth has no negatives
};

SensSpec sensitivity_specificity(const RegionMask& pred,
                                 const RegionMask& truth);

struct RegionMetrics {
    double dice = 0;
    std::optional<double> hd95;  // absent when either surface is empty
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

struct SubjectEvaluation {
    std::string subject_id;
    std::array<RegionMetrics, 3> regions;  // indexed in kAllRegions order
};

SubjectEvaluation evaluate_subject(const std::string& subject_id,
                                   const LabelMap& prediction,
                                   const LabelMap& truth);

// Cohort reduction of one metric: absent values are excluded from the mean
// and median, with the exclusion count reported.
struct MetricSummary {
    std::optional<double> mean;
    std::optional<double> median;
    int present = 0;
    int absent = 0;
};

MetricSummary summarize_metric(const std::vector<std::optional<double>>& xs);

}  // namespace btseg
