// radiomics_survival.hpp -- per-class volume/surface features, the 9-feature
// linear survival model, and the survival metric set.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "btseg/volume.hpp"

namespace btseg {

// Voxel count of one foreground class (cls in {1,2,3}).
double roi_volume(const LabelMap& labels, int cls);

// Sum over ROI voxels of the gradient magnitude of the class-indicator
// field. Central differences, unit spacing, replicate edges; an isolated
// voxel therefore contributes 0.
double roi_surface_area(const LabelMap& labels, int cls);

// [V1, S1, V2, S2, V3, S3] in class order.
std::array<double, 6> extract_features(const LabelMap& labels);

// [age, r1, r2] with GTR -> (1,0), STR -> (0,1), NA -> (0,0).
std::array<double, 3> encode_clinical(double age, const std::string& status);

inline constexpr int kSurvivalFeatures = 9;

struct RadiomicRecord {
    std::string subject_id;
    std::array<double, 3> volumes{};   // per class 1..3
    std::array<double, 3> surfaces{};  // per class 1..3
    double age = 0;
    std::array<double, 2> resection{};  // (r1, r2)
    std::optional<double> survival_days;

    // [V1,S1,V2,S2,V3,S3, age, r1, r2]
    std::array<double, kSurvivalFeatures> features() const;
};

struct SurvivalModel {
    std::array<double, kSurvivalFeatures> feature_means{};
    std::array<double, kSurvivalFeatures> feature_stds{};
    std::array<double, kSurvivalFeatures> coefficients{};
    double intercept = 0;
};

struct SurvivalFit {
    SurvivalModel model;
    double r2 = 0;                      // training coefficient of determination
    std::vector<int> constant_features;  // std forced to 1, coefficient 0
    bool rank_deficient = false;
    std::vector<std::string> warnings;
};

// Ordinary least squares on z-scored features (population std) plus an
// intercept. Requires n >= 10 records, all with survival targets.
SurvivalFit fit_survival(const std::vector<RadiomicRecord>& records);

double predict_survival(const SurvivalModel& m, const RadiomicRecord& r);

struct SurvivalMetrics {
    double mse = 0;
    double median_se = 0;
    double std_se = 0;  // population standard deviation of squared errors
    double spearman = 0;
    double r2 = 0;
    double accuracy = 0;  // bucketed agreement
};

// Bucket bounds split days into short (< b0), mid ([b0, b1]) and long (> b1).
SurvivalMetrics survival_metrics(const std::vector<double>& pred,
                                 const std::vector<double>& truth,
                                 double bucket_lo = 300.0,
                                 double bucket_hi = 450.0);

int survival_bucket(double days, double bucket_lo = 300.0,
                    double bucket_hi = 450.0);

// Ranks with ties averaged, 1-based.
std::vector<double> average_ranks(const std::vector<double>& xs);

// Model persistence (structured text).
void save_survival_model(const std::string& path, const SurvivalModel& m);
SurvivalModel load_survival_model(const std::string& path);

// Clinical table: header "subject_id,age,resection_status,survival_days";
// survival_days may be empty or NA.
struct ClinicalRecord {
    std::string subject_id;
    double age = 0;
    std::string resection_status;
    std::optional<double> survival_days;
};

std::vector<ClinicalRecord> load_clinical_table(const std::string& path);
void save_clinical_table(const std::string& path,
                         const std::vector<ClinicalRecord>& rows);

// Prediction table: header "subject_id,predicted_days".
void save_survival_predictions(
    const std::string& path,
    const std::vector<std::pair<std::string, double>>& rows);
std::vector<std::pair<std::string, double>> load_survival_predictions(
    const std::string& path);

// Full feature table: header
// "subject_id,v1,s1,v2,s2,v3,s3,age,r1,r2,survival_days"; the last column
// may be empty.
void write_feature_table(const std::string& path,
                         const std::vector<RadiomicRecord>& rows);
std::vector<RadiomicRecord> read_feature_table(const std::string& path);

}  // namespace btseg
