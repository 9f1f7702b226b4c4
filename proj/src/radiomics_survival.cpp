// radiomics_survival.cpp

#include "btseg/radiomics_survival.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "btseg/config_json.hpp"
#include "btseg/stats_util.hpp"
#include "btseg/text_io.hpp"

namespace btseg {

namespace {

void check_class(int cls, const char* fn) {
    if (cls < 1 || cls > 3)
        throw std::invalid_argument(std::string(fn) +
                                    ": class must be in {1,2,3}, got " +
                                    std::to_string(cls));
}

}  // namespace

double roi_volume(const LabelMap& labels, int cls) {
    check_class(cls, "roi_volume");
    size_t n = 0;
    for (uint8_t v : labels.data) n += (v == cls);
    return static_cast<double>(n);
}

double roi_surface_area(const LabelMap& labels, int cls) {
    check_class(cls, "roi_surface_area");
    const int d0 = labels.shape[0], d1 = labels.shape[1], d2 = labels.shape[2];
    // Indicator value with replicate-edge clamping.
    auto s = [&](int i, int j, int k) -> double {
        i = std::clamp(i, 0, d0 - 1);
        j = std::clamp(j, 0, d1 - 1);
        k = std::clamp(k, 0, d2 - 1);
        return labels.at(i, j, k) == cls ? 1.0 : 0.0;
    };
    double total = 0;
    for (int i = 0; i < d0; ++i)
        for (int j = 0; j < d1; ++j)
            for (int k = 0; k < d2; ++k) {
                if (labels.at(i, j, k) != cls) continue;
                const double gi = 0.5 * (s(i + 1, j, k) - s(i - 1, j, k));
                const double gj = 0.5 * (s(i, j + 1, k) - s(i, j - 1, k));
                const double gk = 0.5 * (s(i, j, k + 1) - s(i, j, k - 1));
                total += std::sqrt(gi * gi + gj * gj + gk * gk);
            }
    return total;
}

std::array<double, 6> extract_features(const LabelMap& labels) {
    check_label_values(labels);
    std::array<double, 6> f{};
    for (int cls = 1; cls <= 3; ++cls) {
        f[2 * (cls - 1)] = roi_volume(labels, cls);
        f[2 * (cls - 1) + 1] = roi_surface_area(labels, cls);
    }
    return f;
}

std::array<double, 3> encode_clinical(double age, const std::string& status) {
    if (!(age > 0))
        throw std::invalid_argument("encode_clinical: age must be positive");
    if (status == "GTR") return {age, 1.0, 0.0};
    if (status == "STR") return {age, 0.0, 1.0};
    if (status == "NA") return {age, 0.0, 0.0};
    throw std::invalid_argument(
        "encode_clinical: unknown resection status '" + status +
        "' (expected GTR, STR or NA)");
}

std::array<double, kSurvivalFeatures> RadiomicRecord::features() const {
    return {volumes[0], surfaces[0], volumes[1], surfaces[1],
            volumes[2], surfaces[2], age,        resection[0],
            resection[1]};
}

SurvivalFit fit_survival(const std::vector<RadiomicRecord>& records) {
    const int n = static_cast<int>(records.size());
    const int p = kSurvivalFeatures;
    if (n < p + 1)
        throw std::invalid_argument("fit_survival: need at least " +
                                    std::to_string(p + 1) + " records, got " +
                                    std::to_string(n));
    for (const auto& r : records)
        if (!r.survival_days.has_value())
            throw std::invalid_argument(
                "fit_survival: record '" + r.subject_id +
                "' has no survival target");

    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const auto f = records[i].features();
        for (int j = 0; j < p; ++j) X(i, j) = f[j];
        y(i) = *records[i].survival_days;
    }

    SurvivalFit fit;
    auto& m = fit.model;
    for (int j = 0; j < p; ++j) {
        const double mean = X.col(j).mean();
        const double var = (X.col(j).array() - mean).square().sum() / n;
        m.feature_means[j] = mean;
        double sd = std::sqrt(var);
        if (!(sd > 1e-12)) {
            sd = 1.0;  // constant column: z-scores vanish, coefficient -> 0
            fit.constant_features.push_back(j);
            fit.warnings.push_back("feature " + std::to_string(j) +
                                   " is constant; coefficient forced to 0");
        }
        m.feature_stds[j] = sd;
        X.col(j) = (X.col(j).array() - mean) / sd;
    }

    // With centered columns the intercept is the target mean and the
    // coefficients solve least squares against the centered target.
    const double ybar = y.mean();
    const Eigen::VectorXd yc = y.array() - ybar;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd beta = svd.solve(yc);  // minimum-norm on deficiency
    const int expected_rank = p - static_cast<int>(fit.constant_features.size());
    if (svd.rank() < expected_rank) {
        fit.rank_deficient = true;
        fit.warnings.push_back(
            "design matrix is rank deficient (rank " +
            std::to_string(svd.rank()) + " of " +
            std::to_string(expected_rank) +
            "); using the minimum-norm solution");
    }

    for (int j = 0; j < p; ++j) m.coefficients[j] = beta(j);
    // The zeroed columns carry no signal; pin their coefficients so the
    // stored model is independent of SVD round-off.
    for (int j : fit.constant_features) m.coefficients[j] = 0.0;
    m.intercept = ybar;

    const double ss_res = (yc - X * beta).squaredNorm();
    const double ss_tot = yc.squaredNorm();
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
    return fit;
}

double predict_survival(const SurvivalModel& m, const RadiomicRecord& r) {
    const auto f = r.features();
    double yhat = m.intercept;
    for (int j = 0; j < kSurvivalFeatures; ++j) {
        if (!(m.feature_stds[j] > 0))
            throw std::runtime_error("predict_survival: non-positive std");
        yhat += m.coefficients[j] * (f[j] - m.feature_means[j]) /
                m.feature_stds[j];
    }
    return yhat;
}

int survival_bucket(double days, double bucket_lo, double bucket_hi) {
    if (days < bucket_lo) return 0;
    if (days <= bucket_hi) return 1;
    return 2;
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i) +
                                static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

SurvivalMetrics survival_metrics(const std::vector<double>& pred,
                                 const std::vector<double>& truth,
                                 double bucket_lo, double bucket_hi) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("survival_metrics: length mismatch (" +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()) + ")");
    const size_t n = pred.size();
    if (n < 2)
        throw std::invalid_argument(
            "survival_metrics: need at least 2 cases");

    SurvivalMetrics out;
    std::vector<double> se(n);
    size_t agree = 0;
    for (size_t i = 0; i < n; ++i) {
        const double e = pred[i] - truth[i];
        se[i] = e * e;
        agree += survival_bucket(pred[i], bucket_lo, bucket_hi) ==
                 survival_bucket(truth[i], bucket_lo, bucket_hi);
    }
    out.mse = mean_of(se);
    out.median_se = median_of(se);
    double var_se = 0;
    for (double s : se) var_se += (s - out.mse) * (s - out.mse);
    out.std_se = std::sqrt(var_se / static_cast<double>(n));
    out.accuracy = static_cast<double>(agree) / static_cast<double>(n);

    const double tbar = mean_of(truth);
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < n; ++i) {
        ss_res += se[i];
        ss_tot += (truth[i] - tbar) * (truth[i] - tbar);
    }
    out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);

    const auto rp = average_ranks(pred);
    const auto rt = average_ranks(truth);
    const double mp = mean_of(rp), mt = mean_of(rt);
    double cov = 0, vp = 0, vt = 0;
    for (size_t i = 0; i < n; ++i) {
        cov += (rp[i] - mp) * (rt[i] - mt);
        vp += (rp[i] - mp) * (rp[i] - mp);
        vt += (rt[i] - mt) * (rt[i] - mt);
    }
    if (!(vp > 0) || !(vt > 0))
        throw std::runtime_error(
            "survival_metrics: Spearman undefined (constant ranks)");
    out.spearman = cov / std::sqrt(vp * vt);
    return out;
}

void save_survival_model(const std::string& path, const SurvivalModel& m) {
    Json j;
    j["feature_means"] = m.feature_means;
    j["feature_stds"] = m.feature_stds;
    j["coefficients"] = m.coefficients;
    j["intercept"] = m.intercept;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << j.dump(2) << "\n";
}

SurvivalModel load_survival_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    Json j;
    is >> j;
    SurvivalModel m;
    const auto get9 = [&](const char* key, std::array<double, 9>& dst) {
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 9)
            throw std::runtime_error(path + ": '" + key +
                                     "' must be a 9-vector");
        for (int i = 0; i < 9; ++i) dst[i] = a[i].get<double>();
    };
    get9("feature_means", m.feature_means);
    get9("feature_stds", m.feature_stds);
    get9("coefficients", m.coefficients);
    m.intercept = j.at("intercept").get<double>();
    for (double s : m.feature_stds)
        if (!(s > 0))
            throw std::runtime_error(path + ": feature stds must be positive");
    return m;
}

std::vector<ClinicalRecord> load_clinical_table(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty table");
    const auto header = split_csv_line(lines[0]);
    const std::vector<std::string> expected = {"subject_id", "age",
                                               "resection_status",
                                               "survival_days"};
    if (std::vector<std::string>(header.begin(), header.end()) != expected)
        throw std::runtime_error(
            path + ": expected header subject_id,age,resection_status,"
                   "survival_days, got '" + lines[0] + "'");
    std::vector<ClinicalRecord> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 4)
            throw std::runtime_error(path + ": line " + std::to_string(i + 1) +
                                     " has " + std::to_string(f.size()) +
                                     " fields, expected 4");
        ClinicalRecord r;
        r.subject_id = f[0];
        r.age = parse_double(f[1], "age");
        r.resection_status = f[2];
        if (!f[3].empty() && f[3] != "NA")
            r.survival_days = parse_double(f[3], "survival_days");
        rows.push_back(std::move(r));
    }
    return rows;
}

void save_clinical_table(const std::string& path,
                         const std::vector<ClinicalRecord>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "subject_id,age,resection_status,survival_days\n";
    for (const auto& r : rows) {
        os << r.subject_id << "," << format_double(r.age) << ","
           << r.resection_status << ",";
        if (r.survival_days) os << format_double(*r.survival_days);
        os << "\n";
    }
}

void save_survival_predictions(
    const std::string& path,
    const std::vector<std::pair<std::string, double>>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "subject_id,predicted_days\n";
    for (const auto& [id, days] : rows)
        os << id << "," << format_double(days) << "\n";
}

std::vector<std::pair<std::string, double>> load_survival_predictions(
    const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0]) !=
                             std::vector<std::string>{"subject_id",
                                                      "predicted_days"})
        throw std::runtime_error(path +
                                 ": expected header subject_id,predicted_days");
    std::vector<std::pair<std::string, double>> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 2)
            throw std::runtime_error(path + ": line " + std::to_string(i + 1) +
                                     ": expected 2 fields");
        rows.emplace_back(f[0], parse_double(f[1], "predicted_days"));
    }
    return rows;
}

static const std::vector<std::string> kFeatureHeader = {
    "subject_id", "v1", "s1", "v2",  "s2", "v3",
    "s3",         "age", "r1", "r2", "survival_days"};

void write_feature_table(const std::string& path,
                         const std::vector<RadiomicRecord>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    for (size_t i = 0; i < kFeatureHeader.size(); ++i)
        os << (i ? "," : "") << kFeatureHeader[i];
    os << "\n";
    for (const auto& r : rows) {
        os << r.subject_id;
        const auto f = r.features();
        for (double x : f) os << "," << format_double(x);
        os << ",";
        if (r.survival_days) os << format_double(*r.survival_days);
        os << "\n";
    }
}

std::vector<RadiomicRecord> read_feature_table(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0]) != kFeatureHeader)
        throw std::runtime_error(path + ": not a feature table (bad header)");
    std::vector<RadiomicRecord> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != kFeatureHeader.size())
            throw std::runtime_error(path + ": line " + std::to_string(i + 1) +
                                     ": expected " +
                                     std::to_string(kFeatureHeader.size()) +
                                     " fields");
        RadiomicRecord r;
        r.subject_id = f[0];
        for (int k = 0; k < 3; ++k) {
            r.volumes[k] = parse_double(f[1 + 2 * k], "volume");
            r.surfaces[k] = parse_double(f[2 + 2 * k], "surface");
        }
        r.age = parse_double(f[7], "age");
        r.resection = {parse_double(f[8], "r1"), parse_double(f[9], "r2")};
        if (!f[10].empty())
            r.survival_days = parse_double(f[10], "survival_days");
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace btseg
