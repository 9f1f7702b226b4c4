#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "btseg/radiomics_survival.hpp"
#include "btseg/rng.hpp"
#include "test_util.hpp"

using namespace btseg;
namespace fs = std::filesystem;

namespace {

// Eq-by-eq restatement of the surface estimate: gradient magnitude of the
// class indicator via central differences with replicated edges, summed
// over the voxels of the class itself.
double surface_oracle(const LabelMap& lm, int cls) {
    const auto ind = [&](int i, int j, int k) {
        i = std::clamp(i, 0, lm.shape[0] - 1);
        j = std::clamp(j, 0, lm.shape[1] - 1);
        k = std::clamp(k, 0, lm.shape[2] - 1);
        return lm.at(i, j, k) == cls ? 1.0 : 0.0;
    };
    double total = 0;
    for (int i = 0; i < lm.shape[0]; ++i)
        for (int j = 0; j < lm.shape[1]; ++j)
            for (int k = 0; k < lm.shape[2]; ++k) {
                if (lm.at(i, j, k) != cls) continue;
                const double gz = (ind(i + 1, j, k) - ind(i - 1, j, k)) / 2.0;
                const double gy = (ind(i, j + 1, k) - ind(i, j - 1, k)) / 2.0;
                const double gx = (ind(i, j, k + 1) - ind(i, j, k - 1)) / 2.0;
                total += std::sqrt(gz * gz + gy * gy + gx * gx);
            }
    return total;
}

RadiomicRecord make_record(const std::string& id,
                           const std::array<double, 9>& x,
                           std::optional<double> days) {
    RadiomicRecord r;
    r.subject_id = id;
    r.volumes = {x[0], x[2], x[4]};
    r.surfaces = {x[1], x[3], x[5]};
    r.age = x[6];
    r.resection = {x[7], x[8]};
    r.survival_days = days;
    return r;
}

// Ground-truth OLS on the z-scored design via Gaussian elimination on the
// normal equations; independent of any linear-algebra library.
std::vector<double> normal_equations(
    const std::vector<std::array<double, 10>>& design,
    const std::vector<double>& y) {
    const int p = 10;
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < p; ++c)
            for (size_t i = 0; i < design.size(); ++i)
                a[r][c] += design[i][r] * design[i][c];
        for (size_t i = 0; i < design.size(); ++i)
            a[r][p] += design[i][r] * y[i];
    }
    for (int col = 0; col < p; ++col) {
        int piv = col;
        for (int r = col + 1; r < p; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        REQUIRE(std::fabs(a[col][col]) > 1e-9);
        for (int r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> beta(p);
    for (int r = 0; r < p; ++r) beta[r] = a[r][p] / a[r][r];
    return beta;
}

}  // namespace

TEST_CASE("roi_volume is a plain voxel count") {
    Rng rng(61);
    for (int rep = 0; rep < 20; ++rep) {
        const LabelMap lm = testutil::random_labels(rng, 9, 7, 8, 0.35);
        for (int cls = 1; cls <= 3; ++cls) {
            size_t n = 0;
            for (uint8_t v : lm.data) n += v == cls;
            CHECK(roi_volume(lm, cls) == double(n));
        }
    }
}

TEST_CASE("roi_surface_area matches the gradient-sum restatement") {
    Rng rng(62);
    for (int rep = 0; rep < 100; ++rep) {
        const int d0 = 2 + int(bounded_u64(rng, 31));
        const int d1 = 2 + int(bounded_u64(rng, 31));
        const int d2 = 2 + int(bounded_u64(rng, 31));
        const LabelMap lm = testutil::random_labels(rng, d0, d1, d2, 0.3);
        for (int cls = 1; cls <= 3; ++cls)
            CHECK(roi_surface_area(lm, cls) == surface_oracle(lm, cls));
    }
}

TEST_CASE("roi_surface_area on canonical shapes") {
    // A 2x2x2 cube away from the border: every voxel has gradient
    // (1/2, 1/2, 1/2), magnitude sqrt(0.75), eight voxels in total.
    LabelMap cube(6, 6, 6);
    for (int i = 2; i < 4; ++i)
        for (int j = 2; j < 4; ++j)
            for (int k = 2; k < 4; ++k) cube.at(i, j, k) = 1;
    CHECK(roi_surface_area(cube, 1) ==
          doctest::Approx(8.0 * std::sqrt(0.75)).epsilon(1e-12));
    CHECK(roi_surface_area(cube, 1) == doctest::Approx(6.9282).epsilon(1e-4));

    // An isolated voxel has matching neighbours on both sides of every
    // axis (all background), so its central difference vanishes.
    LabelMap lone(5, 5, 5);
    lone.at(2, 2, 2) = 2;
    CHECK(roi_surface_area(lone, 2) == 0.0);

    // Class absent entirely.
    CHECK(roi_surface_area(lone, 3) == 0.0);
    CHECK(roi_volume(lone, 3) == 0.0);
}

TEST_CASE("extract_features interleaves volumes and surfaces by class") {
    Rng rng(63);
    const LabelMap lm = testutil::random_labels(rng, 12, 11, 10, 0.4);
    const std::array<double, 6> f = extract_features(lm);
    for (int cls = 1; cls <= 3; ++cls) {
        CHECK(f[size_t(2 * (cls - 1))] == roi_volume(lm, cls));
        CHECK(f[size_t(2 * (cls - 1) + 1)] == roi_surface_area(lm, cls));
    }
}

TEST_CASE("clinical encoding uses two resection indicator bits") {
    CHECK(encode_clinical(61.0, "GTR") ==
          std::array<double, 3>{61.0, 1.0, 0.0});
    CHECK(encode_clinical(45.5, "STR") ==
          std::array<double, 3>{45.5, 0.0, 1.0});
    CHECK(encode_clinical(70.0, "NA") ==
          std::array<double, 3>{70.0, 0.0, 0.0});
    CHECK_THROWS_WITH(encode_clinical(50.0, "partial"),
                      doctest::Contains("resection"));
    CHECK_THROWS_WITH(encode_clinical(0.0, "GTR"), doctest::Contains("age"));
    CHECK_THROWS_WITH(encode_clinical(-3.0, "NA"), doctest::Contains("age"));
}

TEST_CASE("record feature vector follows the documented order") {
    const RadiomicRecord r =
        make_record("s", {1, 2, 3, 4, 5, 6, 7, 8, 9}, 100.0);
    const auto f = r.features();
    for (int i = 0; i < 9; ++i) CHECK(f[size_t(i)] == double(i + 1));
}

TEST_CASE("fit_survival recovers a noiseless linear rule exactly") {
    Rng rng(64);
    const std::array<double, 9> w = {0.5, -0.2, 1.5, 0.0, 2.0,
                                     -1.0, 3.0, 40.0, -25.0};
    const double b = 123.0;
    std::vector<RadiomicRecord> recs;
    std::vector<std::array<double, 9>> xs;
    for (int i = 0; i < 24; ++i) {
        std::array<double, 9> x{};
        for (int j = 0; j < 7; ++j) x[size_t(j)] = 10.0 * uniform01(rng);
        x[7] = double(bounded_u64(rng, 2));
        x[8] = x[7] == 1.0 ? 0.0 : double(bounded_u64(rng, 2));
        double y = b;
        for (int j = 0; j < 9; ++j) y += w[size_t(j)] * x[size_t(j)];
        recs.push_back(make_record("r" + std::to_string(i), x, y));
        xs.push_back(x);
    }

    const SurvivalFit fit = fit_survival(recs);
    CHECK(fit.r2 >= 1.0 - 1e-8);
    CHECK(fit.constant_features.empty());
    CHECK(!fit.rank_deficient);

    // Undo the z-scoring: beta_j = coef_j / std_j must equal w_j.
    for (int j = 0; j < 9; ++j) {
        const double beta =
            fit.model.coefficients[size_t(j)] / fit.model.feature_stds[size_t(j)];
        CHECK(beta == doctest::Approx(w[size_t(j)]).epsilon(1e-6));
    }

    // Predictions reproduce the targets.
    for (size_t i = 0; i < recs.size(); ++i)
        CHECK(predict_survival(fit.model, recs[i]) ==
              doctest::Approx(*recs[i].survival_days).epsilon(1e-8));
}

TEST_CASE("fit_survival agrees with normal equations on noisy data") {
    Rng rng(65);
    std::vector<RadiomicRecord> recs;
    std::vector<std::array<double, 9>> xs;
    std::vector<double> ys;
    for (int i = 0; i < 40; ++i) {
        std::array<double, 9> x{};
        for (int j = 0; j < 9; ++j) x[size_t(j)] = 5.0 * uniform01(rng);
        const double y = 200.0 + 30.0 * x[0] - 12.0 * x[4] +
                         8.0 * x[6] + 25.0 * normal01(rng);
        recs.push_back(make_record("n" + std::to_string(i), x, y));
        xs.push_back(x);
        ys.push_back(y);
    }
    const SurvivalFit fit = fit_survival(recs);

    // Rebuild the z-scored design with an intercept column and solve the
    // normal equations by hand.
    std::array<double, 9> mu{}, sd{};
    for (int j = 0; j < 9; ++j) {
        for (const auto& x : xs) mu[size_t(j)] += x[size_t(j)];
        mu[size_t(j)] /= double(xs.size());
        double ss = 0;
        for (const auto& x : xs) {
            const double d = x[size_t(j)] - mu[size_t(j)];
            ss += d * d;
        }
        sd[size_t(j)] = std::sqrt(ss / double(xs.size()));
        CHECK(fit.model.feature_means[size_t(j)] ==
              doctest::Approx(mu[size_t(j)]).epsilon(1e-12));
        CHECK(fit.model.feature_stds[size_t(j)] ==
              doctest::Approx(sd[size_t(j)]).epsilon(1e-12));
    }
    std::vector<std::array<double, 10>> design;
    for (const auto& x : xs) {
        std::array<double, 10> row{};
        row[0] = 1.0;
        for (int j = 0; j < 9; ++j)
            row[size_t(j + 1)] = (x[size_t(j)] - mu[size_t(j)]) / sd[size_t(j)];
        design.push_back(row);
    }
    const std::vector<double> beta = normal_equations(design, ys);
    CHECK(fit.model.intercept == doctest::Approx(beta[0]).epsilon(1e-6));
    for (int j = 0; j < 9; ++j)
        CHECK(fit.model.coefficients[size_t(j)] ==
              doctest::Approx(beta[size_t(j + 1)]).epsilon(1e-6));
}

TEST_CASE("fit_survival is invariant to affine feature rescaling") {
    Rng rng(66);
    std::vector<RadiomicRecord> base, scaled;
    for (int i = 0; i < 20; ++i) {
        std::array<double, 9> x{}, xs{};
        for (int j = 0; j < 9; ++j) {
            x[size_t(j)] = uniform01(rng);
            xs[size_t(j)] = 100.0 * x[size_t(j)] + double(j);
        }
        const double y = 50.0 + 400.0 * uniform01(rng);
        base.push_back(make_record("b" + std::to_string(i), x, y));
        scaled.push_back(make_record("b" + std::to_string(i), xs, y));
    }
    const SurvivalFit fa = fit_survival(base);
    const SurvivalFit fb = fit_survival(scaled);
    // z-scoring absorbs the affine map, so standardized coefficients and
    // fitted values agree.
    CHECK(fa.r2 == doctest::Approx(fb.r2).epsilon(1e-8));
    for (int j = 0; j < 9; ++j)
        CHECK(fa.model.coefficients[size_t(j)] ==
              doctest::Approx(fb.model.coefficients[size_t(j)])
                  .epsilon(1e-8));
    for (size_t i = 0; i < base.size(); ++i)
        CHECK(predict_survival(fa.model, base[i]) ==
              doctest::Approx(predict_survival(fb.model, scaled[i]))
                  .epsilon(1e-8));
}

TEST_CASE("constant features are neutralized with a warning") {
    Rng rng(67);
    std::vector<RadiomicRecord> recs;
    for (int i = 0; i < 15; ++i) {
        std::array<double, 9> x{};
        for (int j = 0; j < 7; ++j) x[size_t(j)] = uniform01(rng);
        x[7] = 1.0;  // everyone had the same resection status
        x[8] = 0.0;
        recs.push_back(
            make_record("c" + std::to_string(i), x, 100.0 + 10.0 * x[0]));
    }
    const SurvivalFit fit = fit_survival(recs);
    REQUIRE(fit.constant_features.size() == 2);
    CHECK(fit.constant_features[0] == 7);
    CHECK(fit.constant_features[1] == 8);
    CHECK(fit.model.coefficients[7] == 0.0);
    CHECK(fit.model.coefficients[8] == 0.0);
    CHECK(fit.model.feature_stds[7] == 1.0);
    CHECK(fit.model.feature_stds[8] == 1.0);
    REQUIRE(!fit.warnings.empty());
    CHECK(fit.warnings[0].find("constant") != std::string::npos);
    // Model still fits the varying features.
    CHECK(fit.r2 >= 1.0 - 1e-8);
}

TEST_CASE("constant targets give a flat model") {
    Rng rng(69);
    std::vector<RadiomicRecord> recs;
    for (int i = 0; i < 12; ++i) {
        std::array<double, 9> x{};
        for (int j = 0; j < 9; ++j) x[size_t(j)] = uniform01(rng);
        recs.push_back(make_record("k" + std::to_string(i), x, 365.0));
    }
    const SurvivalFit fit = fit_survival(recs);
    CHECK(fit.model.intercept == 365.0);
    for (double c : fit.model.coefficients) CHECK(c == 0.0);
    CHECK(fit.r2 == 1.0);
    CHECK(predict_survival(fit.model, recs[0]) == 365.0);
}

TEST_CASE("fit_survival input validation") {
    Rng rng(68);
    std::vector<RadiomicRecord> few;
    for (int i = 0; i < 9; ++i) {
        std::array<double, 9> x{};
        for (int j = 0; j < 9; ++j) x[size_t(j)] = uniform01(rng);
        few.push_back(make_record("f" + std::to_string(i), x, 100.0));
    }
    CHECK_THROWS_WITH(fit_survival(few), doctest::Contains("10"));

    auto recs = few;
    std::array<double, 9> x{};
    x[0] = 0.5;
    recs.push_back(make_record("f9", x, std::nullopt));
    CHECK_THROWS_WITH(fit_survival(recs), doctest::Contains("survival"));
}

TEST_CASE("survival metrics match hand computation on a 5-case fixture") {
    const std::vector<double> pred = {250.0, 310.0, 460.0, 100.0, 455.0};
    const std::vector<double> truth = {240.0, 400.0, 430.0, 120.0, 500.0};
    const SurvivalMetrics m = survival_metrics(pred, truth);

    // Squared errors: 100, 8100, 900, 400, 2025.
    const std::vector<double> se = {100.0, 8100.0, 900.0, 400.0, 2025.0};
    const double mse = (100.0 + 8100.0 + 900.0 + 400.0 + 2025.0) / 5.0;
    CHECK(m.mse == doctest::Approx(mse).epsilon(1e-12));
    CHECK(m.median_se == 900.0);
    double var = 0;
    for (double s : se) var += (s - mse) * (s - mse);
    var /= 5.0;
    CHECK(m.std_se == doctest::Approx(std::sqrt(var)).epsilon(1e-12));

    // Rank vectors (2,3,5,1,4) vs (2,3,4,1,5): Pearson on ranks is
    // 9 / sqrt(10 * 10) = 0.9.
    CHECK(m.spearman == doctest::Approx(0.9).epsilon(1e-12));

    // Buckets: pred -> 0,1,2,0,2 ; truth -> 0,1,1,0,2 -> 4/5 agree.
    CHECK(m.accuracy == doctest::Approx(0.8).epsilon(1e-12));

    // R^2 = 1 - SSE/SST against the truth mean.
    const double mean_t = (240.0 + 400.0 + 430.0 + 120.0 + 500.0) / 5.0;
    double sst = 0;
    for (double t : truth) sst += (t - mean_t) * (t - mean_t);
    const double sse = 100.0 + 8100.0 + 900.0 + 400.0 + 2025.0;
    CHECK(m.r2 == doctest::Approx(1.0 - sse / sst).epsilon(1e-12));
}

TEST_CASE("spearman handles ties through averaged ranks") {
    CHECK(average_ranks({10.0, 20.0, 20.0, 30.0}) ==
          std::vector<double>{1.0, 2.5, 2.5, 4.0});
    CHECK(average_ranks({5.0, 5.0, 5.0}) ==
          std::vector<double>{2.0, 2.0, 2.0});
    CHECK(average_ranks({3.0, 1.0, 2.0}) ==
          std::vector<double>{3.0, 1.0, 2.0});

    // Pearson on the averaged ranks, restated by hand.
    const std::vector<double> pred = {1.0, 2.0, 2.0, 4.0, 5.0};
    const std::vector<double> truth = {10.0, 30.0, 20.0, 50.0, 40.0};
    const SurvivalMetrics m = survival_metrics(pred, truth);
    const auto rp = average_ranks(pred);
    const auto rt = average_ranks(truth);
    double mp = 0, mt = 0;
    for (size_t i = 0; i < rp.size(); ++i) {
        mp += rp[i];
        mt += rt[i];
    }
    mp /= 5.0;
    mt /= 5.0;
    double num = 0, dp = 0, dt = 0;
    for (size_t i = 0; i < rp.size(); ++i) {
        num += (rp[i] - mp) * (rt[i] - mt);
        dp += (rp[i] - mp) * (rp[i] - mp);
        dt += (rt[i] - mt) * (rt[i] - mt);
    }
    CHECK(m.spearman ==
          doctest::Approx(num / std::sqrt(dp * dt)).epsilon(1e-12));
}

TEST_CASE("survival buckets use inclusive mid-range bounds") {
    CHECK(survival_bucket(0.0) == 0);
    CHECK(survival_bucket(299.999) == 0);
    CHECK(survival_bucket(300.0) == 1);
    CHECK(survival_bucket(450.0) == 1);
    CHECK(survival_bucket(450.0001) == 2);
    CHECK(survival_bucket(1000.0) == 2);
    CHECK(survival_bucket(100.0, 90.0, 110.0) == 1);
}

TEST_CASE("survival metric validation") {
    CHECK_THROWS_WITH(survival_metrics({1.0, 2.0}, {1.0}),
                      doctest::Contains("length"));
    CHECK_THROWS_WITH(survival_metrics({1.0}, {1.0}),
                      doctest::Contains("at least"));
    CHECK_THROWS_WITH(survival_metrics({1.0, 2.0}, {5.0, 5.0}),
                      doctest::Contains("constant"));
    CHECK_THROWS_WITH(survival_metrics({3.0, 3.0}, {1.0, 2.0}),
                      doctest::Contains("constant"));
}

TEST_CASE("survival model round trips through its file format") {
    const auto dir = testutil::fresh_dir("survmodel");
    SurvivalModel m;
    for (int j = 0; j < 9; ++j) {
        m.feature_means[size_t(j)] = 0.1 * j - 0.3;
        m.feature_stds[size_t(j)] = 1.0 + 0.05 * j;
        m.coefficients[size_t(j)] = std::pow(-1.0, j) * (j + 0.125);
    }
    m.intercept = 321.0625;
    const std::string path = (dir / "model.json").string();
    save_survival_model(path, m);
    const SurvivalModel r = load_survival_model(path);
    CHECK(r.feature_means == m.feature_means);
    CHECK(r.feature_stds == m.feature_stds);
    CHECK(r.coefficients == m.coefficients);
    CHECK(r.intercept == m.intercept);
}

TEST_CASE("clinical and prediction tables round trip") {
    const auto dir = testutil::fresh_dir("survtables");

    std::vector<ClinicalRecord> rows;
    rows.push_back({"sub1", 61.25, "GTR", 142.0});
    rows.push_back({"sub2", 45.0, "STR", std::nullopt});
    rows.push_back({"sub3", 70.5, "NA", 512.5});
    const std::string cpath = (dir / "clinical.csv").string();
    save_clinical_table(cpath, rows);
    const auto back = load_clinical_table(cpath);
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].subject_id == rows[i].subject_id);
        CHECK(back[i].age == rows[i].age);
        CHECK(back[i].resection_status == rows[i].resection_status);
        CHECK(back[i].survival_days == rows[i].survival_days);
    }

    const std::vector<std::pair<std::string, double>> preds = {
        {"sub1", 133.125}, {"sub2", 402.5}};
    const std::string ppath = (dir / "pred.csv").string();
    save_survival_predictions(ppath, preds);
    CHECK(load_survival_predictions(ppath) == preds);
}

TEST_CASE("feature tables round trip including absent survival") {
    const auto dir = testutil::fresh_dir("feattable");
    std::vector<RadiomicRecord> rows;
    rows.push_back(
        make_record("a", {10, 2.5, 30, 4.5, 50, 6.5, 61, 1, 0}, 250.0));
    rows.push_back(
        make_record("b", {0, 0, 7, 1.25, 0, 0, 48.5, 0, 1}, std::nullopt));
    const std::string path = (dir / "features.csv").string();
    write_feature_table(path, rows);
    const auto back = read_feature_table(path);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].subject_id == rows[i].subject_id);
        CHECK(back[i].features() == rows[i].features());
        CHECK(back[i].survival_days == rows[i].survival_days);
    }
}
