#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "btseg/pipeline.hpp"
#include "btseg/radiomics_survival.hpp"
#include "btseg/volume_io.hpp"
#include "test_util.hpp"

using namespace btseg;
namespace fs = std::filesystem;

namespace {

PipelineConfig mini_config(const fs::path& data, const fs::path& out) {
    PipelineConfig cfg;
    cfg.data_root = data.string();
    cfg.output_root = out.string();
    cfg.train_count = 10;
    cfg.stat_draws = 20;
    cfg.phantoms = {12, 32};

    ModelConfig m;
    m.name = "mini";
    m.num_blocks = 2;
    m.patch_size = 16;
    m.base_features = 4;
    m.loss = LossType::Weighted;
    m.set_weights_from_loss();
    cfg.models = {m};

    cfg.schedule.epochs = 2;
    return cfg;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(bool(is));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

}  // namespace

TEST_CASE("stage names parse and round trip") {
    for (Stage s : all_stages()) CHECK(parse_stage(stage_name(s)) == s);
    CHECK_THROWS_WITH(parse_stage("bogus"),
                      doctest::Contains("unknown stage"));

    const auto two = parse_stage_list("phantoms,preprocess");
    REQUIRE(two.size() == 2);
    CHECK(two[0] == Stage::Phantoms);
    CHECK(two[1] == Stage::Preprocess);

    // Whitespace is tolerated.
    const auto spaced = parse_stage_list(" train , predict ");
    REQUIRE(spaced.size() == 2);
    CHECK(spaced[0] == Stage::Train);

    CHECK_THROWS_WITH(parse_stage_list("train,stats"),
                      doctest::Contains("dependency order"));
    CHECK_THROWS_WITH(parse_stage_list("train,train"),
                      doctest::Contains("dependency order"));
    CHECK_THROWS_WITH(parse_stage_list(""),
                      doctest::Contains("empty stage list"));
    CHECK_THROWS_WITH(parse_stage_list(" , "),
                      doctest::Contains("empty stage list"));
}

TEST_CASE("pipeline config survives a JSON round trip") {
    for (PipelineConfig cfg :
         {default_pipeline_config(), toy_pipeline_config()}) {
        const Json j = to_json(cfg);
        const PipelineConfig back = pipeline_config_from_json(j);
        CHECK(to_json(back).dump() == j.dump());
    }

    const auto dir = testutil::fresh_dir("pipecfg");
    const std::string path = (dir / "config.json").string();
    const PipelineConfig cfg = toy_pipeline_config();
    save_pipeline_config(path, cfg);
    const PipelineConfig loaded = load_pipeline_config(path);
    CHECK(to_json(loaded).dump() == to_json(cfg).dump());

    std::ofstream bad(dir / "bad.json");
    bad << "{ not json";
    bad.close();
    CHECK_THROWS_WITH(load_pipeline_config((dir / "bad.json").string()),
                      doctest::Contains("invalid JSON"));
}

TEST_CASE("pipeline config validation rejects bad setups") {
    PipelineConfig cfg = toy_pipeline_config();
    cfg.data_root.clear();
    CHECK_THROWS_WITH(cfg.validate(), doctest::Contains("data_root"));

    cfg = toy_pipeline_config();
    cfg.models.push_back(cfg.models[0]);  // duplicate name
    CHECK_THROWS_WITH(cfg.validate(), doctest::Contains("duplicate"));

    cfg = toy_pipeline_config();
    cfg.models.clear();
    CHECK_THROWS_WITH(cfg.validate(), doctest::Contains("at least one"));

    cfg = toy_pipeline_config();
    cfg.survival_buckets = {450.0, 300.0};
    CHECK_THROWS_WITH(cfg.validate(), doctest::Contains("survival_buckets"));

    cfg = toy_pipeline_config();
    cfg.train_count = -1;
    CHECK_THROWS_WITH(cfg.validate(), doctest::Contains("train_count"));
}

TEST_CASE("missing upstream artifacts name the stage to run") {
    const auto data = testutil::fresh_dir("pipemiss_data");
    const auto out = testutil::fresh_dir("pipemiss_out");
    PipelineConfig cfg = mini_config(data, out);
    std::ostringstream log;

    // Stats before preprocess: the fused volumes are missing.
    run_pipeline(cfg, {Stage::Phantoms}, log);
    CHECK_THROWS_WITH(run_pipeline(cfg, {Stage::Stats}, log),
                      doctest::Contains("run the 'preprocess' stage first"));

    // Predict before train: checkpoints are missing.
    run_pipeline(cfg, {Stage::Preprocess}, log);
    CHECK_THROWS_WITH(run_pipeline(cfg, {Stage::Predict}, log),
                      doctest::Contains("run the 'train' stage first"));

    // Ensemble before predict; features before ensemble.
    CHECK_THROWS_WITH(run_pipeline(cfg, {Stage::Ensemble}, log),
                      doctest::Contains("run the 'predict' stage first"));
    CHECK_THROWS_WITH(run_pipeline(cfg, {Stage::Features}, log),
                      doctest::Contains("run the 'ensemble' stage first"));
    CHECK_THROWS_WITH(run_pipeline(cfg, {Stage::Survival}, log),
                      doctest::Contains("run the 'features' stage first"));
}

TEST_CASE("a desk-scale pipeline runs end to end and resumes cleanly") {
    const auto data = testutil::fresh_dir("piperun_data");
    const auto out = testutil::fresh_dir("piperun_out");
    const PipelineConfig cfg = mini_config(data, out);
    std::ostringstream log;
    run_pipeline(cfg, all_stages(), log);

    // Phantom + preprocessing artifacts.
    CHECK(fs::exists(data / "clinical.csv"));
    size_t fused = 0;
    for (const auto& e : fs::directory_iterator(out / "preproc"))
        fused += e.path().extension() == ".gz";
    CHECK(fused == 12);

    // Stats for the single distinct patch size.
    CHECK(fs::exists(out / "stats" / "channel_stats_p16.json"));

    // One checkpoint and its loss history: header + 2 epochs x 10 subjects.
    CHECK(fs::exists(out / "models" / "mini.ckpt"));
    const auto loss_lines = read_lines(out / "models" / "mini_loss.csv");
    REQUIRE(loss_lines.size() == 21);
    CHECK(loss_lines[0] == "epoch,step,loss");

    // Held-out probabilities and fused segmentations for 2 subjects.
    int prob_files = 0;
    for (const auto& e :
         fs::recursive_directory_iterator(out / "probs")) {
        if (!e.is_regular_file()) continue;
        ++prob_files;
        const ProbabilityMap pm = load_probability_map(e.path().string());
        CHECK(pm.spatial_shape() == std::array<int, 3>{32, 32, 32});
    }
    CHECK(prob_files == 2);
    int segs = 0;
    for (const auto& e : fs::directory_iterator(out / "seg")) {
        const LabelMap lm = load_label_map(e.path().string());
        for (uint8_t v : lm.data) CHECK(v <= 3);
        ++segs;
    }
    CHECK(segs == 2);

    // Feature tables: ground truth for training, predictions held out.
    const auto train_rows =
        read_feature_table((out / "features" / "train_features.csv").string());
    const auto eval_rows =
        read_feature_table((out / "features" / "eval_features.csv").string());
    CHECK(train_rows.size() == 10);
    CHECK(eval_rows.size() == 2);

    // Survival artifacts; the phantom rule is linear, so training R2 is 1.
    CHECK(fs::exists(out / "survival" / "model.json"));
    CHECK(fs::exists(out / "survival" / "predictions.csv"));
    CHECK(fs::exists(out / "survival" / "metrics.json"));
    std::ifstream rs(out / "survival" / "fit_report.json");
    Json report;
    rs >> report;
    CHECK(report.at("r2").get<double>() >= 1.0 - 1e-8);

    // Evaluation tables.
    const auto seg_lines = read_lines(out / "eval" / "segmentation.csv");
    CHECK(seg_lines[0] ==
          "subject_id,region,dice,hd95,sensitivity,specificity");
    // 2 subjects x 3 regions + 3 regions x (mean, median) + header.
    CHECK(seg_lines.size() == 1 + 6 + 6);
    CHECK(fs::exists(out / "eval" / "summary.json"));

    // Re-running a late stage over existing artifacts changes nothing.
    const auto seg_path = out / "seg";
    std::vector<std::pair<fs::path, std::string>> before;
    for (const auto& e : fs::directory_iterator(seg_path))
        before.emplace_back(e.path(),
                            testutil::read_file_bytes(e.path()));
    run_pipeline(cfg, {Stage::Ensemble}, log);
    for (const auto& [p, bytes] : before)
        CHECK(testutil::read_file_bytes(p) == bytes);
}

TEST_CASE("two pipeline runs produce byte-identical artifact trees") {
    const auto data1 = testutil::fresh_dir("pipedet_data1");
    const auto out1 = testutil::fresh_dir("pipedet_out1");
    const auto data2 = testutil::fresh_dir("pipedet_data2");
    const auto out2 = testutil::fresh_dir("pipedet_out2");

    PipelineConfig a = mini_config(data1, out1);
    PipelineConfig b = mini_config(data2, out2);
    std::ostringstream log;
    run_pipeline(a, all_stages(), log);
    run_pipeline(b, all_stages(), log);

    size_t compared = 0;
    for (const auto& root : {std::pair{data1, data2}, {out1, out2}}) {
        for (const auto& e :
             fs::recursive_directory_iterator(root.first)) {
            if (!e.is_regular_file()) continue;
            const auto rel = fs::relative(e.path(), root.first);
            REQUIRE(fs::exists(root.second / rel));
            CHECK(testutil::same_file_bytes(e.path(), root.second / rel));
            ++compared;
        }
    }
    // 12 subjects x 5 + clinical, then 12 fused, 1 stats, ckpt + loss,
    // 2 probs, 2 segs, 2 feature tables, 4 survival files, 2 eval files.
    CHECK(compared == 61 + 27);
}

TEST_CASE("write_evaluation_tables reports what summarize_metric computes") {
    SubjectEvaluation e1, e2;
    e1.subject_id = "s1";
    e2.subject_id = "s2";
    for (size_t r = 0; r < 3; ++r) {
        e1.regions[r].dice = 0.5 + 0.1 * double(r);
        e1.regions[r].hd95 = 2.0 + double(r);
        e1.regions[r].sensitivity = 0.9;
        e1.regions[r].specificity = 0.99;
        e2.regions[r].dice = 0.7;
        e2.regions[r].hd95 = std::nullopt;  // empty prediction, say
        e2.regions[r].sensitivity = std::nullopt;
        e2.regions[r].specificity = 0.95;
    }
    const auto dir = testutil::fresh_dir("evaltables");
    write_evaluation_tables(dir.string(), {e1, e2});

    const auto lines = read_lines(dir / "segmentation.csv");
    REQUIRE(lines.size() == 1 + 2 * 3 + 3 * 2);
    CHECK(lines[1].rfind("s1,ET,", 0) == 0);

    std::ifstream is(dir / "summary.json");
    Json summary;
    is >> summary;
    for (const char* region : {"ET", "WT", "TC"}) {
        const auto& js = summary.at(region);
        CHECK(js.at("dice").at("present").get<int>() == 2);
        CHECK(js.at("hd95").at("present").get<int>() == 1);
        CHECK(js.at("hd95").at("absent").get<int>() == 1);
        CHECK(js.at("sensitivity").at("present").get<int>() == 1);
    }
    // Spot-check one number against a direct summarize_metric call.
    const MetricSummary et_dice = summarize_metric({0.5, 0.7});
    CHECK(summary.at("ET").at("dice").at("mean").get<double>() ==
          doctest::Approx(*et_dice.mean).epsilon(1e-12));
}
