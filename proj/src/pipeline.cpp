// pipeline.cpp

#include "btseg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "btseg/checkpoint.hpp"
#include "btseg/dataset.hpp"
#include "btseg/ensemble.hpp"
#include "btseg/inference.hpp"
#include "btseg/phantom.hpp"
#include "btseg/radiomics_survival.hpp"
#include "btseg/text_io.hpp"
#include "btseg/train.hpp"
#include "btseg/volume_io.hpp"

namespace fs = std::filesystem;

namespace btseg {

namespace {

constexpr const char* kStageNames[] = {
    "phantoms", "preprocess", "stats",    "train",    "predict",
    "ensemble", "features",   "survival", "evaluate",
};

std::string stats_filename(int patch_size) {
    return "channel_stats_p" + std::to_string(patch_size) + ".json";
}

void require_artifact(const fs::path& p, const char* producer) {
    if (!fs::exists(p))
        throw std::runtime_error("missing artifact " + p.string() +
                                 "; run the '" + producer + "' stage first");
}

struct SubjectSplit {
    std::vector<SubjectPaths> train, eval;
};

SubjectSplit split_subjects(const PipelineConfig& cfg) {
    auto all = discover_subjects(cfg.data_root, /*require_labels=*/true);
    const int n = static_cast<int>(all.size());
    int k = cfg.train_count <= 0 ? n : cfg.train_count;
    if (k > n)
        throw std::runtime_error("train_count " + std::to_string(k) +
                                 " exceeds the " + std::to_string(n) +
                                 " discovered subjects");
    SubjectSplit s;
    s.train.assign(all.begin(), all.begin() + k);
    s.eval.assign(all.begin() + k, all.end());
    return s;
}

// Loaded training-side data shared by the stats and train stages.
struct TrainData {
    std::vector<MultiModalVolume> volumes;
    std::vector<LabelMap> labels;
};

TrainData load_train_data(const PipelineConfig& cfg,
                          const std::vector<SubjectPaths>& subjects) {
    TrainData d;
    d.volumes.reserve(subjects.size());
    d.labels.reserve(subjects.size());
    for (const auto& s : subjects) {
        const fs::path pre =
            fs::path(cfg.output_root) / "preproc" / (s.id + ".nii.gz");
        require_artifact(pre, "preprocess");
        d.volumes.push_back(load_multimodal_volume(pre.string()));
        d.labels.push_back(load_label_map(s.labels));
        if (d.labels.back().shape != d.volumes.back().spatial_shape())
            throw std::runtime_error(s.id +
                                     ": label/volume shape mismatch");
    }
    return d;
}

std::vector<SamplingWeights> build_weights(const TrainData& d,
                                           int patch_size) {
    std::vector<SamplingWeights> w;
    w.reserve(d.volumes.size());
    for (size_t i = 0; i < d.volumes.size(); ++i)
        w.push_back(
            compute_sampling_weights(d.volumes[i], d.labels[i], patch_size));
    return w;
}

std::vector<SamplerSubject> make_sampler_subjects(
    const TrainData& d, const std::vector<SamplingWeights>& w) {
    std::vector<SamplerSubject> s(d.volumes.size());
    for (size_t i = 0; i < s.size(); ++i)
        s[i] = {&d.volumes[i], &d.labels[i], &w[i]};
    return s;
}

void stage_phantoms(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.phantoms.count <= 0) {
        log << "  phantom generation disabled (count 0); using existing "
            << cfg.data_root << "\n";
        return;
    }
    PhantomOptions opt;
    opt.count = cfg.phantoms.count;
    opt.dim = cfg.phantoms.dim;
    opt.seed = cfg.seeds.phantoms;
    generate_phantoms(opt, cfg.data_root);
    log << "  wrote " << opt.count << " subjects (" << opt.dim << "^3) to "
        << cfg.data_root << "\n";
}

void stage_preprocess(const PipelineConfig& cfg, std::ostream& log) {
    const auto subjects =
        discover_subjects(cfg.data_root, /*require_labels=*/true);
    const fs::path out = fs::path(cfg.output_root) / "preproc";
    fs::create_directories(out);
    const fs::path external_dir = out / "external";
    if (!cfg.preprocess.skip_external) fs::create_directories(external_dir);

    for (const auto& s : subjects) {
        std::array<ScalarVolume, 4> raw;
        for (int c = 0; c < 4; ++c) {
            std::string src = s.contrasts[c];
            if (!cfg.preprocess.skip_external) {
                const fs::path staged =
                    external_dir /
                    (s.id + "_" + contrast_name(kContrastOrder[c]) +
                     ".nii.gz");
                run_external_stage(cfg.preprocess, src, staged.string());
                src = staged.string();
            }
            raw[c] = load_scalar_volume(src, kContrastOrder[c]);
        }
        const MultiModalVolume fused = fuse_contrasts(
            minmax_normalize(raw[0]), minmax_normalize(raw[1]),
            minmax_normalize(raw[2]), minmax_normalize(raw[3]));
        const fs::path dst = out / (s.id + ".nii.gz");
        save_multimodal_volume(fused, dst.string());
        log << "  " << s.id << " -> " << dst.string() << " ("
            << shape_string(fused.spatial_shape()) << ")\n";
    }
}

void stage_stats(const PipelineConfig& cfg, std::ostream& log) {
    const SubjectSplit split = split_subjects(cfg);
    const TrainData data = load_train_data(cfg, split.train);
    const fs::path out = fs::path(cfg.output_root) / "stats";
    fs::create_directories(out);

    std::set<int> patch_sizes;
    for (const auto& m : cfg.models) patch_sizes.insert(m.patch_size);
    for (int ps : patch_sizes) {
        const auto weights = build_weights(data, ps);
        const auto subjects = make_sampler_subjects(data, weights);
        Rng rng(derive_seed(cfg.seeds.stats, static_cast<uint64_t>(ps)));
        const ChannelStats stats =
            estimate_channel_stats(subjects, ps, cfg.stat_draws, rng);
        const fs::path dst = out / stats_filename(ps);
        std::ofstream os(dst);
        os << to_json(stats).dump(2) << "\n";
        if (!os)
            throw std::runtime_error("write failed for " + dst.string());
        log << "  patch " << ps << ": mean";
        for (double m : stats.mean) log << " " << m;
        log << "  std";
        for (double s : stats.stddev) log << " " << s;
        log << "\n";
    }
}

void stage_train(const PipelineConfig& cfg, std::ostream& log) {
    const SubjectSplit split = split_subjects(cfg);
    const TrainData data = load_train_data(cfg, split.train);
    const fs::path out = fs::path(cfg.output_root) / "models";
    fs::create_directories(out);

    for (const auto& mc : cfg.models) {
        const fs::path stats_path = fs::path(cfg.output_root) / "stats" /
                                    stats_filename(mc.patch_size);
        require_artifact(stats_path, "stats");
        std::ifstream is(stats_path);
        Json sj;
        is >> sj;
        const ChannelStats stats = channel_stats_from_json(sj);

        const auto weights = build_weights(data, mc.patch_size);
        const auto subjects = make_sampler_subjects(data, weights);

        UNet3D<float> model(mc, derive_seed(cfg.seeds.train,
                                            mc.name + ":init"));
        log << "  " << mc.name << ": " << model.param_count()
            << " parameters\n";

        const fs::path loss_path = out / (mc.name + "_loss.csv");
        std::ofstream loss_csv(loss_path);
        loss_csv << "epoch,step,loss\n";
        Rng rng(derive_seed(cfg.seeds.train, mc.name + ":steps"));
        const TrainResult res = train_model(
            model, subjects, stats, cfg.schedule, rng,
            [&](int epoch, int step, double loss) {
                loss_csv << epoch << "," << step << ","
                         << format_double(loss) << "\n";
            });
        if (!loss_csv)
            throw std::runtime_error("write failed for " + loss_path.string());
        loss_csv.close();

        save_checkpoint((out / (mc.name + ".ckpt")).string(), model, stats);
        const double last =
            res.loss_history.empty() ? 0.0 : res.loss_history.back();
        log << "  " << mc.name << ": " << res.loss_history.size()
            << " steps, final loss " << last << "\n";
    }
}

void stage_predict(const PipelineConfig& cfg, std::ostream& log) {
    const SubjectSplit split = split_subjects(cfg);
    if (split.eval.empty()) {
        log << "  no held-out subjects (train_count covers all); skipping\n";
        return;
    }
    for (const auto& mc : cfg.models) {
        const fs::path ckpt_path =
            fs::path(cfg.output_root) / "models" / (mc.name + ".ckpt");
        require_artifact(ckpt_path, "train");
        Checkpoint ck;
        auto model = load_checkpoint(ckpt_path.string(), ck);
        const UNetPredictor predictor(*model, ck.stats);

        for (const auto& s : split.eval) {
            const fs::path pre =
                fs::path(cfg.output_root) / "preproc" / (s.id + ".nii.gz");
            require_artifact(pre, "preprocess");
            const MultiModalVolume vol = load_multimodal_volume(pre.string());
            const SlidingPlan plan =
                plan_windows(vol.spatial_shape(), ck.config.patch_size,
                             cfg.inference.stride);
            const ProbabilityMap pm =
                predict_volume(vol, predictor, plan, cfg.inference.flip_tta);
            const fs::path dir = fs::path(cfg.output_root) / "probs" / s.id;
            fs::create_directories(dir);
            const fs::path dst = dir / (mc.name + ".nii.gz");
            save_probability_map(pm, dst.string());
            log << "  " << mc.name << " / " << s.id << ": "
                << plan.window_count() << " windows -> " << dst.string()
                << "\n";
        }
    }
}

void stage_ensemble(const PipelineConfig& cfg, std::ostream& log) {
    const SubjectSplit split = split_subjects(cfg);
    if (split.eval.empty()) {
        log << "  no held-out subjects; skipping\n";
        return;
    }
    const fs::path out = fs::path(cfg.output_root) / "seg";
    fs::create_directories(out);
    for (const auto& s : split.eval) {
        std::vector<ProbabilityMap> maps;
        maps.reserve(cfg.models.size());
        for (const auto& mc : cfg.models) {
            const fs::path p = fs::path(cfg.output_root) / "probs" / s.id /
                               (mc.name + ".nii.gz");
            require_artifact(p, "predict");
            maps.push_back(load_probability_map(p.string()));
        }
        const ProbabilityMap avg = average_probabilities(maps);
        const LabelMap seg = argmax_labels(avg);
        const fs::path dst = out / (s.id + "_seg.nii.gz");
        save_label_map(seg, dst.string());
        log << "  " << s.id << ": " << maps.size() << " models -> "
            << dst.string() << "\n";
    }
}

std::map<std::string, ClinicalRecord> clinical_by_id(
    const PipelineConfig& cfg) {
    const fs::path table = fs::path(cfg.data_root) / "clinical.csv";
    if (!fs::exists(table))
        throw std::runtime_error(
            "missing clinical table " + table.string() +
            "; provide it with the dataset (the 'phantoms' stage writes one)");
    std::map<std::string, ClinicalRecord> by_id;
    for (auto& r : load_clinical_table(table.string()))
        by_id[r.subject_id] = std::move(r);
    return by_id;
}

RadiomicRecord make_record(const LabelMap& labels, const ClinicalRecord& c) {
    RadiomicRecord r;
    r.subject_id = c.subject_id;
    const auto f = extract_features(labels);
    r.volumes = {f[0], f[2], f[4]};
    r.surfaces = {f[1], f[3], f[5]};
    const auto clin = encode_clinical(c.age, c.resection_status);
    r.age = clin[0];
    r.resection = {clin[1], clin[2]};
    r.survival_days = c.survival_days;
    return r;
}

void stage_features(const PipelineConfig& cfg, std::ostream& log) {
    const SubjectSplit split = split_subjects(cfg);
    const auto clinical = clinical_by_id(cfg);
    const auto clinical_for = [&](const std::string& id)
        -> const ClinicalRecord& {
        const auto it = clinical.find(id);
        if (it == clinical.end())
            throw std::runtime_error("subject " + id +
                                     " missing from clinical.csv");
        return it->second;
    };
    const fs::path out = fs::path(cfg.output_root) / "features";
    fs::create_directories(out);

    // Training side: features from the ground-truth label maps.
    std::vector<RadiomicRecord> train_rows;
    for (const auto& s : split.train)
        train_rows.push_back(
            make_record(load_label_map(s.labels), clinical_for(s.id)));
    write_feature_table((out / "train_features.csv").string(), train_rows);
    log << "  " << train_rows.size() << " training records (ground truth)\n";

    // Held-out side: features from the predicted label maps.
    std::vector<RadiomicRecord> eval_rows;
    for (const auto& s : split.eval) {
        const fs::path seg =
            fs::path(cfg.output_root) / "seg" / (s.id + "_seg.nii.gz");
        require_artifact(seg, "ensemble");
        eval_rows.push_back(
            make_record(load_label_map(seg.string()), clinical_for(s.id)));
    }
    write_feature_table((out / "eval_features.csv").string(), eval_rows);
    log << "  " << eval_rows.size() << " held-out records (predictions)\n";
}

void stage_survival(const PipelineConfig& cfg, std::ostream& log) {
    const fs::path fdir = fs::path(cfg.output_root) / "features";
    require_artifact(fdir / "train_features.csv", "features");
    require_artifact(fdir / "eval_features.csv", "features");
    const auto train_rows =
        read_feature_table((fdir / "train_features.csv").string());
    const auto eval_rows =
        read_feature_table((fdir / "eval_features.csv").string());

    const fs::path out = fs::path(cfg.output_root) / "survival";
    fs::create_directories(out);

    const SurvivalFit fit = fit_survival(train_rows);
    save_survival_model((out / "model.json").string(), fit.model);
    Json report{{"r2", fit.r2},
                {"constant_features", fit.constant_features},
                {"rank_deficient", fit.rank_deficient},
                {"warnings", fit.warnings}};
    std::ofstream rs(out / "fit_report.json");
    rs << report.dump(2) << "\n";
    log << "  fit on " << train_rows.size() << " records, training R2 "
        << fit.r2 << "\n";
    for (const auto& w : fit.warnings) log << "  warning: " << w << "\n";

    std::vector<std::pair<std::string, double>> preds;
    std::vector<double> yhat, ytrue;
    for (const auto& r : eval_rows) {
        const double p = predict_survival(fit.model, r);
        preds.emplace_back(r.subject_id, p);
        if (r.survival_days) {
            yhat.push_back(p);
            ytrue.push_back(*r.survival_days);
        }
    }
    save_survival_predictions((out / "predictions.csv").string(), preds);
    log << "  wrote " << preds.size() << " predictions\n";

    if (ytrue.size() >= 2) {
        const SurvivalMetrics m =
            survival_metrics(yhat, ytrue, cfg.survival_buckets[0],
                             cfg.survival_buckets[1]);
        Json mj{{"n", ytrue.size()},
                {"mse", m.mse},
                {"median_se", m.median_se},
                {"std_se", m.std_se},
                {"spearman", m.spearman},
                {"r2", m.r2},
                {"accuracy", m.accuracy},
                {"bucket_bounds", cfg.survival_buckets}};
        std::ofstream ms(out / "metrics.json");
        ms << mj.dump(2) << "\n";
        log << "  metrics: MSE " << m.mse << ", accuracy " << m.accuracy
            << ", Spearman " << m.spearman << "\n";
    } else {
        log << "  fewer than 2 held-out subjects with targets; "
               "metrics skipped\n";
    }
}

void stage_evaluate(const PipelineConfig& cfg, std::ostream& log) {
    const SubjectSplit split = split_subjects(cfg);
    if (split.eval.empty()) {
        log << "  no held-out subjects; skipping\n";
        return;
    }
    std::vector<SubjectEvaluation> evals;
    for (const auto& s : split.eval) {
        const fs::path seg =
            fs::path(cfg.output_root) / "seg" / (s.id + "_seg.nii.gz");
        require_artifact(seg, "ensemble");
        evals.push_back(evaluate_subject(s.id, load_label_map(seg.string()),
                                         load_label_map(s.labels)));
    }
    const fs::path out = fs::path(cfg.output_root) / "eval";
    write_evaluation_tables(out.string(), evals);

    for (size_t r = 0; r < kAllRegions.size(); ++r) {
        std::vector<std::optional<double>> dices;
        for (const auto& e : evals) dices.emplace_back(e.regions[r].dice);
        const MetricSummary s = summarize_metric(dices);
        log << "  Dice " << region_name(kAllRegions[r]) << ": mean "
            << (s.mean ? *s.mean : 0.0) << ", median "
            << (s.median ? *s.median : 0.0) << "\n";
    }
}

}  // namespace

const char* stage_name(Stage s) { return kStageNames[static_cast<int>(s)]; }

Stage parse_stage(const std::string& name) {
    for (int i = 0; i < 9; ++i)
        if (name == kStageNames[i]) return static_cast<Stage>(i);
    std::string known;
    for (int i = 0; i < 9; ++i) {
        if (i) known += ", ";
        known += kStageNames[i];
    }
    throw std::runtime_error("unknown stage '" + name + "' (known: " + known +
                             ")");
}

std::vector<Stage> all_stages() {
    std::vector<Stage> s;
    for (int i = 0; i < 9; ++i) s.push_back(static_cast<Stage>(i));
    return s;
}

std::vector<Stage> parse_stage_list(const std::string& csv) {
    std::vector<Stage> stages;
    std::string cur;
    const auto flush = [&] {
        cur = trim(cur);
        if (!cur.empty()) stages.push_back(parse_stage(cur));
        cur.clear();
    };
    for (char c : csv) {
        if (c == ',')
            flush();
        else
            cur += c;
    }
    flush();
    if (stages.empty()) throw std::runtime_error("empty stage list");
    for (size_t i = 1; i < stages.size(); ++i)
        if (static_cast<int>(stages[i]) <= static_cast<int>(stages[i - 1]))
            throw std::runtime_error(
                std::string("stages out of dependency order: '") +
                stage_name(stages[i]) + "' cannot follow '" +
                stage_name(stages[i - 1]) + "'");
    return stages;
}

void PipelineConfig::validate() const {
    if (data_root.empty()) throw std::runtime_error("data_root is empty");
    if (output_root.empty()) throw std::runtime_error("output_root is empty");
    if (models.empty())
        throw std::runtime_error("at least one model config is required");
    std::set<std::string> names;
    for (const auto& m : models) {
        m.validate();
        if (!names.insert(m.name).second)
            throw std::runtime_error("duplicate model name '" + m.name + "'");
    }
    schedule.validate();
    if (train_count < 0) throw std::runtime_error("train_count must be >= 0");
    if (stat_draws < 1) throw std::runtime_error("stat_draws must be >= 1");
    if (!(survival_buckets[0] > 0) ||
        !(survival_buckets[1] > survival_buckets[0]))
        throw std::runtime_error(
            "survival_buckets must be 0 < lower < upper");
    if (inference.stride < 0)
        throw std::runtime_error("inference stride must be >= 0");
    if (phantoms.count < 0)
        throw std::runtime_error("phantoms.count must be >= 0");
    if (phantoms.count > 0 && phantoms.dim < 32)
        throw std::runtime_error("phantoms.dim must be >= 32");
    preprocess.validate();
}

PipelineConfig default_pipeline_config() {
    PipelineConfig cfg;
    cfg.data_root = "data";
    cfg.output_root = "out";
    return cfg;  // member defaults already carry the published constants
}

PipelineConfig toy_pipeline_config() {
    PipelineConfig cfg;
    cfg.data_root = "toy/data";
    cfg.output_root = "toy/out";
    cfg.train_count = 10;
    cfg.stat_draws = 50;
    cfg.phantoms = {14, 32};

    ModelConfig a;
    a.name = "tiny_uniform";
    a.num_blocks = 2;
    a.patch_size = 16;
    a.base_features = 8;
    a.loss = LossType::Uniform;
    a.set_weights_from_loss();
    ModelConfig b = a;
    b.name = "tiny_weighted";
    b.loss = LossType::Weighted;
    b.set_weights_from_loss();
    cfg.models = {a, b};

    cfg.schedule.epochs = 12;
    return cfg;
}

Json to_json(const PipelineConfig& c) {
    Json models = Json::array();
    for (const auto& m : c.models) models.push_back(to_json(m));
    return Json{
        {"data_root", c.data_root},
        {"output_root", c.output_root},
        {"train_count", c.train_count},
        {"stat_draws", c.stat_draws},
        {"models", models},
        {"schedule", to_json(c.schedule)},
        {"inference",
         Json{{"stride", c.inference.stride},
              {"flip_tta", c.inference.flip_tta}}},
        {"survival_buckets", c.survival_buckets},
        {"preprocess",
         Json{{"external_stage_command", c.preprocess.external_stage_command},
              {"skip_external", c.preprocess.skip_external}}},
        {"phantoms",
         Json{{"count", c.phantoms.count}, {"dim", c.phantoms.dim}}},
        {"seeds", Json{{"phantoms", c.seeds.phantoms},
                       {"stats", c.seeds.stats},
                       {"train", c.seeds.train}}},
    };
}

PipelineConfig pipeline_config_from_json(const Json& j) {
    PipelineConfig c;
    c.data_root = j.at("data_root").get<std::string>();
    c.output_root = j.at("output_root").get<std::string>();
    c.train_count = j.value("train_count", c.train_count);
    c.stat_draws = j.value("stat_draws", c.stat_draws);
    if (j.contains("models")) {
        c.models.clear();
        for (const auto& mj : j.at("models"))
            c.models.push_back(model_config_from_json(mj));
    }
    if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("inference")) {
        const auto& i = j.at("inference");
        c.inference.stride = i.value("stride", c.inference.stride);
        c.inference.flip_tta = i.value("flip_tta", c.inference.flip_tta);
    }
    if (j.contains("survival_buckets")) {
        const auto b = j.at("survival_buckets").get<std::vector<double>>();
        if (b.size() != 2)
            throw std::runtime_error("survival_buckets must have 2 entries");
        c.survival_buckets = {b[0], b[1]};
    }
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        c.preprocess.external_stage_command =
            p.value("external_stage_command",
                    c.preprocess.external_stage_command);
        c.preprocess.skip_external =
            p.value("skip_external", c.preprocess.skip_external);
    }
    if (j.contains("phantoms")) {
        const auto& p = j.at("phantoms");
        c.phantoms.count = p.value("count", c.phantoms.count);
        c.phantoms.dim = p.value("dim", c.phantoms.dim);
    }
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        c.seeds.phantoms = s.value("phantoms", c.seeds.phantoms);
        c.seeds.stats = s.value("stats", c.seeds.stats);
        c.seeds.train = s.value("train", c.seeds.train);
    }
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    Json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": invalid JSON: " + e.what());
    }
    return pipeline_config_from_json(j);
}

void save_pipeline_config(const std::string& path, const PipelineConfig& c) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << to_json(c).dump(2) << "\n";
}

void run_pipeline(const PipelineConfig& config,
                  const std::vector<Stage>& stages, std::ostream& log) {
    config.validate();
    fs::create_directories(config.output_root);
    using clock = std::chrono::steady_clock;
    for (Stage st : stages) {
        log << "[" << stage_name(st) << "]\n";
        const auto t0 = clock::now();
        switch (st) {
            case Stage::Phantoms: stage_phantoms(config, log); break;
            case Stage::Preprocess: stage_preprocess(config, log); break;
            case Stage::Stats: stage_stats(config, log); break;
            case Stage::Train: stage_train(config, log); break;
            case Stage::Predict: stage_predict(config, log); break;
            case Stage::Ensemble: stage_ensemble(config, log); break;
            case Stage::Features: stage_features(config, log); break;
            case Stage::Survival: stage_survival(config, log); break;
            case Stage::Evaluate: stage_evaluate(config, log); break;
        }
        const double secs =
            std::chrono::duration<double>(clock::now() - t0).count();
        log << "[" << stage_name(st) << "] done in " << secs << " s\n";
    }
}

namespace {

std::string opt_field(const std::optional<double>& x) {
    return x ? format_double(*x) : std::string();
}

}  // namespace

void write_evaluation_tables(const std::string& dir,
                             const std::vector<SubjectEvaluation>& evals) {
    fs::create_directories(dir);
    const fs::path csv_path = fs::path(dir) / "segmentation.csv";
    std::ofstream os(csv_path);
    if (!os)
        throw std::runtime_error("cannot open " + csv_path.string() +
                                 " for writing");
    os << "subject_id,region,dice,hd95,sensitivity,specificity\n";
    for (const auto& e : evals)
        for (size_t r = 0; r < kAllRegions.size(); ++r) {
            const auto& m = e.regions[r];
            os << e.subject_id << "," << region_name(kAllRegions[r]) << ","
               << format_double(m.dice) << "," << opt_field(m.hd95) << ","
               << opt_field(m.sensitivity) << "," << opt_field(m.specificity)
               << "\n";
        }

    Json summary;
    for (size_t r = 0; r < kAllRegions.size(); ++r) {
        std::vector<std::optional<double>> dice_v, hd_v, sens_v, spec_v;
        for (const auto& e : evals) {
            dice_v.emplace_back(e.regions[r].dice);
            hd_v.push_back(e.regions[r].hd95);
            sens_v.push_back(e.regions[r].sensitivity);
            spec_v.push_back(e.regions[r].specificity);
        }
        const auto emit = [&](const char* metric,
                              const std::vector<std::optional<double>>& xs,
                              const char* name) {
            const MetricSummary s = summarize_metric(xs);
            Json js{{"present", s.present}, {"absent", s.absent}};
            if (s.mean) js["mean"] = *s.mean;
            if (s.median) js["median"] = *s.median;
            summary[name][metric] = js;
        };
        const char* rn = region_name(kAllRegions[r]);
        emit("dice", dice_v, rn);
        emit("hd95", hd_v, rn);
        emit("sensitivity", sens_v, rn);
        emit("specificity", spec_v, rn);

        const auto row = [&](const char* stat) {
            os << stat << "," << rn;
            for (const auto* xs : {&dice_v, &hd_v, &sens_v, &spec_v}) {
                const MetricSummary s = summarize_metric(*xs);
                const auto v = std::string(stat) == "mean" ? s.mean : s.median;
                os << "," << (v ? format_double(*v) : std::string());
            }
            os << "\n";
        };
        row("mean");
        row("median");
    }
    if (!os)
        throw std::runtime_error("write failed for " + csv_path.string());
    os.close();

    const fs::path sj_path = fs::path(dir) / "summary.json";
    std::ofstream sj(sj_path);
    sj << summary.dump(2) << "\n";
    if (!sj)
        throw std::runtime_error("write failed for " + sj_path.string());
}

}  // namespace btseg
