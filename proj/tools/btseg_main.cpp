// btseg_main.cpp -- command-line front end for the segmentation + survival
// pipeline. `btseg run --toy` exercises every stage on generated phantoms.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "btseg/checkpoint.hpp"
#include "btseg/dataset.hpp"
#include "btseg/ensemble.hpp"
#include "btseg/inference.hpp"
#include "btseg/phantom.hpp"
#include "btseg/pipeline.hpp"
#include "btseg/radiomics_survival.hpp"
#include "btseg/text_io.hpp"
#include "btseg/train.hpp"
#include "btseg/volume_io.hpp"

namespace fs = std::filesystem;
using namespace btseg;

namespace {

MultiModalVolume load_fused_subject(const std::string& subject_dir,
                                    const PreprocessConfig& pre,
                                    const std::string& staging_dir) {
    const SubjectPaths s = locate_subject(subject_dir,
                                          /*require_labels=*/false);
    std::array<ScalarVolume, 4> raw;
    for (int c = 0; c < 4; ++c) {
        std::string src = s.contrasts[c];
        if (!pre.skip_external) {
            fs::create_directories(staging_dir);
            const std::string staged =
                (fs::path(staging_dir) /
                 (s.id + "_" + contrast_name(kContrastOrder[c]) + ".nii.gz"))
                    .string();
            run_external_stage(pre, src, staged);
            src = staged;
        }
        raw[c] = load_scalar_volume(src, kContrastOrder[c]);
    }
    return fuse_contrasts(minmax_normalize(raw[0]), minmax_normalize(raw[1]),
                          minmax_normalize(raw[2]), minmax_normalize(raw[3]));
}

int cmd_phantoms(const std::string& out, int count, int dim, uint64_t seed) {
    generate_phantoms({count, dim, seed}, out);
    std::cout << "wrote " << count << " subjects to " << out << "\n";
    return 0;
}

int cmd_preprocess(const std::string& subject_dir, const std::string& out,
                   const PreprocessConfig& pre) {
    const auto staging = (fs::path(out).parent_path() / "external").string();
    const MultiModalVolume fused = load_fused_subject(subject_dir, pre,
                                                      staging);
    save_multimodal_volume(fused, out);
    std::cout << out << " (" << shape_string(fused.spatial_shape()) << ")\n";
    return 0;
}

int cmd_sample_stats(const std::string& data_root, int patch, int draws,
                     uint64_t seed, const std::string& out) {
    const auto paths = discover_subjects(data_root, /*require_labels=*/true);
    std::vector<MultiModalVolume> volumes;
    std::vector<LabelMap> labels;
    std::vector<SamplingWeights> weights;
    for (const auto& p : paths) {
        auto raw = load_contrast_volumes(p);
        volumes.push_back(fuse_contrasts(
            minmax_normalize(raw[0]), minmax_normalize(raw[1]),
            minmax_normalize(raw[2]), minmax_normalize(raw[3])));
        labels.push_back(load_label_map(p.labels));
        weights.push_back(
            compute_sampling_weights(volumes.back(), labels.back(), patch));
    }
    std::vector<SamplerSubject> subjects(paths.size());
    for (size_t i = 0; i < paths.size(); ++i)
        subjects[i] = {&volumes[i], &labels[i], &weights[i]};
    Rng rng(seed);
    const ChannelStats stats =
        estimate_channel_stats(subjects, patch, draws, rng);
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot open " + out + " for writing");
    os << to_json(stats).dump(2) << "\n";
    std::cout << "channel stats over " << draws << " draws -> " << out
              << "\n";
    return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& subject_dir,
                const std::string& out, int stride, bool no_flip) {
    Checkpoint ck;
    auto model = load_checkpoint(ckpt, ck);
    const MultiModalVolume vol =
        load_fused_subject(subject_dir, PreprocessConfig{}, "");
    const SlidingPlan plan =
        plan_windows(vol.spatial_shape(), ck.config.patch_size, stride);
    const UNetPredictor predictor(*model, ck.stats);
    const ProbabilityMap pm =
        predict_volume(vol, predictor, plan, !no_flip);
    save_probability_map(pm, out);
    std::cout << out << " (" << plan.window_count() << " windows, "
              << (no_flip ? "no mirror averaging" : "mirror averaging")
              << ")\n";
    return 0;
}

int cmd_ensemble(const std::vector<std::string>& prob_files,
                 const std::string& out) {
    std::vector<ProbabilityMap> maps;
    maps.reserve(prob_files.size());
    for (const auto& p : prob_files)
        maps.push_back(load_probability_map(p));
    const LabelMap seg = argmax_labels(average_probabilities(maps));
    save_label_map(seg, out);
    std::cout << out << " (" << maps.size() << " models)\n";
    return 0;
}

int cmd_features(const std::string& labels_path, const std::string& out) {
    const LabelMap lm = load_label_map(labels_path);
    const auto f = extract_features(lm);
    std::ostringstream row;
    row << "v1,s1,v2,s2,v3,s3\n";
    for (size_t i = 0; i < f.size(); ++i)
        row << (i ? "," : "") << format_double(f[i]);
    row << "\n";
    if (out.empty()) {
        std::cout << row.str();
    } else {
        std::ofstream os(out);
        if (!os)
            throw std::runtime_error("cannot open " + out + " for writing");
        os << row.str();
        std::cout << out << "\n";
    }
    return 0;
}

int cmd_survival_fit(const std::string& features, const std::string& out,
                     const std::string& report_path) {
    const auto rows = read_feature_table(features);
    const SurvivalFit fit = fit_survival(rows);
    save_survival_model(out, fit.model);
    std::cout << "fit on " << rows.size() << " records, training R2 "
              << fit.r2 << " -> " << out << "\n";
    for (const auto& w : fit.warnings) std::cout << "warning: " << w << "\n";
    if (!report_path.empty()) {
        Json report{{"r2", fit.r2},
                    {"constant_features", fit.constant_features},
                    {"rank_deficient", fit.rank_deficient},
                    {"warnings", fit.warnings}};
        std::ofstream os(report_path);
        os << report.dump(2) << "\n";
    }
    return 0;
}

int cmd_survival_predict(const std::string& model_path,
                         const std::string& features,
                         const std::string& out) {
    const SurvivalModel model = load_survival_model(model_path);
    const auto rows = read_feature_table(features);
    std::vector<std::pair<std::string, double>> preds;
    for (const auto& r : rows)
        preds.emplace_back(r.subject_id, predict_survival(model, r));
    save_survival_predictions(out, preds);
    std::cout << preds.size() << " predictions -> " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& truth_root,
                 const std::string& out_dir) {
    const auto subjects = discover_subjects(truth_root,
                                            /*require_labels=*/true);
    std::vector<SubjectEvaluation> evals;
    for (const auto& s : subjects) {
        const fs::path pred = fs::path(pred_dir) / (s.id + "_seg.nii.gz");
        if (!fs::exists(pred))
            throw std::runtime_error("missing prediction " + pred.string());
        evals.push_back(evaluate_subject(s.id, load_label_map(pred.string()),
                                         load_label_map(s.labels)));
    }
    write_evaluation_tables(out_dir, evals);
    for (size_t r = 0; r < kAllRegions.size(); ++r) {
        std::vector<std::optional<double>> dices;
        for (const auto& e : evals) dices.emplace_back(e.regions[r].dice);
        const MetricSummary s = summarize_metric(dices);
        std::cout << "Dice " << region_name(kAllRegions[r]) << ": mean "
                  << (s.mean ? *s.mean : 0.0) << ", median "
                  << (s.median ? *s.median : 0.0) << " (n=" << s.present
                  << ")\n";
    }
    std::cout << "tables -> " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D U-Net brain-tumor segmentation and radiomic survival "
                 "prediction"};
    app.require_subcommand(1);

    // phantoms
    std::string ph_out = "data";
    int ph_count = 8, ph_dim = 64;
    uint64_t ph_seed = 1234;
    auto* ph = app.add_subcommand("phantoms",
                                  "Generate a synthetic phantom dataset");
    ph->add_option("--out", ph_out, "Output dataset root")->required();
    ph->add_option("--count", ph_count, "Number of subjects");
    ph->add_option("--dim", ph_dim, "Cubic volume side (>= 32)");
    ph->add_option("--seed", ph_seed, "Generator seed");

    // preprocess
    std::string pp_subject, pp_out, pp_cmd;
    bool pp_run_external = false;
    auto* pp = app.add_subcommand(
        "preprocess", "Normalize and fuse one subject's contrasts");
    pp->add_option("--subject", pp_subject, "Subject directory")->required();
    pp->add_option("--out", pp_out, "Fused 4D output file")->required();
    pp->add_option("--external-cmd", pp_cmd,
                   "Bias-correction command with {in}/{out} placeholders");
    pp->add_flag("--run-external", pp_run_external,
                 "Run the external command (default: skip/copy-through)");

    // sample-stats
    std::string ss_data, ss_out = "channel_stats.json";
    int ss_patch = 64, ss_draws = 400;
    uint64_t ss_seed = 202;
    auto* ss = app.add_subcommand(
        "sample-stats",
        "Estimate per-channel mean/std over random training patches");
    ss->add_option("--data", ss_data, "Dataset root")->required();
    ss->add_option("--patch", ss_patch, "Patch size");
    ss->add_option("--draws", ss_draws, "Number of sampled patches");
    ss->add_option("--seed", ss_seed, "Sampler seed");
    ss->add_option("--out", ss_out, "Output JSON");

    // train
    std::string tr_config, tr_model;
    auto* tr = app.add_subcommand(
        "train", "Train the configured models (expects preprocess/stats "
                 "artifacts)");
    tr->add_option("--config", tr_config, "Pipeline config JSON")->required();
    tr->add_option("--model", tr_model, "Train only this model name");

    // predict
    std::string pr_model, pr_subject, pr_out;
    int pr_stride = 0;
    bool pr_no_flip = false;
    auto* pr = app.add_subcommand(
        "predict", "Sliding-window probabilities for one subject");
    pr->add_option("--model", pr_model, "Model checkpoint")->required();
    pr->add_option("--subject", pr_subject, "Subject directory")->required();
    pr->add_option("--out", pr_out, "Probability map output")->required();
    pr->add_option("--stride", pr_stride, "Window stride (0 = window/2)");
    pr->add_flag("--no-flip-tta", pr_no_flip,
                 "Disable left-right mirror averaging");

    // ensemble
    std::vector<std::string> en_probs;
    std::string en_out;
    auto* en = app.add_subcommand(
        "ensemble", "Average probability maps and write the label map");
    en->add_option("--out", en_out, "Label output file")->required();
    en->add_option("probs", en_probs, "Probability map files")
        ->required()
        ->expected(-1);

    // features
    std::string fe_labels, fe_out;
    auto* fe = app.add_subcommand(
        "features", "Per-class volume/surface features of a label map");
    fe->add_option("--labels", fe_labels, "Label map file")->required();
    fe->add_option("--out", fe_out, "Output CSV (default: stdout)");

    // survival-fit
    std::string sf_features, sf_out = "survival_model.json", sf_report;
    auto* sf = app.add_subcommand("survival-fit",
                                  "Fit the linear survival model");
    sf->add_option("--features", sf_features, "Feature table CSV")
        ->required();
    sf->add_option("--out", sf_out, "Model JSON output");
    sf->add_option("--report", sf_report, "Fit report JSON output");

    // survival-predict
    std::string sp_model, sp_features, sp_out = "predictions.csv";
    auto* sp = app.add_subcommand("survival-predict",
                                  "Apply a fitted survival model");
    sp->add_option("--model", sp_model, "Model JSON")->required();
    sp->add_option("--features", sp_features, "Feature table CSV")
        ->required();
    sp->add_option("--out", sp_out, "Predictions CSV output");

    // evaluate
    std::string ev_pred, ev_truth, ev_out = "eval";
    auto* ev = app.add_subcommand(
        "evaluate", "Dice/HD95/sensitivity/specificity per region");
    ev->add_option("--pred", ev_pred, "Directory of <id>_seg.nii.gz files")
        ->required();
    ev->add_option("--truth", ev_truth, "Dataset root with ground truth")
        ->required();
    ev->add_option("--out", ev_out, "Output directory for tables");

    // run
    std::string rn_config, rn_stages;
    bool rn_toy = false, rn_print = false;
    int rn_jobs = 1;
    auto* rn = app.add_subcommand("run", "Run pipeline stages end to end");
    rn->add_option("--config", rn_config, "Pipeline config JSON");
    rn->add_flag("--toy", rn_toy,
                 "Use the built-in desk-scale configuration");
    rn->add_option("--stages", rn_stages,
                   "Comma-separated stage subset, dependency order");
    rn->add_flag("--print-config", rn_print,
                 "Print the canonical config (with --toy: the toy config)");
    rn->add_option("--jobs", rn_jobs,
                   "Worker limit (deterministic build runs serially)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ph->parsed())
            return cmd_phantoms(ph_out, ph_count, ph_dim, ph_seed);
        if (pp->parsed()) {
            PreprocessConfig pre;
            pre.external_stage_command = pp_cmd;
            pre.skip_external = !pp_run_external;
            return cmd_preprocess(pp_subject, pp_out, pre);
        }
        if (ss->parsed())
            return cmd_sample_stats(ss_data, ss_patch, ss_draws, ss_seed,
                                    ss_out);
        if (tr->parsed()) {
            PipelineConfig cfg = load_pipeline_config(tr_config);
            if (!tr_model.empty()) {
                std::vector<ModelConfig> kept;
                for (const auto& m : cfg.models)
                    if (m.name == tr_model) kept.push_back(m);
                if (kept.empty())
                    throw std::runtime_error("no model named '" + tr_model +
                                             "' in " + tr_config);
                cfg.models = kept;
            }
            run_pipeline(cfg, {Stage::Train}, std::cout);
            return 0;
        }
        if (pr->parsed())
            return cmd_predict(pr_model, pr_subject, pr_out, pr_stride,
                               pr_no_flip);
        if (en->parsed()) return cmd_ensemble(en_probs, en_out);
        if (fe->parsed()) return cmd_features(fe_labels, fe_out);
        if (sf->parsed())
            return cmd_survival_fit(sf_features, sf_out, sf_report);
        if (sp->parsed())
            return cmd_survival_predict(sp_model, sp_features, sp_out);
        if (ev->parsed()) return cmd_evaluate(ev_pred, ev_truth, ev_out);
        if (rn->parsed()) {
            if (rn_print) {
                const PipelineConfig cfg = rn_toy ? toy_pipeline_config()
                                                  : default_pipeline_config();
                std::cout << to_json(cfg).dump(2) << "\n";
                return 0;
            }
            PipelineConfig cfg;
            if (rn_toy && rn_config.empty())
                cfg = toy_pipeline_config();
            else if (!rn_config.empty())
                cfg = load_pipeline_config(rn_config);
            else
                throw std::runtime_error(
                    "run: provide --config FILE or --toy");
            if (rn_jobs != 1)
                std::cout << "note: --jobs " << rn_jobs
                          << " requested; this build runs stages serially "
                             "for bit-reproducible artifacts\n";
            const auto stages = rn_stages.empty() ? all_stages()
                                                  : parse_stage_list(rn_stages);
            run_pipeline(cfg, stages, std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
