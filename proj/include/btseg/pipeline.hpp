// pipeline.hpp -- stage orchestration: artifacts, dependencies, resumption.
//
// Stage order and artifacts under output_root:
//   phantoms   -> <data_root>/<id>/... + <data_root>/clinical.csv
//   preprocess -> preproc/<id>.nii.gz            (fused, normalized, 4D)
//   stats      -> stats/channel_stats_p<N>.json  (per distinct patch size)
//   train      -> models/<name>.ckpt, models/<name>_loss.csv
//   predict    -> probs/<id>/<name>.nii.gz       (held-out subjects)
//   ensemble   -> seg/<id>_seg.nii.gz
//   features   -> features/{train,eval}_features.csv
//   survival   -> survival/{model.json,fit_report.json,predictions.csv,
//                           metrics.json}
//   evaluate   -> eval/{segmentation.csv,summary.json}
#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "btseg/config_json.hpp"
#include "btseg/eval_metrics.hpp"
#include "btseg/model_config.hpp"
#include "btseg/preprocess.hpp"

namespace btseg {

enum class Stage {
    Phantoms = 0,
    Preprocess,
    Stats,
    Train,
    Predict,
    Ensemble,
    Features,
    Survival,
    Evaluate,
};

const char* stage_name(Stage s);
Stage parse_stage(const std::string& name);
std::vector<Stage> all_stages();
// Comma-separated list; must respect the canonical dependency order.
std::vector<Stage> parse_stage_list(const std::string& csv);

struct PhantomStageConfig {
    int count = 0;  // 0 disables the stage
    int dim = 64;
};

struct InferenceStageConfig {
    int stride = 0;  // 0 -> window/2
    bool flip_tta = true;
};

struct PipelineSeeds {
    uint64_t phantoms = 101;
    uint64_t stats = 202;
    uint64_t train = 303;
};

struct PipelineConfig {
    std::string data_root;
    std::string output_root;
    int train_count = 0;  // first K sorted subjects train; 0 -> all
    int stat_draws = 400;
    std::vector<ModelConfig> models = standard_model_configs();
    TrainSchedule schedule;
    InferenceStageConfig inference;
    std::array<double, 2> survival_buckets{300.0, 450.0};
    PreprocessConfig preprocess;
    PhantomStageConfig phantoms;
    PipelineSeeds seeds;

    void validate() const;
};

// The published configuration: six models, 640 epochs, lr 5e-4, batch 1,
// dropout 0.5, 400 statistic draws, foreground weight 2 where applicable.
PipelineConfig default_pipeline_config();

// A desk-scale configuration that exercises every stage in minutes.
PipelineConfig toy_pipeline_config();

Json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const Json& j);
PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const std::string& path, const PipelineConfig& c);

void run_pipeline(const PipelineConfig& config,
                  const std::vector<Stage>& stages, std::ostream& log);

// Writes <dir>/segmentation.csv (per-subject rows plus mean/median rows)
// and <dir>/summary.json. Shared by the evaluate stage and subcommand.
void write_evaluation_tables(const std::string& dir,
                             const std::vector<SubjectEvaluation>& evals);

}  // namespace btseg
