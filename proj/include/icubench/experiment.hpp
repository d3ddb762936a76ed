#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "icubench/cohort.hpp"
#include "icubench/metrics.hpp"
#include "icubench/models.hpp"
#include "icubench/recipes.hpp"
#include "icubench/tuner.hpp"

namespace icubench::experiment {

struct CvConfig {
    int folds = 5;
    int repetitions = 5;
    int folds_to_tune = 3;
    int n_init = 10;
    int n_calls = 50;
};

struct PreprocessConfig {
    bool generate_features = true;  // expanding-window history stats
    bool scaling = true;
    bool use_static = true;
};

struct ExperimentConfig {
    std::string data_dir;
    std::string dataset_name = "dataset";
    cohort::TaskOptions task;  // task.id required
    std::string model = "logreg";
    json hyperparams = json::object();
    json space = json::object();  // tuning space override
    bool tune = false;
    CvConfig cv;
    PreprocessConfig preprocess;
    json recipe;  // explicit step list; null = default chain
    std::uint64_t seed = 0;
    std::string log_dir = "logs";
    int workers = 1;
    std::vector<std::string> pool_dirs;  // extra cohorts for pooled training
    std::int64_t pool_size = 0;          // stays per cohort; 0 = size of the smallest
    std::string checkpoint;              // previous results.json to reuse tuned hyperparameters
    bool load_cache = false, generate_cache = false;

    json to_json() const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
json default_space(const std::string& model_kind);

bool is_classification(const cohort::TaskOptions& task);

struct FoldResult {
    int repetition = 0;
    int fold = 0;
    std::map<std::string, double> metrics;
    std::map<std::string, std::vector<metrics::CurvePoint>> curves;
};

struct ResultRecord {
    json config;
    std::vector<FoldResult> folds;
    std::map<std::string, metrics::MeanStd> aggregate;
    cohort::AttritionReport attrition;
    double wall_clock_s = 0;
    std::filesystem::path output_dir;  // set when persisted

    json to_json() const;
};

// Rows ready for model training: features in role order (statics first) with a
// parallel label vector. `sex` carries the raw (unscaled) sex code per row for
// group-fairness metrics; empty when unavailable.
struct ModelData {
    models::Matrix x;
    std::vector<double> y;
    std::vector<std::int64_t> stays;
    std::vector<double> sex;
};

ModelData make_model_data(const cohort::CohortBundle& transformed, const cohort::CohortBundle& raw,
                          bool use_static);
cohort::CohortBundle bundle_subset(const cohort::CohortBundle& bundle,
                                   const std::vector<std::int64_t>& ids);

models::TrainedModel train_model(const std::string& kind, const json& hp, bool classification,
                                 std::uint64_t seed, const ModelData& train, const ModelData* val);

// Full protocol: optional Bayesian tuning on the first repetition's first
// folds_to_tune folds, then fit/evaluate on every (repetition, fold) cell and
// persist results + per-fold artifacts under the log directory.
ResultRecord run_train(const ExperimentConfig& config);

// Evaluate previously trained models on this config's dataset without
// refitting; preprocessing statistics come from the source fit.
ResultRecord run_evaluate(const ExperimentConfig& config, const std::string& source_dir,
                          const std::string& source_name);

// Raw-tables-to-cohort step, shared by the cli extract command and the
// end-to-end train path.
cohort::TaskCohort extract_cohort(const std::filesystem::path& raw_dir, const ExperimentConfig& config);

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace icubench::experiment
