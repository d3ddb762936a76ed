#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "icubench/json_util.hpp"

namespace icubench::models {

enum class TaskKind { classification, regression };

// Row-major feature matrix with named columns.
struct Matrix {
    std::size_t n = 0, d = 0;
    std::vector<double> values;  // n * d
    std::vector<std::string> names;

    double at(std::size_t i, std::size_t j) const { return values[i * d + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * d + j]; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
};

enum class Penalty { l1, l2, elasticnet };

struct LogRegParams {
    double C = 1.0;  // inverse regularization strength
    Penalty penalty = Penalty::l2;
    double l1_ratio = 0.5;  // elasticnet mix
    int max_iter = 100000;
    double tol = 1e-7;
    bool balanced = false;  // class weights N / (2 N_c)
};

struct ElasticNetParams {
    double alpha = 1.0;
    double l1_ratio = 0.5;
    double tol = 1e-6;
    int max_iter = 10000;
};

struct GbtParams {
    int n_estimators = 10000;
    double learning_rate = 0.1;
    int num_leaves = 31;
    int max_depth = -1;  // -1 = unlimited
    double colsample = 1.0;
    double subsample = 1.0;
    int subsample_freq = 1;
    int min_child_samples = 1000;  // sized for large cohorts; lower it for small data
    int max_bins = 255;
    int early_stopping_rounds = 10;  // used when a validation set is given
    bool balanced = false;
    std::uint64_t seed = 0;
};

struct GbtTreeNode {
    int feature = -1;      // -1 = leaf
    int threshold_bin = 0; // go left when bin <= threshold_bin
    double threshold = 0;  // raw-value threshold for prediction
    bool missing_left = true;
    int left = -1, right = -1;
    double value = 0;      // leaf output
};

struct GbtTree {
    std::vector<GbtTreeNode> nodes;
    double predict_row(std::span<const double> x) const;
};

struct LinearModel {
    std::vector<double> coef;
    double intercept = 0;
    bool logistic = false;
};

struct GbtModel {
    std::vector<GbtTree> trees;
    double base_score = 0;
    TaskKind task = TaskKind::classification;
    double learning_rate = 0.1;
};

// Trained model with enough metadata to be persisted and re-applied elsewhere.
struct TrainedModel {
    std::string kind;  // "logreg" | "elasticnet" | "gbt_classifier" | "gbt_regressor"
    std::vector<std::string> feature_names;
    std::uint64_t seed = 0;
    int rounds_used = 0;
    int iterations_used = 0;
    LinearModel linear;
    GbtModel gbt;
    std::vector<double> objective_trace;  // per-iteration training objective; not serialized

    bool is_gbt() const { return kind == "gbt_classifier" || kind == "gbt_regressor"; }
    bool is_classifier() const { return kind == "logreg" || kind == "gbt_classifier"; }

    // classification: probability of the positive class; regression: value
    std::vector<double> predict(const Matrix& x) const;
    double predict_row(std::span<const double> x) const;

    json to_json() const;
    static TrainedModel from_json(const json& j);
    void save(const std::filesystem::path& path) const;
    static TrainedModel load(const std::filesystem::path& path);
};

TrainedModel train_logreg(const Matrix& x, std::span<const double> y, const LogRegParams& params);

TrainedModel train_elasticnet(const Matrix& x, std::span<const double> y, const ElasticNetParams& params);

// Leaf-wise histogram gradient boosting. When x_val is non-null, training stops
// early once validation loss has not improved for `early_stopping_rounds` rounds
// and the model is truncated to the best round.
TrainedModel train_gbt(const Matrix& x, std::span<const double> y, const GbtParams& params, TaskKind task,
                       const Matrix* x_val = nullptr, std::span<const double> y_val = {});

std::vector<double> class_weights(std::span<const double> y, bool balanced);

}  // namespace icubench::models
