#pragma once

#include <memory>
#include <string>
#include <vector>

#include "icubench/cohort.hpp"
#include "icubench/json_util.hpp"

namespace icubench::recipes {

// Ordered preprocessing steps with fit-on-train / apply-anywhere semantics.
// Step kinds: scale, missing_indicator, forward_fill, mean_impute,
// hist_aggregate, resample.
struct StepConfig {
    std::string kind;
    json params = json::object();
};

struct Recipe {
    std::vector<StepConfig> steps;

    json to_json() const;
    static Recipe from_json(const json& j);
};

// Default chains. Classical models get expanding-window history aggregates;
// every chain ends with indicators -> forward fill -> train-mean imputation
// (and scaling unless disabled).
Recipe default_recipe(bool generate_features, bool scaling = true);

struct FittedStep {
    std::string kind;
    json params;
    json stats;  // learned on the fit split only
};

struct FittedRecipe {
    cohort::Roles roles;
    std::vector<FittedStep> steps;

    json to_json() const;
    static FittedRecipe from_json(const json& j);
};

FittedRecipe fit(const Recipe& recipe, const cohort::CohortBundle& train);
cohort::CohortBundle apply(const FittedRecipe& fitted, const cohort::CohortBundle& bundle);

// scale inversion for round-trip checks and reporting in raw units
cohort::CohortBundle inverse_scale(const FittedRecipe& fitted, const cohort::CohortBundle& bundle);

}  // namespace icubench::recipes
