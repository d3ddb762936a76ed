#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icubench/harmonize.hpp"
#include "icubench/json_util.hpp"

namespace icubench::synthgen {

// Deterministic synthetic ICU source-data generator. Events are planted to
// satisfy (or miss) the endpoint definitions with a configurable margin, so the
// generator's event log doubles as the labeling oracle.
struct SynthConfig {
    int n_stays = 1000;
    std::uint64_t seed = 7;

    double los_log_mean_h = std::log(48.0);
    double los_log_sd = 0.5;
    double los_min_h = 8.0, los_max_h = 240.0;

    double event_margin = 0.2;  // relative margin around definition thresholds

    double frac_aki_crea = 0.10;
    double frac_aki_urine = 0.06;
    double frac_aki_near_miss = 0.08;
    double frac_sepsis = 0.10;
    double frac_sepsis_near_miss = 0.06;
    double frac_sepsis_short_abx = 0.05;  // qualifies only with continuity disabled

    // disjoint plants for the base exclusion criteria
    int plant_age_below_18 = 8;
    int plant_missing_discharge = 7;
    int plant_short_stay = 6;
    int plant_sparse_bins = 5;
    int plant_long_gap = 9;

    double lab_skip_prob = 0.6;       // chance a scheduled lab draw is missing
    double vital_skip_prob = 0.08;    // heart rate is never skipped
    int out_of_bounds_rows = 20;      // implausible glucose rows, dropped at extraction

    double mortality_bias = -1.7;

    json to_json() const;
    static SynthConfig from_json(const json& j);
};

struct StayTruth {
    std::int64_t stay_id = 0;
    double age = 0, los_h = 0;
    std::string sex;
    std::string excluded_by;  // empty = clean stay
    double mortality_p = 0;
    int mortality_label = 0;
    std::optional<std::int64_t> aki_onset_min;
    bool aki_near_miss = false;
    std::optional<std::int64_t> sepsis_onset_min;          // default definition
    std::optional<std::int64_t> sepsis_variant_onset_min;  // continuity disabled
    bool sepsis_short_abx = false;
};

struct GroundTruth {
    std::vector<StayTruth> stays;
    std::map<std::string, int> exclusion_plan;  // criterion name -> planted count
    double mortality_ceiling_auroc = 0;         // concordance of true p against labels
    std::size_t out_of_bounds_rows = 0;

    json to_json() const;
};

struct SynthResult {
    harmonize::RawTables tables;
    harmonize::SourceConfig source_config;
    harmonize::ConceptDictionary concepts;
    GroundTruth truth;
};

SynthResult generate(const SynthConfig& config);

// generate + write raw csv tables, the bundled configs, and truth.json
void generate_to_dir(const SynthConfig& config, const std::filesystem::path& dir);

std::string bundled_source_config_json();
std::string bundled_concepts_json();
const std::vector<std::string>& dynamic_feature_names();  // the 48 model inputs

}  // namespace icubench::synthgen
