#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icubench/harmonize.hpp"
#include "icubench/json_util.hpp"
#include "icubench/labelers.hpp"

namespace icubench::cohort {

// Hourly grid for one stay: left-closed bins [h, h+1) anchored at admission,
// NaN where nothing was measured.
struct StayGrid {
    std::int64_t stay_id = 0;
    int n_bins = 0;
    std::vector<std::vector<double>> values;  // [feature][bin]
    double age = kMissing, sex = kMissing, height = kMissing, weight = kMissing;

    int bins_with_data() const;
    int longest_empty_gap() const;  // max run of fully-missing bins
};

struct StayData {
    harmonize::Stay stay;
    StayGrid grid;
    // label-support series, already stay-relative
    labelers::Series creatinine, urine, sofa;
    std::vector<labelers::AbxEvent> abx;
    std::vector<std::int64_t> cultures, rrt;
    std::optional<std::int64_t> death_min;
    bool death_event = false;
    double los_h = 0;     // grid length basis; falls back to last event when discharge is missing
    std::int64_t group = 0;  // optional grouping (e.g. hospital) for grouped exclusions
};

struct ExclusionCriterion {
    std::string name;
    std::function<bool(const StayData&)> excluded;  // pure per-stay predicate
};

struct AttritionStep {
    std::string criterion;
    std::size_t n_before = 0, n_excluded = 0, n_after = 0;
};

struct AttritionReport {
    std::vector<AttritionStep> steps;
    json to_json() const;
    static AttritionReport from_json(const json& j);
};

std::vector<ExclusionCriterion> base_exclusions();

// Applies criteria in order, recording attrition. Returns surviving indices.
std::pair<std::vector<std::size_t>, AttritionReport> apply_exclusions(
    const std::vector<ExclusionCriterion>& criteria, const std::vector<StayData>& stays);

// Grid building for one stay from per-concept event slices.
StayGrid build_stay_grid(const std::vector<const harmonize::EventTable*>& events,
                         const harmonize::Stay& stay, double los_h,
                         const std::vector<harmonize::Aggregate>& aggregates,
                         const std::vector<std::string>& feature_names);

struct Roles {
    std::string group = "stay_id";
    std::string sequence = "time";
    std::string label = "label";
    std::vector<std::string> dynamic;
    std::vector<std::string> statics;

    json to_json() const;
    static Roles from_json(const json& j);
};

struct CohortBundle {
    Frame sta;   // stay_id, age, sex, height, weight
    Frame dyn;   // stay_id, time, <dynamic features>
    Frame outc;  // stay_id[, time], label
    Roles vars;

    void validate() const;
};

void write_cohort(const CohortBundle& bundle, const std::filesystem::path& dir);
CohortBundle read_cohort(const std::filesystem::path& dir);

struct TaskOptions {
    std::string id;    // mortality | aki | sepsis | kidney_function | los
    std::string name;  // display name for logs; defaults to id
    labelers::HourlyLabelParams hourly;
    labelers::SepsisDefinition sepsis;
    bool kdigo_ordinal = false;
    double observation_h = 24.0;  // once-per-stay input window
    bool exclude_groups_without_positives = false;
    double mortality_min_los_h = 30.0;
    bool is_hourly() const;
    bool is_regression() const;
};

struct TaskCohort {
    CohortBundle bundle;
    AttritionReport attrition;
    std::vector<std::int64_t> stay_ids;
};

// Full extraction pipeline for one task: grids, base + task exclusions, labels, bundle.
TaskCohort build_task_cohort(const harmonize::RawTables& raw, const harmonize::SourceConfig& cfg,
                             const harmonize::ConceptDictionary& dict, const std::string& dataset,
                             const TaskOptions& task,
                             const std::vector<std::string>& dynamic_features);

// Assemble per-stay data (grids + label series) without applying exclusions.
std::vector<StayData> assemble_stays(const harmonize::RawTables& raw, const harmonize::SourceConfig& cfg,
                                     const harmonize::ConceptDictionary& dict, const std::string& dataset,
                                     const std::vector<std::string>& dynamic_features);

std::vector<ExclusionCriterion> task_exclusions(const TaskOptions& task,
                                                const std::map<std::int64_t, labelers::TaskLabels>& labels,
                                                const std::vector<StayData>& stays);

std::map<std::int64_t, labelers::TaskLabels> compute_labels(const TaskOptions& task,
                                                            const std::vector<StayData>& stays,
                                                            bool dataset_records_mortality);

// value used for the sex column: 1 for female codes, 0 otherwise
double code_sex(const std::string& raw);

}  // namespace icubench::cohort
