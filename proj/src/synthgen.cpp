#include "icubench/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "icubench/metrics.hpp"

namespace icubench::synthgen {

namespace {

constexpr std::int64_t H = 60;

struct FeatureSpec {
    const char* name;
    const char* unit;
    double mean, between_sd, within_sd, lo, hi;
    int interval_h;
};

// the 48 time-varying model inputs; heart rate doubles as the keepalive signal
const FeatureSpec kFeatures[] = {
    {"sbp", "mmHg", 120, 15, 6, 40, 250, 1},
    {"dbp", "mmHg", 65, 10, 4, 20, 150, 1},
    {"hr", "beats/minute", 80, 12, 3, 20, 220, 1},
    {"map", "mmHg", 78, 10, 3, 20, 180, 1},
    {"o2sat", "%", 96, 1.5, 0.8, 50, 100, 1},
    {"resp", "breaths/minute", 17, 4, 1, 4, 60, 1},
    {"temp", "C", 36.9, 0.4, 0.15, 32, 42, 1},
    {"alb", "g/dL", 3.1, 0.5, 0.1, 1, 6, 8},
    {"alp", "IU/L", 90, 30, 8, 10, 1200, 8},
    {"alt", "IU/L", 35, 15, 5, 5, 5000, 8},
    {"ast", "IU/L", 40, 18, 6, 5, 5000, 8},
    {"be", "mmol/L", 0, 3, 1, -25, 25, 4},
    {"bicar", "mmol/L", 24, 3, 1, 5, 50, 4},
    {"bili", "mg/dL", 0.8, 0.3, 0.08, 0.1, 30, 8},
    {"bili_dir", "mg/dL", 0.3, 0.1, 0.03, 0.01, 20, 8},
    {"bnd", "%", 5, 3, 1, 0, 50, 8},
    {"bun", "mg/dL", 22, 8, 2, 2, 150, 6},
    {"ca", "mg/dL", 8.6, 0.5, 0.15, 4, 15, 6},
    {"cai", "mmol/L", 1.15, 0.08, 0.02, 0.5, 2, 6},
    {"crea", "mg/dL", 0.9, 0.15, 0.02, 0.1, 15, 4},
    {"ck", "IU/L", 180, 80, 20, 10, 10000, 8},
    {"ckmb", "ng/mL", 3, 1.5, 0.5, 0, 500, 8},
    {"cl", "mmol/L", 104, 3, 1, 70, 140, 6},
    {"pco2", "mmHg", 40, 6, 2, 10, 120, 4},
    {"crp", "mg/L", 60, 35, 10, 0, 500, 8},
    {"fgn", "mg/dL", 350, 80, 20, 50, 1000, 8},
    {"glu", "mg/dL", 130, 30, 10, 20, 1000, 2},
    {"hgb", "g/dL", 10.5, 1.5, 0.3, 3, 20, 6},
    {"inr_pt", "-", 1.2, 0.2, 0.05, 0.5, 12, 8},
    {"lact", "mmol/L", 2.0, 0.7, 0.15, 0.2, 20, 4},
    {"lymph", "%", 15, 6, 2, 0, 80, 8},
    {"mch", "pg", 30, 2, 0.5, 15, 45, 8},
    {"mchc", "%", 33, 1.5, 0.4, 20, 45, 8},
    {"mcv", "fL", 90, 5, 1, 60, 130, 8},
    {"methb", "%", 1, 0.4, 0.1, 0, 30, 8},
    {"mg", "mg/dL", 2.0, 0.25, 0.07, 0.5, 5, 6},
    {"neut", "%", 75, 8, 2, 0, 100, 8},
    {"po2", "mmHg", 95, 20, 8, 20, 600, 4},
    {"ptt", "sec", 35, 8, 2, 10, 200, 8},
    {"ph", "-", 7.38, 0.05, 0.015, 6.8, 7.8, 4},
    {"phos", "mg/dL", 3.5, 0.8, 0.2, 0.5, 12, 6},
    {"plt", "1000/uL", 220, 70, 15, 5, 1500, 8},
    {"k", "mmol/L", 4.1, 0.4, 0.1, 1.5, 9, 4},
    {"na", "mmol/L", 139, 3, 1, 110, 175, 4},
    {"tnt", "ng/mL", 0.05, 0.03, 0.01, 0, 50, 8},
    {"wbc", "1000/uL", 10, 3, 1, 0.1, 100, 6},
    {"fio2", "%", 40, 10, 3, 21, 100, 2},
    {"urine", "mL", 0, 0, 0, 0, 4000, 1},  // generated by the urine-rate model
};
constexpr std::size_t kNumFeatures = sizeof(kFeatures) / sizeof(kFeatures[0]);

// mortality signal: weights on the standardized stay-level offsets
struct SignalWeight {
    const char* feature;
    double weight;
};
const SignalWeight kMortalityWeights[] = {
    {"hr", 1.2}, {"lact", 1.0}, {"map", -1.0}, {"resp", 0.8},
};
constexpr double kAgeWeight = 0.6;

int feature_index(const std::string& name) {
    for (std::size_t i = 0; i < kNumFeatures; ++i)
        if (name == kFeatures[i].name) return static_cast<int>(i);
    return -1;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct StayPlan {
    std::int64_t stay_id = 0, patient_id = 0;
    double admit_abs_min = 0;
    double los_h = 0;
    bool missing_discharge = false;
    double age = 0, height = 0, weight = 0;
    bool height_missing = false, weight_missing = false;
    std::string sex;
    std::string excluded_by;

    bool sparse_bins_plant = false, long_gap_plant = false;

    enum class AkiKind { none, crea, urine, near_miss } aki = AkiKind::none;
    int aki_onset_h = 0;  // crea route: first elevated sample; urine route: suppression start + 6
    int urine_low_start_h = 0;
    double crea_base = 0.9;

    enum class SepsisKind { none, chain, prescription, short_abx, near_miss_sofa, near_miss_window };
    SepsisKind sepsis = SepsisKind::none;
    int sepsis_onset_h = 0;
    int sofa_base = 2;

    double mortality_p = 0;
    bool died = false;
};

}  // namespace

const std::vector<std::string>& dynamic_feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (std::size_t i = 0; i < kNumFeatures; ++i) v.emplace_back(kFeatures[i].name);
        return v;
    }();
    return names;
}

std::string bundled_source_config_json() {
    json cols_stays = {
        {"stay_id", {{"name", "stay_id"}, {"spec", "col_integer"}}},
        {"patient_id", {{"name", "patient_id"}, {"spec", "col_integer"}}},
        {"admit_min", {{"name", "admit_min"}, {"spec", "col_double"}}},
        {"discharge_min", {{"name", "discharge_min"}, {"spec", "col_double"}}},
        {"age", {{"name", "age"}, {"spec", "col_double"}}},
        {"sex", {{"name", "sex"}, {"spec", "col_character"}}},
        {"height", {{"name", "height"}, {"spec", "col_double"}}},
        {"weight_g", {{"name", "weight_g"}, {"spec", "col_double"}}},
    };
    json cfg = {
        {"name", "synth"},
        {"id_cfg",
         {{"patient",
           {{"id", "patient_id"},
            {"position", 1},
            {"start", "admit_min"},
            {"end", "discharge_min"},
            {"table", "stays"}}},
          {"icustay",
           {{"id", "stay_id"},
            {"position", 2},
            {"start", "admit_min"},
            {"end", "discharge_min"},
            {"table", "stays"}}}}},
        {"tables",
         {{"stays", {{"files", "stays.csv"}, {"cols", cols_stays}}},
          {"observations",
           {{"files", "observations.csv"},
            {"defaults", {{"index_var", "time_min"}}},
            {"cols",
             {{"stay_id", {{"name", "stay_id"}, {"spec", "col_integer"}}},
              {"time_min", {{"name", "time_min"}, {"spec", "col_double"}}},
              {"itemid", {{"name", "itemid"}, {"spec", "col_integer"}}},
              {"value", {{"name", "value"}, {"spec", "col_double"}}}}}}},
          {"urine_output",
           {{"files", "urine_output.csv"},
            {"defaults", {{"index_var", "time_min"}}},
            {"cols",
             {{"stay_id", {{"name", "stay_id"}, {"spec", "col_integer"}}},
              {"time_min", {{"name", "time_min"}, {"spec", "col_double"}}},
              {"volume_ml", {{"name", "volume_ml"}, {"spec", "col_double"}}}}}}},
          {"scores",
           {{"files", "scores.csv"},
            {"defaults", {{"index_var", "time_min"}}},
            {"cols",
             {{"stay_id", {{"name", "stay_id"}, {"spec", "col_integer"}}},
              {"time_min", {{"name", "time_min"}, {"spec", "col_double"}}},
              {"score_name", {{"name", "score_name"}, {"spec", "col_character"}}},
              {"value", {{"name", "value"}, {"spec", "col_double"}}}}}}},
          {"medications",
           {{"files", "medications.csv"},
            {"defaults", {{"index_var", "time_min"}}},
            {"cols",
             {{"stay_id", {{"name", "stay_id"}, {"spec", "col_integer"}}},
              {"time_min", {{"name", "time_min"}, {"spec", "col_double"}}},
              {"drug", {{"name", "drug"}, {"spec", "col_character"}}},
              {"duration_h", {{"name", "duration_h"}, {"spec", "col_double"}}}}}}},
          {"cultures",
           {{"files", "cultures.csv"},
            {"defaults", {{"index_var", "time_min"}}},
            {"cols",
             {{"stay_id", {{"name", "stay_id"}, {"spec", "col_integer"}}},
              {"time_min", {{"name", "time_min"}, {"spec", "col_double"}}},
              {"site", {{"name", "site"}, {"spec", "col_character"}}}}}}},
          {"death_events",
           {{"files", "death_events.csv"},
            {"defaults", {{"index_var", "time_min"}}},
            {"cols",
             {{"stay_id", {{"name", "stay_id"}, {"spec", "col_integer"}}},
              {"time_min", {{"name", "time_min"}, {"spec", "col_double"}}},
              {"flag", {{"name", "flag"}, {"spec", "col_double"}}}}}}},
          {"lab_history",
           {{"files", "lab_history.csv"},
            {"defaults", {{"index_var", "time_min"}}},
            {"cols",
             {{"patient_id", {{"name", "patient_id"}, {"spec", "col_integer"}}},
              {"time_min", {{"name", "time_min"}, {"spec", "col_double"}}},
              {"itemid", {{"name", "itemid"}, {"spec", "col_integer"}}},
              {"value", {{"name", "value"}, {"spec", "col_double"}}}}}}}}}};
    return cfg.dump(2);
}

std::string bundled_concepts_json() {
    json dict = json::object();
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const auto& f = kFeatures[i];
        json def;
        def["description"] = std::string(f.name);
        def["category"] = f.interval_h == 1 ? "vitals" : "chemistry";
        def["unit"] = f.unit;
        def["min"] = f.lo;
        def["max"] = f.hi;
        if (std::string(f.name) == "urine") {
            def["aggregate"] = "sum";
            def["sources"] = {{"synth", {{{"table", "urine_output"}, {"value_var", "volume_ml"}}}}};
        } else {
            def["aggregate"] = "mean";
            json items = json::array();
            items.push_back({{"table", "observations"},
                             {"sub_var", "itemid"},
                             {"ids", {1000 + static_cast<int>(i)}},
                             {"value_var", "value"}});
            if (std::string(f.name) == "crea")
                items.push_back({{"table", "lab_history"},
                                 {"sub_var", "itemid"},
                                 {"ids", {1000 + static_cast<int>(i)}},
                                 {"value_var", "value"}});
            def["sources"] = {{"synth", items}};
        }
        dict[f.name] = def;
    }
    dict["age"] = {{"description", "age at admission"},
                   {"unit", "years"},
                   {"aggregate", "first"},
                   {"sources", {{"synth", {{{"table", "stays"}, {"value_var", "age"}}}}}}};
    dict["sex"] = {{"description", "patient sex"},
                   {"aggregate", "first"},
                   {"sources", {{"synth", {{{"table", "stays"}, {"value_var", "sex"}}}}}}};
    dict["height"] = {{"description", "patient height"},
                      {"unit", "cm"},
                      {"aggregate", "first"},
                      {"sources", {{"synth", {{{"table", "stays"}, {"value_var", "height"}}}}}}};
    // raw weight is recorded in grams; unit_scale converts to kg
    dict["weight"] = {{"description", "patient weight"},
                      {"unit", "kg"},
                      {"aggregate", "first"},
                      {"sources",
                       {{"synth", {{{"table", "stays"}, {"value_var", "weight_g"}, {"unit_scale", 0.001}}}}}}};
    dict["sofa"] = {
        {"description", "sequential organ failure assessment"},
        {"aggregate", "last"},
        {"sources",
         {{"synth",
           {{{"table", "scores"}, {"sub_var", "score_name"}, {"ids", {"sofa"}}, {"value_var", "value"}}}}}}};
    dict["abx"] = {{"description", "antibiotic administration"},
                   {"aggregate", "max"},
                   {"sources",
                    {{"synth",
                      {{{"table", "medications"},
                        {"sub_var", "drug"},
                        {"regex", "^(ceftriaxone|vancomycin|meropenem|piperacillin)"},
                        {"value_var", "duration_h"}}}}}}};
    dict["samp"] = {{"description", "body fluid culture"},
                    {"aggregate", "first"},
                    {"sources", {{"synth", {{{"table", "cultures"}, {"value_var", "site"}}}}}}};
    dict["death"] = {{"description", "death in the icu"},
                     {"aggregate", "max"},
                     {"sources", {{"synth", {{{"table", "death_events"}, {"value_var", "flag"}}}}}}};
    return dict.dump(2);
}

json SynthConfig::to_json() const {
    return json{{"n_stays", n_stays},
                {"seed", seed},
                {"los_log_mean_h", los_log_mean_h},
                {"los_log_sd", los_log_sd},
                {"los_min_h", los_min_h},
                {"los_max_h", los_max_h},
                {"event_margin", event_margin},
                {"frac_aki_crea", frac_aki_crea},
                {"frac_aki_urine", frac_aki_urine},
                {"frac_aki_near_miss", frac_aki_near_miss},
                {"frac_sepsis", frac_sepsis},
                {"frac_sepsis_near_miss", frac_sepsis_near_miss},
                {"frac_sepsis_short_abx", frac_sepsis_short_abx},
                {"plant_age_below_18", plant_age_below_18},
                {"plant_missing_discharge", plant_missing_discharge},
                {"plant_short_stay", plant_short_stay},
                {"plant_sparse_bins", plant_sparse_bins},
                {"plant_long_gap", plant_long_gap},
                {"lab_skip_prob", lab_skip_prob},
                {"vital_skip_prob", vital_skip_prob},
                {"out_of_bounds_rows", out_of_bounds_rows},
                {"mortality_bias", mortality_bias}};
}

SynthConfig SynthConfig::from_json(const json& j) {
    SynthConfig c;
    auto cur = cursor(j, "synth config");
    cur.reject_unknown_keys({"n_stays", "seed", "los_log_mean_h", "los_log_sd", "los_min_h", "los_max_h",
                             "event_margin", "frac_aki_crea", "frac_aki_urine", "frac_aki_near_miss",
                             "frac_sepsis", "frac_sepsis_near_miss", "frac_sepsis_short_abx",
                             "plant_age_below_18", "plant_missing_discharge", "plant_short_stay",
                             "plant_sparse_bins", "plant_long_gap", "lab_skip_prob", "vital_skip_prob",
                             "out_of_bounds_rows", "mortality_bias"});
    c.n_stays = static_cast<int>(cur.int_or("n_stays", c.n_stays));
    c.seed = static_cast<std::uint64_t>(cur.int_or("seed", static_cast<std::int64_t>(c.seed)));
    c.los_log_mean_h = cur.num_or("los_log_mean_h", c.los_log_mean_h);
    c.los_log_sd = cur.num_or("los_log_sd", c.los_log_sd);
    c.los_min_h = cur.num_or("los_min_h", c.los_min_h);
    c.los_max_h = cur.num_or("los_max_h", c.los_max_h);
    c.event_margin = cur.num_or("event_margin", c.event_margin);
    c.frac_aki_crea = cur.num_or("frac_aki_crea", c.frac_aki_crea);
    c.frac_aki_urine = cur.num_or("frac_aki_urine", c.frac_aki_urine);
    c.frac_aki_near_miss = cur.num_or("frac_aki_near_miss", c.frac_aki_near_miss);
    c.frac_sepsis = cur.num_or("frac_sepsis", c.frac_sepsis);
    c.frac_sepsis_near_miss = cur.num_or("frac_sepsis_near_miss", c.frac_sepsis_near_miss);
    c.frac_sepsis_short_abx = cur.num_or("frac_sepsis_short_abx", c.frac_sepsis_short_abx);
    c.plant_age_below_18 = static_cast<int>(cur.int_or("plant_age_below_18", c.plant_age_below_18));
    c.plant_missing_discharge =
        static_cast<int>(cur.int_or("plant_missing_discharge", c.plant_missing_discharge));
    c.plant_short_stay = static_cast<int>(cur.int_or("plant_short_stay", c.plant_short_stay));
    c.plant_sparse_bins = static_cast<int>(cur.int_or("plant_sparse_bins", c.plant_sparse_bins));
    c.plant_long_gap = static_cast<int>(cur.int_or("plant_long_gap", c.plant_long_gap));
    c.lab_skip_prob = cur.num_or("lab_skip_prob", c.lab_skip_prob);
    c.vital_skip_prob = cur.num_or("vital_skip_prob", c.vital_skip_prob);
    c.out_of_bounds_rows = static_cast<int>(cur.int_or("out_of_bounds_rows", c.out_of_bounds_rows));
    c.mortality_bias = cur.num_or("mortality_bias", c.mortality_bias);
    return c;
}

json GroundTruth::to_json() const {
    json stays_json = json::array();
    for (const auto& s : stays) {
        json e = {{"stay_id", s.stay_id},
                  {"age", s.age},
                  {"sex", s.sex},
                  {"los_h", s.los_h},
                  {"excluded_by", s.excluded_by},
                  {"mortality_p", s.mortality_p},
                  {"mortality_label", s.mortality_label},
                  {"aki_near_miss", s.aki_near_miss},
                  {"sepsis_short_abx", s.sepsis_short_abx}};
        e["aki_onset_min"] = s.aki_onset_min ? json(*s.aki_onset_min) : json(nullptr);
        e["sepsis_onset_min"] = s.sepsis_onset_min ? json(*s.sepsis_onset_min) : json(nullptr);
        e["sepsis_variant_onset_min"] =
            s.sepsis_variant_onset_min ? json(*s.sepsis_variant_onset_min) : json(nullptr);
        stays_json.push_back(std::move(e));
    }
    return json{{"stays", stays_json},
                {"exclusion_plan", exclusion_plan},
                {"mortality_ceiling_auroc", mortality_ceiling_auroc},
                {"out_of_bounds_rows", out_of_bounds_rows}};
}

namespace {

struct TableBuilders {
    std::vector<std::int64_t> st_id, st_pid;
    std::vector<double> st_admit, st_disc, st_age, st_height, st_weight_g;
    std::vector<std::string> st_sex;

    std::vector<std::int64_t> ob_id, ob_item;
    std::vector<double> ob_t, ob_v;

    std::vector<std::int64_t> ur_id;
    std::vector<double> ur_t, ur_v;

    std::vector<std::int64_t> sc_id;
    std::vector<double> sc_t, sc_v;
    std::vector<std::string> sc_name;

    std::vector<std::int64_t> md_id;
    std::vector<double> md_t, md_dur;
    std::vector<std::string> md_drug;

    std::vector<std::int64_t> cu_id;
    std::vector<double> cu_t;
    std::vector<std::string> cu_site;

    std::vector<std::int64_t> de_id;
    std::vector<double> de_t, de_flag;

    std::vector<std::int64_t> lh_pid, lh_item;
    std::vector<double> lh_t, lh_v;
};

}  // namespace

SynthResult generate(const SynthConfig& config) {
    if (config.n_stays < 0) throw ConfigError("n_stays must be >= 0");
    double margin = config.event_margin;
    if (margin <= 0 || margin >= 0.5) throw ConfigError("event_margin must lie in (0, 0.5)");

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss;

    int n = config.n_stays;
    int total_plants = config.plant_age_below_18 + config.plant_missing_discharge +
                       config.plant_short_stay + config.plant_sparse_bins + config.plant_long_gap;
    if (total_plants > n) throw ConfigError("exclusion plants exceed n_stays (infeasible plan)");

    std::vector<StayPlan> plans;
    plans.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        StayPlan p;
        p.stay_id = 1 + i;
        p.patient_id = 100000 + i;
        p.admit_abs_min = 1e6 + static_cast<double>(i) * 1e6;
        double los = std::exp(config.los_log_mean_h + config.los_log_sd * gauss(rng));
        p.los_h = std::clamp(los, config.los_min_h, config.los_max_h);
        p.age = 25 + 60 * unit(rng);
        p.sex = unit(rng) < 0.5 ? "Female" : "Male";
        p.height = 150 + 45 * unit(rng);
        p.weight = 52 + 55 * unit(rng);
        p.height_missing = unit(rng) < 0.10;
        p.weight_missing = unit(rng) < 0.08;
        p.crea_base = 0.7 + 0.4 * unit(rng);
        p.sofa_base = 1 + static_cast<int>(unit(rng) * 3);
        plans.push_back(std::move(p));
    }

    // exclusion plants occupy the first stays, one criterion each
    {
        int at = 0;
        auto take = [&](int count, auto&& mark) {
            for (int k = 0; k < count && at < n; ++k, ++at) mark(plans[static_cast<std::size_t>(at)]);
        };
        take(config.plant_age_below_18, [&](StayPlan& p) {
            p.age = 14 + 3.5 * unit(rng);
            p.excluded_by = "age_below_18";
        });
        take(config.plant_missing_discharge, [&](StayPlan& p) {
            p.missing_discharge = true;
            p.excluded_by = "invalid_discharge_time";
        });
        take(config.plant_short_stay, [&](StayPlan& p) {
            p.los_h = 1.5 + 4.0 * unit(rng);  // < 6h
            p.excluded_by = "los_below_6h";
        });
        take(config.plant_sparse_bins, [&](StayPlan& p) {
            p.los_h = 18 + 4 * unit(rng);
            p.sparse_bins_plant = true;
            p.excluded_by = "fewer_than_4_measured_bins";
        });
        take(config.plant_long_gap, [&](StayPlan& p) {
            p.los_h = 38 + 8 * unit(rng);
            p.long_gap_plant = true;
            p.excluded_by = "gap_over_12h";
        });
    }

    // event plants on clean stays only
    for (auto& p : plans) {
        if (!p.excluded_by.empty()) continue;
        double roll = unit(rng);
        double a1 = config.frac_aki_crea;
        double a2 = a1 + config.frac_aki_urine;
        double a3 = a2 + config.frac_aki_near_miss;
        int max_onset = static_cast<int>(p.los_h) - 4;
        if (roll < a1 && max_onset > 9) {
            p.aki = StayPlan::AkiKind::crea;
            p.aki_onset_h = 9 + static_cast<int>(unit(rng) * std::min(max_onset - 9, 60));
        } else if (roll < a2 && max_onset > 13 && !p.weight_missing) {
            p.aki = StayPlan::AkiKind::urine;
            p.urine_low_start_h = 3 + static_cast<int>(unit(rng) * std::min(max_onset - 13, 40));
            p.aki_onset_h = p.urine_low_start_h + 6;
        } else if (roll < a3) {
            p.aki = StayPlan::AkiKind::near_miss;
        }

        double roll2 = unit(rng);
        double s1 = config.frac_sepsis;
        double s2 = s1 + config.frac_sepsis_near_miss;
        double s3 = s2 + config.frac_sepsis_short_abx;
        if (roll2 < s1 && p.los_h >= 120) {
            // q20h dose chain needs a long stay
            p.sepsis = StayPlan::SepsisKind::chain;
            p.sepsis_onset_h = 9 + static_cast<int>(unit(rng) * std::min(p.los_h - 100.0, 20.0));
        } else if (roll2 < s1 && p.los_h >= 40) {
            // whole-stay prescription pins suspicion time to hour 0, so the
            // dysfunction must land inside [0-48h, 0+24h]
            p.sepsis = StayPlan::SepsisKind::prescription;
            p.sepsis_onset_h = 8 + static_cast<int>(unit(rng) * 14);  // 8..21
        } else if (roll2 < s2 && p.los_h >= 40) {
            p.sepsis = unit(rng) < 0.5 ? StayPlan::SepsisKind::near_miss_sofa
                                       : StayPlan::SepsisKind::near_miss_window;
            p.sepsis_onset_h = 9 + static_cast<int>(unit(rng) * (p.los_h - 38));
        } else if (roll2 < s3 && p.los_h >= 56) {
            // keep the death/discharge gap clear of the until-death rule
            p.sepsis = StayPlan::SepsisKind::short_abx;
            p.sepsis_onset_h = 9 + static_cast<int>(unit(rng) * (p.los_h - 46 - 9));
        }
    }

    TableBuilders tb;
    GroundTruth truth;
    truth.exclusion_plan = {{"age_below_18", config.plant_age_below_18},
                            {"invalid_discharge_time", config.plant_missing_discharge},
                            {"los_below_6h", config.plant_short_stay},
                            {"fewer_than_4_measured_bins", config.plant_sparse_bins},
                            {"gap_over_12h", config.plant_long_gap}};

    for (auto& p : plans) {
        int n_hours = static_cast<int>(std::ceil(p.los_h - 1e-9));
        std::map<std::string, double> offsets;
        double eta = config.mortality_bias;
        for (const auto& w : kMortalityWeights) {
            double u = gauss(rng);
            offsets[w.feature] = u;
            eta += w.weight * u;
        }
        eta += kAgeWeight * (p.age - 55.0) / 17.3;
        p.mortality_p = sigmoid(eta);
        p.died = !p.missing_discharge && unit(rng) < p.mortality_p;

        tb.st_id.push_back(p.stay_id);
        tb.st_pid.push_back(p.patient_id);
        tb.st_admit.push_back(p.admit_abs_min);
        tb.st_disc.push_back(p.missing_discharge ? kMissing : p.admit_abs_min + p.los_h * 60.0);
        tb.st_age.push_back(p.age);
        tb.st_sex.push_back(p.sex);
        tb.st_height.push_back(p.height_missing ? kMissing : p.height);
        tb.st_weight_g.push_back(p.weight_missing ? kMissing : p.weight * 1000.0);

        if (p.died) {
            tb.de_id.push_back(p.stay_id);
            tb.de_t.push_back(p.admit_abs_min + p.los_h * 60.0);  // discharge time as proxy
            tb.de_flag.push_back(1.0);
        }

        auto push_truth = [&]() {
            StayTruth st;
            st.stay_id = p.stay_id;
            st.age = p.age;
            st.sex = p.sex;
            st.los_h = p.los_h;
            st.excluded_by = p.excluded_by;
            st.mortality_p = p.mortality_p;
            st.mortality_label = p.died ? 1 : 0;
            st.aki_near_miss = p.aki == StayPlan::AkiKind::near_miss;
            if (p.aki == StayPlan::AkiKind::crea || p.aki == StayPlan::AkiKind::urine)
                st.aki_onset_min = static_cast<std::int64_t>(p.aki_onset_h) * H;
            st.sepsis_short_abx = p.sepsis == StayPlan::SepsisKind::short_abx;
            if (p.sepsis == StayPlan::SepsisKind::chain ||
                p.sepsis == StayPlan::SepsisKind::prescription) {
                st.sepsis_onset_min = static_cast<std::int64_t>(p.sepsis_onset_h) * H;
                st.sepsis_variant_onset_min = st.sepsis_onset_min;
            } else if (p.sepsis == StayPlan::SepsisKind::short_abx) {
                st.sepsis_variant_onset_min = static_cast<std::int64_t>(p.sepsis_onset_h) * H;
            }
            truth.stays.push_back(std::move(st));
        };

        // sparse/gap plants emit only the keepalive signal
        if (p.sparse_bins_plant) {
            for (int h : {0, 5, 9}) {
                tb.ob_id.push_back(p.stay_id);
                tb.ob_t.push_back(p.admit_abs_min + h * 60.0);
                tb.ob_item.push_back(1000 + feature_index("hr"));
                tb.ob_v.push_back(80.0);
            }
            push_truth();
            continue;
        }
        if (p.long_gap_plant) {
            for (int h = 0; h < n_hours; ++h) {
                if (h >= 10 && h < 24) continue;  // 14 consecutive empty bins
                tb.ob_id.push_back(p.stay_id);
                tb.ob_t.push_back(p.admit_abs_min + h * 60.0);
                tb.ob_item.push_back(1000 + feature_index("hr"));
                tb.ob_v.push_back(80.0);
            }
            push_truth();
            continue;
        }

        // regular feature streams (AR(1) around a stay-level mean)
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            const auto& spec = kFeatures[f];
            std::string fname = spec.name;
            if (fname == "urine" || fname == "crea") continue;  // endpoint models below
            double level = spec.mean;
            auto off = offsets.find(fname);
            if (off != offsets.end()) level += off->second * spec.between_sd;
            else level += gauss(rng) * spec.between_sd;

            double phi = 0.8;
            double x = level;
            bool keepalive = fname == "hr";
            for (int h = 0; h < n_hours; h += spec.interval_h) {
                x = level + phi * (x - level) + spec.within_sd * std::sqrt(1 - phi * phi) * gauss(rng);
                double skip = spec.interval_h == 1 ? config.vital_skip_prob : config.lab_skip_prob;
                if (!keepalive && unit(rng) < skip) continue;
                tb.ob_id.push_back(p.stay_id);
                tb.ob_t.push_back(p.admit_abs_min + h * 60.0);
                tb.ob_item.push_back(1000 + static_cast<int>(f));
                tb.ob_v.push_back(std::clamp(x, spec.lo, spec.hi));
            }
        }

        // creatinine stream with the optional planted episode
        {
            int crea_item = 1000 + feature_index("crea");
            double c0 = p.crea_base;
            for (double back_d : {5.0, 2.0}) {
                tb.lh_pid.push_back(p.patient_id);
                tb.lh_t.push_back(p.admit_abs_min - back_d * 24 * 60);
                tb.lh_item.push_back(crea_item);
                tb.lh_v.push_back(c0 * (1.0 + 0.02 * (unit(rng) - 0.5)));
            }
            double satisfy_ratio = 1.5 * (1 + margin);
            double miss_ratio = 1.5 * (1 - margin);
            bool onset_emitted = false;
            for (int h = 0; h < n_hours; h += 4) {
                double v;
                int hour = h;
                if (p.aki == StayPlan::AkiKind::crea && h >= p.aki_onset_h) {
                    v = c0 * satisfy_ratio * (1.0 + 0.02 * unit(rng));
                    if (!onset_emitted) {
                        hour = p.aki_onset_h;  // first elevated sample sits exactly on the onset hour
                        onset_emitted = true;
                    }
                } else if (p.aki == StayPlan::AkiKind::near_miss && h >= 20) {
                    v = c0 * miss_ratio * (1.0 - 0.02 * unit(rng));
                } else {
                    v = c0 * (1.0 + 0.04 * (unit(rng) - 0.5));
                }
                tb.ob_id.push_back(p.stay_id);
                tb.ob_t.push_back(p.admit_abs_min + hour * 60.0);
                tb.ob_item.push_back(crea_item);
                tb.ob_v.push_back(v);
            }
        }

        // urine stream: hourly volumes derived from a rate model
        {
            double kg = p.weight_missing ? 75.0 : p.weight;
            double healthy_rate = 0.9 + 0.8 * unit(rng);
            double low_rate = 0.5 * (1 - margin) * (0.92 + 0.06 * unit(rng));
            double near_rate = 0.5 * (1 + margin) * (1.02 + 0.05 * unit(rng));
            for (int h = 1; h <= n_hours; ++h) {
                double rate = healthy_rate;
                if (p.aki == StayPlan::AkiKind::urine && h > p.urine_low_start_h &&
                    h <= p.urine_low_start_h + 9)
                    rate = low_rate;
                if (p.aki == StayPlan::AkiKind::near_miss && h > 20 && h <= 28) rate = near_rate;
                tb.ur_id.push_back(p.stay_id);
                tb.ur_t.push_back(p.admit_abs_min + h * 60.0);
                tb.ur_v.push_back(rate * kg);
            }
        }

        // sofa stream plus antibiotic/culture events
        {
            int step = static_cast<int>(std::ceil(2.0 * (1 + margin)));
            for (int h = 0; h < n_hours; ++h) {
                double v = p.sofa_base;
                bool stepped = p.sepsis == StayPlan::SepsisKind::chain ||
                               p.sepsis == StayPlan::SepsisKind::prescription ||
                               p.sepsis == StayPlan::SepsisKind::short_abx ||
                               p.sepsis == StayPlan::SepsisKind::near_miss_window;
                if (stepped && h >= p.sepsis_onset_h) v = p.sofa_base + step;
                if (p.sepsis == StayPlan::SepsisKind::near_miss_sofa && h >= p.sepsis_onset_h)
                    v = p.sofa_base + 1;
                tb.sc_id.push_back(p.stay_id);
                tb.sc_t.push_back(p.admit_abs_min + h * 60.0);
                tb.sc_name.push_back("sofa");
                tb.sc_v.push_back(v);
            }

            const char* drugs[] = {"ceftriaxone", "vancomycin", "meropenem", "piperacillin"};
            const char* drug = drugs[rng() % 4];
            auto abx_at = [&](int hour, double dur_h) {
                tb.md_id.push_back(p.stay_id);
                tb.md_t.push_back(p.admit_abs_min + hour * 60.0);
                tb.md_drug.push_back(drug);
                tb.md_dur.push_back(dur_h);
            };
            auto culture_at = [&](int hour) {
                tb.cu_id.push_back(p.stay_id);
                tb.cu_t.push_back(p.admit_abs_min + hour * 60.0);
                tb.cu_site.push_back("blood");
            };
            int A = p.sepsis_onset_h - 6;
            switch (p.sepsis) {
                case StayPlan::SepsisKind::chain: {
                    int last = A + static_cast<int>(std::ceil(72.0 * (1 + margin)));
                    for (int h = A; h <= last; h += 20) abx_at(h, 0);
                    abx_at(last, 0);
                    culture_at(A + 8);
                    break;
                }
                case StayPlan::SepsisKind::prescription: {
                    abx_at(0, p.los_h + 1);  // spans the whole stay; suspicion at hour 0
                    culture_at(8);
                    break;
                }
                case StayPlan::SepsisKind::short_abx: {
                    abx_at(A, 0);
                    abx_at(A + 18, 0);  // far below the 3-day requirement
                    culture_at(A + 8);
                    break;
                }
                case StayPlan::SepsisKind::near_miss_sofa: {
                    int last = std::max(0, A) + static_cast<int>(std::ceil(72.0 * (1 + margin)));
                    last = std::min(last, n_hours - 1);
                    for (int h = std::max(0, A); h <= last; h += 20) abx_at(h, 0);
                    culture_at(std::min(std::max(0, A) + 8, n_hours - 1));
                    break;
                }
                case StayPlan::SepsisKind::near_miss_window:
                    // dysfunction without any antibiotics: no suspicion, no onset
                    break;
                case StayPlan::SepsisKind::none: {
                    if (unit(rng) < 0.15) abx_at(1 + static_cast<int>(unit(rng) * (n_hours - 1)), 0);
                    if (unit(rng) < 0.10) culture_at(1 + static_cast<int>(unit(rng) * (n_hours - 1)));
                    break;
                }
            }
            if (unit(rng) < 0.2) {
                tb.md_id.push_back(p.stay_id);
                tb.md_t.push_back(p.admit_abs_min + 2 * 60.0);
                tb.md_drug.push_back(unit(rng) < 0.5 ? "insulin" : "propofol");
                tb.md_dur.push_back(0);
            }
        }

        push_truth();
    }

    // implausible rows exercising the plausibility filter (label-neutral feature)
    if (!plans.empty()) {
        int glu_item = 1000 + feature_index("glu");
        for (int k = 0; k < config.out_of_bounds_rows; ++k) {
            const auto& p = plans[rng() % plans.size()];
            if (p.sparse_bins_plant || p.long_gap_plant) continue;
            tb.ob_id.push_back(p.stay_id);
            tb.ob_t.push_back(p.admit_abs_min + 90.0);
            tb.ob_item.push_back(glu_item);
            tb.ob_v.push_back(9999.0);
            ++truth.out_of_bounds_rows;
        }
    }

    // analytic mortality ceiling over the stays that reach the mortality cohort
    {
        std::vector<double> ps, ys;
        for (const auto& p : plans) {
            if (!p.excluded_by.empty()) continue;
            if (p.los_h < 30.0) continue;
            ps.push_back(p.mortality_p);
            ys.push_back(p.died ? 1.0 : 0.0);
        }
        truth.mortality_ceiling_auroc = metrics::auroc(ps, ys);
    }

    SynthResult result;
    result.truth = std::move(truth);
    result.source_config = harmonize::parse_source_config(bundled_source_config_json());
    result.concepts = harmonize::parse_concept_dictionary(bundled_concepts_json());

    Frame stays;
    stays.add_i64("stay_id", std::move(tb.st_id));
    stays.add_i64("patient_id", std::move(tb.st_pid));
    stays.add_f64("admit_min", std::move(tb.st_admit));
    stays.add_f64("discharge_min", std::move(tb.st_disc));
    stays.add_f64("age", std::move(tb.st_age));
    stays.add_str("sex", std::move(tb.st_sex));
    stays.add_f64("height", std::move(tb.st_height));
    stays.add_f64("weight_g", std::move(tb.st_weight_g));
    result.tables["stays"] = std::move(stays);

    Frame obs;
    obs.add_i64("stay_id", std::move(tb.ob_id));
    obs.add_f64("time_min", std::move(tb.ob_t));
    obs.add_i64("itemid", std::move(tb.ob_item));
    obs.add_f64("value", std::move(tb.ob_v));
    result.tables["observations"] = std::move(obs);

    Frame urine;
    urine.add_i64("stay_id", std::move(tb.ur_id));
    urine.add_f64("time_min", std::move(tb.ur_t));
    urine.add_f64("volume_ml", std::move(tb.ur_v));
    result.tables["urine_output"] = std::move(urine);

    Frame scores;
    scores.add_i64("stay_id", std::move(tb.sc_id));
    scores.add_f64("time_min", std::move(tb.sc_t));
    scores.add_str("score_name", std::move(tb.sc_name));
    scores.add_f64("value", std::move(tb.sc_v));
    result.tables["scores"] = std::move(scores);

    Frame meds;
    meds.add_i64("stay_id", std::move(tb.md_id));
    meds.add_f64("time_min", std::move(tb.md_t));
    meds.add_str("drug", std::move(tb.md_drug));
    meds.add_f64("duration_h", std::move(tb.md_dur));
    result.tables["medications"] = std::move(meds);

    Frame cultures;
    cultures.add_i64("stay_id", std::move(tb.cu_id));
    cultures.add_f64("time_min", std::move(tb.cu_t));
    cultures.add_str("site", std::move(tb.cu_site));
    result.tables["cultures"] = std::move(cultures);

    Frame deaths;
    deaths.add_i64("stay_id", std::move(tb.de_id));
    deaths.add_f64("time_min", std::move(tb.de_t));
    deaths.add_f64("flag", std::move(tb.de_flag));
    result.tables["death_events"] = std::move(deaths);

    Frame labhist;
    labhist.add_i64("patient_id", std::move(tb.lh_pid));
    labhist.add_f64("time_min", std::move(tb.lh_t));
    labhist.add_i64("itemid", std::move(tb.lh_item));
    labhist.add_f64("value", std::move(tb.lh_v));
    result.tables["lab_history"] = std::move(labhist);

    return result;
}

namespace {

void write_raw_csv(const Frame& frame, const std::filesystem::path& path) {
    std::string out;
    for (std::size_t c = 0; c < frame.ncol(); ++c) {
        if (c) out += ',';
        out += frame.names()[c];
    }
    out += '\n';
    char buf[64];
    for (std::size_t r = 0; r < frame.nrow(); ++r) {
        for (std::size_t c = 0; c < frame.ncol(); ++c) {
            if (c) out += ',';
            switch (frame.type(c)) {
                case ColType::i64:
                    std::snprintf(buf, sizeof(buf), "%lld",
                                  static_cast<long long>(std::get<0>(frame.column(c))[r]));
                    out += buf;
                    break;
                case ColType::f64: {
                    double v = std::get<1>(frame.column(c))[r];
                    if (!is_missing(v)) {
                        std::snprintf(buf, sizeof(buf), "%.10g", v);
                        out += buf;
                    }
                    break;
                }
                case ColType::str: out += csv_escape(std::get<2>(frame.column(c))[r]); break;
            }
        }
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace

void generate_to_dir(const SynthConfig& config, const std::filesystem::path& dir) {
    auto result = generate(config);
    std::filesystem::create_directories(dir);
    for (const auto& [name, table] : result.tables) {
        const auto& def = result.source_config.tables.at(name);
        write_raw_csv(table, dir / def.file);
    }
    write_text_file(dir / "source_config.json", bundled_source_config_json() + "\n");
    write_text_file(dir / "concepts.json", bundled_concepts_json() + "\n");
    json truth = result.truth.to_json();
    truth["config"] = config.to_json();
    write_text_file(dir / "truth.json", truth.dump(2) + "\n");
}

}  // namespace icubench::synthgen
