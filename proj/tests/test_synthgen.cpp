#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "icubench/cohort.hpp"
#include "icubench/synthgen.hpp"

using namespace icubench;
using namespace icubench::synthgen;

namespace {

std::map<std::int64_t, const StayTruth*> truth_by_id(const GroundTruth& truth) {
    std::map<std::int64_t, const StayTruth*> m;
    for (const auto& s : truth.stays) m[s.stay_id] = &s;
    return m;
}

}  // namespace

TEST_CASE("generator basics: determinism, degenerate and infeasible configs") {
    SynthConfig cfg;
    cfg.n_stays = 40;
    cfg.seed = 123;
    auto a = generate(cfg);
    auto b = generate(cfg);
    CHECK(a.truth.to_json() == b.truth.to_json());
    for (const auto& [name, table] : a.tables) {
        const auto& other = b.tables.at(name);
        REQUIRE(table.nrow() == other.nrow());
        for (std::size_t c = 0; c < table.ncol(); ++c) {
            if (table.type(c) == ColType::f64) {
                const auto& x = std::get<1>(table.column(c));
                const auto& y = std::get<1>(other.column(c));
                for (std::size_t r = 0; r < x.size(); ++r)
                    CHECK(((is_missing(x[r]) && is_missing(y[r])) || x[r] == y[r]));
            }
        }
    }

    SynthConfig empty;
    empty.n_stays = 0;
    empty.plant_age_below_18 = empty.plant_missing_discharge = empty.plant_short_stay = 0;
    empty.plant_sparse_bins = empty.plant_long_gap = 0;
    empty.out_of_bounds_rows = 0;
    auto e = generate(empty);
    CHECK(e.tables.at("stays").nrow() == 0);
    CHECK(e.truth.stays.empty());

    SynthConfig infeasible;
    infeasible.n_stays = 3;  // fewer than the default plants
    CHECK_THROWS_AS(generate(infeasible), ConfigError);
}

TEST_CASE("bundled configs parse and cover the feature set") {
    auto cfg = harmonize::parse_source_config(bundled_source_config_json());
    CHECK(cfg.name == "synth");
    auto dict = harmonize::parse_concept_dictionary(bundled_concepts_json());
    CHECK(dynamic_feature_names().size() == 48);
    for (const auto& f : dynamic_feature_names()) CHECK(dict.has(f));
    for (const char* extra : {"age", "sex", "height", "weight", "sofa", "abx", "samp", "death"})
        CHECK(dict.has(extra));
}

TEST_CASE("attrition plan is reproduced exactly by the base exclusions") {
    SynthConfig cfg;
    cfg.n_stays = 250;
    cfg.seed = 42;
    auto gen = generate(cfg);
    auto stays = cohort::assemble_stays(gen.tables, gen.source_config, gen.concepts, "synth",
                                        dynamic_feature_names());
    auto [alive, report] = cohort::apply_exclusions(cohort::base_exclusions(), stays);
    REQUIRE(report.steps.size() == 5);
    for (const auto& step : report.steps) {
        CHECK(step.n_excluded == static_cast<std::size_t>(gen.truth.exclusion_plan.at(step.criterion)));
    }
    CHECK(alive.size() == stays.size() - 35);  // 8+7+6+5+9 planted exclusions
}

TEST_CASE("planted aki events are recovered exactly; near misses stay silent") {
    SynthConfig cfg;
    cfg.n_stays = 220;
    cfg.seed = 77;
    auto gen = generate(cfg);
    auto truth = truth_by_id(gen.truth);
    auto stays = cohort::assemble_stays(gen.tables, gen.source_config, gen.concepts, "synth",
                                        dynamic_feature_names());
    auto [alive, report] = cohort::apply_exclusions(cohort::base_exclusions(), stays);
    std::vector<cohort::StayData> survivors;
    for (auto i : alive) survivors.push_back(std::move(stays[i]));

    cohort::TaskOptions task;
    task.id = "aki";
    auto labels = cohort::compute_labels(task, survivors, true);

    int planted = 0, near = 0;
    for (const auto& sd : survivors) {
        const auto& t = *truth.at(sd.stay.stay_id);
        const auto& got = labels.at(sd.stay.stay_id);
        if (t.aki_onset_min) {
            ++planted;
            REQUIRE_MESSAGE(got.onset_min.has_value(), "missing onset for stay ", sd.stay.stay_id);
            CHECK(*got.onset_min == *t.aki_onset_min);
        } else {
            CHECK_MESSAGE(!got.onset_min.has_value(), "spurious onset for stay ", sd.stay.stay_id);
            if (t.aki_near_miss) ++near;
        }
    }
    CHECK(planted > 5);
    CHECK(near > 3);
}

TEST_CASE("planted sepsis events are recovered exactly; variant adds the short courses") {
    SynthConfig cfg;
    cfg.n_stays = 300;
    cfg.seed = 99;
    cfg.frac_sepsis = 0.15;
    cfg.frac_sepsis_short_abx = 0.08;
    auto gen = generate(cfg);
    auto truth = truth_by_id(gen.truth);
    auto stays = cohort::assemble_stays(gen.tables, gen.source_config, gen.concepts, "synth",
                                        dynamic_feature_names());
    auto [alive, report] = cohort::apply_exclusions(cohort::base_exclusions(), stays);
    std::vector<cohort::StayData> survivors;
    for (auto i : alive) survivors.push_back(std::move(stays[i]));

    cohort::TaskOptions strict;
    strict.id = "sepsis";
    auto strict_labels = cohort::compute_labels(strict, survivors, true);

    cohort::TaskOptions loose = strict;
    loose.sepsis.abx_continuity_days = 0;
    auto loose_labels = cohort::compute_labels(loose, survivors, true);

    int planted = 0, short_courses = 0;
    for (const auto& sd : survivors) {
        const auto& t = *truth.at(sd.stay.stay_id);
        const auto& got = strict_labels.at(sd.stay.stay_id);
        const auto& got_loose = loose_labels.at(sd.stay.stay_id);
        if (t.sepsis_onset_min) {
            ++planted;
            REQUIRE_MESSAGE(got.onset_min.has_value(), "missing sepsis onset for stay ", sd.stay.stay_id);
            CHECK(*got.onset_min == *t.sepsis_onset_min);
        } else {
            CHECK_MESSAGE(!got.onset_min.has_value(), "spurious sepsis onset for stay ", sd.stay.stay_id);
        }
        if (t.sepsis_variant_onset_min) {
            REQUIRE(got_loose.onset_min.has_value());
            CHECK(*got_loose.onset_min == *t.sepsis_variant_onset_min);
            if (t.sepsis_short_abx) ++short_courses;
        }
        // variant monotonicity: disabling continuity never removes an onset
        if (got.onset_min) {
            REQUIRE(got_loose.onset_min.has_value());
            CHECK(*got_loose.onset_min <= *got.onset_min);
        }
    }
    CHECK(planted > 5);
    CHECK(short_courses > 2);
}

TEST_CASE("mortality labels and plausibility drops line up with the plan") {
    SynthConfig cfg;
    cfg.n_stays = 150;
    cfg.seed = 5;
    auto gen = generate(cfg);
    auto truth = truth_by_id(gen.truth);

    // out-of-bounds glucose rows planted by the generator are dropped on extraction
    auto glu = harmonize::extract_concept(gen.tables, gen.source_config, gen.concepts.at("glu"), "synth");
    CHECK(glu.dropped_out_of_bounds == gen.truth.out_of_bounds_rows);
    CHECK(gen.truth.out_of_bounds_rows > 0);

    auto stays = cohort::assemble_stays(gen.tables, gen.source_config, gen.concepts, "synth",
                                        dynamic_feature_names());
    cohort::TaskOptions task;
    task.id = "mortality";
    auto labels = cohort::compute_labels(task, stays, true);
    for (const auto& sd : stays) {
        const auto& t = *truth.at(sd.stay.stay_id);
        CHECK(*labels.at(sd.stay.stay_id).stay_label == static_cast<double>(t.mortality_label));
    }

    // ceiling is a usable target
    CHECK(gen.truth.mortality_ceiling_auroc > 0.7);
    CHECK(gen.truth.mortality_ceiling_auroc < 1.0);
}

TEST_CASE("full task cohort build: bundle invariants hold on synthetic data") {
    SynthConfig cfg;
    cfg.n_stays = 120;
    cfg.seed = 31;
    auto gen = generate(cfg);

    cohort::TaskOptions task;
    task.id = "mortality";
    auto mort = cohort::build_task_cohort(gen.tables, gen.source_config, gen.concepts, "synth", task,
                                          dynamic_feature_names());
    mort.bundle.validate();
    // one label per stay, 24 feature rows per stay
    CHECK(mort.bundle.outc.nrow() == mort.stay_ids.size());
    CHECK(mort.bundle.dyn.nrow() == 24 * mort.stay_ids.size());
    // mortality cohort contains no stay under 30h
    for (std::size_t i = 0; i < mort.bundle.sta.nrow(); ++i) {
        auto id = mort.bundle.sta.i64("stay_id")[i];
        for (const auto& t : gen.truth.stays)
            if (t.stay_id == id) CHECK(t.los_h >= 30.0);
    }

    task.id = "los";
    auto los = cohort::build_task_cohort(gen.tables, gen.source_config, gen.concepts, "synth", task,
                                         dynamic_feature_names());
    CHECK(los.bundle.outc.nrow() == los.bundle.dyn.nrow());  // hourly rows align
    // base cohort has no stay under 6h
    for (std::size_t i = 0; i < los.bundle.sta.nrow(); ++i) {
        auto id = los.bundle.sta.i64("stay_id")[i];
        for (const auto& t : gen.truth.stays)
            if (t.stay_id == id) CHECK(t.los_h >= 6.0);
    }

    // attrition report json round trip
    auto j = mort.attrition.to_json();
    CHECK(cohort::AttritionReport::from_json(j).to_json() == j);
}

TEST_CASE("generate_to_dir writes loadable raw tables and configs") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "icubench_synth_dir";
    fs::remove_all(dir);
    SynthConfig cfg;
    cfg.n_stays = 45;
    cfg.seed = 9;
    generate_to_dir(cfg, dir);
    for (const char* f : {"stays.csv", "observations.csv", "urine_output.csv", "scores.csv",
                          "medications.csv", "cultures.csv", "death_events.csv", "lab_history.csv",
                          "source_config.json", "concepts.json", "truth.json"})
        CHECK(fs::exists(dir / f));

    auto src = harmonize::parse_source_config(read_text_file(dir / "source_config.json"));
    auto raw = harmonize::load_raw_tables(dir, src);
    CHECK(raw.at("stays").nrow() == 45);

    // loading from disk reproduces the in-memory extraction
    auto mem = generate(cfg);
    auto dict = harmonize::parse_concept_dictionary(read_text_file(dir / "concepts.json"));
    auto from_disk = harmonize::extract_concept(raw, src, dict.at("hr"), "synth");
    auto from_mem = harmonize::extract_concept(mem.tables, mem.source_config, mem.concepts.at("hr"), "synth");
    REQUIRE(from_disk.size() == from_mem.size());
    for (std::size_t i = 0; i < from_disk.size(); ++i) {
        CHECK(from_disk.stay_id[i] == from_mem.stay_id[i]);
        CHECK(from_disk.time_min[i] == from_mem.time_min[i]);
        CHECK(from_disk.value[i] == doctest::Approx(from_mem.value[i]).epsilon(1e-9));
    }
    fs::remove_all(dir);
}
