#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "icubench/experiment.hpp"
#include "icubench/synthgen.hpp"

using namespace icubench;
using namespace icubench::experiment;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// small synthetic cohort written to disk once per test process
fs::path mortality_cohort_dir(int n_stays, std::uint64_t seed, const fs::path& where) {
    synthgen::SynthConfig cfg;
    cfg.n_stays = n_stays;
    cfg.seed = seed;
    auto gen = synthgen::generate(cfg);
    cohort::TaskOptions task;
    task.id = "mortality";
    auto cohort = cohort::build_task_cohort(gen.tables, gen.source_config, gen.concepts, "synth", task,
                                            synthgen::dynamic_feature_names());
    cohort::write_cohort(cohort.bundle, where);
    write_text_file(where / "attrition.json", cohort.attrition.to_json().dump(2) + "\n");
    return where;
}

json strip_wall_clock(json j) {
    j.erase("wall_clock_s");
    return j;
}

}  // namespace

TEST_CASE("experiment config: defaults, unknown keys, round trip") {
    auto cfg = parse_experiment_config(R"({"data_dir": "somewhere"})");
    CHECK(cfg.data_dir == "somewhere");
    CHECK(cfg.cv.folds == 5);
    CHECK(cfg.cv.repetitions == 5);
    CHECK(cfg.cv.n_calls == 50);
    CHECK(cfg.model == "logreg");
    CHECK(cfg.task.id == "mortality");
    CHECK(cfg.preprocess.generate_features);

    try {
        parse_experiment_config(R"({"data_dir": "x", "modle": "gbt"})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("modle") != std::string::npos);
    }

    // round trip through to_json/parse
    auto text = cfg.to_json().dump();
    auto again = parse_experiment_config(text);
    CHECK(again.to_json() == cfg.to_json());

    // nested task options
    auto nested = parse_experiment_config(R"({
      "data_dir": "d",
      "task": {"id": "sepsis", "horizon_h": 12, "sepsis": {"abx_continuity_days": 0, "suspicion_mode": "abx_only"}},
      "model": {"kind": "gbt", "hyperparams": {"num_leaves": 15}},
      "cv": {"folds": 3, "repetitions": 2}
    })");
    CHECK(nested.task.sepsis.abx_continuity_days == 0);
    CHECK(nested.task.hourly.horizon_h == 12);
    CHECK(nested.model == "gbt");
    CHECK(nested.hyperparams["num_leaves"] == 15);
}

TEST_CASE("default spaces exist for every model kind") {
    for (const char* kind : {"logreg", "elasticnet", "gbt"}) {
        auto space_json = default_space(kind);
        auto space = tuner::parse_param_space(cursor(space_json, "space"));
        CHECK(!space.empty());
    }
    CHECK_THROWS_AS(default_space("transformer"), ConfigError);
}

TEST_CASE("model kind / task mode compatibility") {
    ModelData d;
    d.x.n = 4;
    d.x.d = 1;
    d.x.values = {0, 1, 2, 3};
    d.x.names = {"f"};
    d.y = {0, 1, 0, 1};
    CHECK_THROWS_AS(train_model("elasticnet", json::object(), true, 0, d, nullptr), ConfigError);
    CHECK_THROWS_AS(train_model("logreg", json::object(), false, 0, d, nullptr), ConfigError);
    CHECK_THROWS_AS(train_model("mlp", json::object(), true, 0, d, nullptr), ConfigError);
    CHECK_THROWS_AS(train_model("logreg", json{{"C", 1.0}, {"mystery", 2}}, true, 0, d, nullptr),
                    ConfigError);
}

TEST_CASE("run_train on a synthetic mortality cohort: shape, determinism, aggregates") {
    TempDir data("icubench_exp_data");
    TempDir logs("icubench_exp_logs");
    mortality_cohort_dir(120, 3, data.path);

    ExperimentConfig cfg;
    cfg.data_dir = data.path.string();
    cfg.dataset_name = "synth";
    cfg.task.id = "mortality";
    cfg.model = "logreg";
    cfg.hyperparams = json{{"C", 1.0}, {"max_iter", 300}, {"tol", 1e-6}};
    cfg.cv.folds = 3;
    cfg.cv.repetitions = 2;
    cfg.seed = 2222;
    cfg.log_dir = logs.path.string();

    auto record = run_train(cfg);
    CHECK(record.folds.size() == 6);  // K x R fold entries
    for (const auto& f : record.folds) {
        CHECK(f.metrics.count("auroc"));
        CHECK(f.metrics.at("auroc") > 0.5);
        CHECK(f.metrics.count("auprc"));
        CHECK(f.metrics.count("calibration_error"));
    }
    // aggregate equals a recomputation from the fold entries
    std::vector<std::map<std::string, double>> per;
    for (const auto& f : record.folds) per.push_back(f.metrics);
    auto again = metrics::aggregate(per);
    for (const auto& [name, ms] : record.aggregate) {
        CHECK(ms.mean == doctest::Approx(again.at(name).mean).epsilon(1e-12));
        CHECK(ms.std == doctest::Approx(again.at(name).std).epsilon(1e-12));
    }

    // persisted artifacts
    CHECK(fs::exists(record.output_dir / "results.json"));
    CHECK(fs::exists(record.output_dir / "attrition.json"));
    CHECK(fs::exists(record.output_dir / "model_r0_f0.json"));
    CHECK(fs::exists(record.output_dir / "recipe_r1_f2.json"));

    // determinism: identical config + seed => identical results minus wall clock
    auto record2 = run_train(cfg);
    CHECK(strip_wall_clock(record.to_json()) == strip_wall_clock(record2.to_json()));

    // concurrent fold execution merges deterministically: same record with workers
    auto cfg_mt = cfg;
    cfg_mt.workers = 3;
    auto record3 = run_train(cfg_mt);
    auto a = strip_wall_clock(record.to_json());
    auto b = strip_wall_clock(record3.to_json());
    a["config"].erase("workers");
    b["config"].erase("workers");
    CHECK(a == b);
}

TEST_CASE("run_train with tuning picks a point from the space and records it") {
    TempDir data("icubench_exp_tune");
    TempDir logs("icubench_exp_tune_logs");
    mortality_cohort_dir(90, 11, data.path);

    ExperimentConfig cfg;
    cfg.data_dir = data.path.string();
    cfg.dataset_name = "synth";
    cfg.task.id = "mortality";
    cfg.model = "logreg";
    cfg.hyperparams = json{{"max_iter", 200}, {"tol", 1e-5}};
    cfg.tune = true;
    cfg.space = json{{"C", {{"kind", "log_uniform"}, {"a", 1e-2}, {"b", 10.0}}}};
    cfg.cv.folds = 3;
    cfg.cv.repetitions = 1;
    cfg.cv.folds_to_tune = 2;
    cfg.cv.n_init = 3;
    cfg.cv.n_calls = 6;
    cfg.seed = 7;
    cfg.log_dir = logs.path.string();

    auto record = run_train(cfg);
    REQUIRE(record.config.contains("best_hyperparams"));
    double c = record.config["best_hyperparams"]["C"].get<double>();
    CHECK(c >= 1e-2);
    CHECK(c <= 10.0);
    CHECK(fs::exists(record.output_dir / "trials.json"));

    // checkpoint reuse: same best point without re-tuning
    ExperimentConfig reuse = cfg;
    reuse.tune = false;
    reuse.checkpoint = (record.output_dir / "results.json").string();
    auto record2 = run_train(reuse);
    CHECK(record2.config["best_hyperparams"]["C"].get<double>() == doctest::Approx(c));
}

TEST_CASE("run_evaluate: self-evaluation reproduces test metrics; no target leakage") {
    TempDir data("icubench_eval_data");
    TempDir logs("icubench_eval_logs");
    mortality_cohort_dir(120, 3, data.path);

    ExperimentConfig cfg;
    cfg.data_dir = data.path.string();
    cfg.dataset_name = "synth";
    cfg.task.id = "mortality";
    cfg.model = "logreg";
    cfg.hyperparams = json{{"C", 1.0}, {"max_iter", 300}, {"tol", 1e-6}};
    cfg.cv.folds = 3;
    cfg.cv.repetitions = 1;
    cfg.seed = 5;
    cfg.log_dir = logs.path.string();

    auto trained = run_train(cfg);
    auto evaluated = run_evaluate(cfg, trained.output_dir.string(), "synth");
    REQUIRE(evaluated.folds.size() == trained.folds.size());
    for (std::size_t i = 0; i < trained.folds.size(); ++i) {
        CHECK(evaluated.folds[i].metrics.at("auroc") ==
              doctest::Approx(trained.folds[i].metrics.at("auroc")).epsilon(1e-12));
    }

    // permuting target labels must not change the transformed features:
    // evaluate on a label-shuffled copy and compare predicted scores per stay
    TempDir shuffled("icubench_eval_shuffled");
    auto bundle = cohort::read_cohort(data.path);
    auto labels = bundle.outc.f64("label");
    std::reverse(bundle.outc.f64("label").begin(), bundle.outc.f64("label").end());
    cohort::write_cohort(bundle, shuffled.path);

    ExperimentConfig cfg2 = cfg;
    cfg2.data_dir = shuffled.path.string();
    auto fitted = recipes::FittedRecipe::from_json(parse_json_strict(
        read_text_file(trained.output_dir / "recipe_r0_f0.json"), "recipe"));
    auto model = models::TrainedModel::load(trained.output_dir / "model_r0_f0.json");

    auto original = cohort::read_cohort(data.path);
    auto permuted = cohort::read_cohort(shuffled.path);
    auto d1 = make_model_data(recipes::apply(fitted, original), original, true);
    auto d2 = make_model_data(recipes::apply(fitted, permuted), permuted, true);
    REQUIRE(d1.x.values.size() == d2.x.values.size());
    for (std::size_t i = 0; i < d1.x.values.size(); ++i) {
        double a = d1.x.values[i], b = d2.x.values[i];
        CHECK(((is_missing(a) && is_missing(b)) || a == b));
    }

    // feature mismatch is a loud error
    auto broken = cohort::read_cohort(data.path);
    broken.dyn.drop("hr");
    broken.vars.dynamic.erase(
        std::find(broken.vars.dynamic.begin(), broken.vars.dynamic.end(), "hr"));
    CHECK_THROWS_AS(
        [&] {
            auto t = make_model_data(recipes::apply(fitted, broken), broken, true);
            (void)t;
        }(),
        DataError);
    (void)labels;
    (void)model;
}

TEST_CASE("transfer: models trained on one dataset evaluate on another with shifted means") {
    TempDir a("icubench_xfer_a"), b("icubench_xfer_b"), logs("icubench_xfer_logs");
    mortality_cohort_dir(120, 41, a.path);
    mortality_cohort_dir(120, 42, b.path);  // different draw, different feature means

    ExperimentConfig cfg;
    cfg.data_dir = a.path.string();
    cfg.dataset_name = "a";
    cfg.task.id = "mortality";
    cfg.model = "logreg";
    cfg.hyperparams = json{{"C", 0.5}, {"max_iter", 300}, {"tol", 1e-6}};
    cfg.cv.folds = 3;
    cfg.cv.repetitions = 1;
    cfg.seed = 6;
    cfg.log_dir = logs.path.string();
    auto trained = run_train(cfg);

    ExperimentConfig target = cfg;
    target.data_dir = b.path.string();
    target.dataset_name = "b";
    auto result = run_evaluate(target, trained.output_dir.string(), "a");
    CHECK(result.folds.size() == 3);
    for (const auto& f : result.folds) {
        CHECK(f.metrics.count("auroc"));
        CHECK(std::isfinite(f.metrics.at("auroc")));
    }
}

TEST_CASE("pooled training produces a single reusable model") {
    TempDir a("icubench_pool_a"), b("icubench_pool_b"), logs("icubench_pool_logs");
    mortality_cohort_dir(160, 21, a.path);
    mortality_cohort_dir(160, 22, b.path);

    ExperimentConfig cfg;
    cfg.data_dir = a.path.string();
    cfg.pool_dirs = {b.path.string()};
    cfg.pool_size = 110;
    cfg.dataset_name = "pooled";
    cfg.task.id = "mortality";
    cfg.model = "logreg";
    cfg.hyperparams = json{{"C", 0.3}, {"max_iter", 400}, {"tol", 1e-6}};
    cfg.seed = 13;
    cfg.log_dir = logs.path.string();

    auto pooled = run_train(cfg);
    CHECK(pooled.folds.size() == 1);
    CHECK(fs::exists(pooled.output_dir / "model_pooled.json"));
    CHECK(fs::exists(pooled.output_dir / "recipe_pooled.json"));

    // the pooled model evaluates on a held-out dataset through run_evaluate
    TempDir held("icubench_pool_held");
    mortality_cohort_dir(160, 23, held.path);
    ExperimentConfig eval_cfg = cfg;
    eval_cfg.pool_dirs.clear();
    eval_cfg.data_dir = held.path.string();
    eval_cfg.cv.folds = 3;
    eval_cfg.cv.repetitions = 1;
    auto result = run_evaluate(eval_cfg, pooled.output_dir.string(), "pooled");
    CHECK(result.folds.size() == 3);
    double mean_auroc = 0;
    for (const auto& f : result.folds) mean_auroc += f.metrics.at("auroc");
    CHECK(mean_auroc / 3.0 > 0.55);  // transferred signal beats chance on held-out data
}

TEST_CASE("end-to-end path from raw tables with cohort caching") {
    TempDir raw("icubench_raw_dir"), logs("icubench_raw_logs");
    synthgen::SynthConfig scfg;
    scfg.n_stays = 90;
    scfg.seed = 17;
    synthgen::generate_to_dir(scfg, raw.path);

    ExperimentConfig cfg;
    cfg.data_dir = raw.path.string();
    cfg.dataset_name = "synth";
    cfg.task.id = "mortality";
    cfg.model = "logreg";
    cfg.hyperparams = json{{"C", 1.0}, {"max_iter", 200}, {"tol", 1e-5}};
    cfg.cv.folds = 3;
    cfg.cv.repetitions = 1;
    cfg.seed = 2;
    cfg.log_dir = logs.path.string();
    cfg.generate_cache = true;

    auto first = run_train(cfg);
    CHECK(fs::exists(raw.path / ".cohort_cache" / "mortality" / "sta.csv"));
    CHECK(!first.attrition.steps.empty());  // attrition came from the extraction

    cfg.load_cache = true;
    auto second = run_train(cfg);
    CHECK(strip_wall_clock(first.to_json()) == strip_wall_clock(second.to_json()));
}
