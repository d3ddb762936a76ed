#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "icubench/experiment.hpp"
#include "icubench/synthgen.hpp"

using namespace icubench;

namespace {

// -hp accepts inline json or @path-to-file
json parse_hyperparams_arg(const std::string& arg) {
    if (arg.empty()) return json::object();
    std::string text = arg;
    if (arg[0] == '@') text = read_text_file(arg.substr(1));
    return parse_json_strict(text, "hyperparams");
}

struct CommonArgs {
    std::string data_dir, name = "dataset", task = "mortality", task_name, model = "logreg";
    std::string log_dir = "logs", experiment_file, hyperparams;
    std::uint64_t seed = 0;
    int workers = 1;
    bool load_cache = false, generate_cache = false, verbose = true;
    bool no_features = false, no_static = false, no_scaling = false;
    int folds = 5, repetitions = 5, folds_to_tune = 3, n_init = 10, n_calls = 50;

    // task variation knobs
    double horizon_h = 6.0;
    bool any_future = false, kdigo_ordinal = false;
    double observation_h = 24.0, mortality_min_los_h = 30.0;
    std::string suspicion_mode = "abx_and_culture";
    double abx_continuity_days = 3.0, sofa_delta = 2.0;
    bool exclude_empty_groups = false;

    void add_to(CLI::App* cmd, bool need_data) {
        auto* d = cmd->add_option("-d,--data-dir", data_dir,
                                  "Cohort directory (sta/dyn/outc) or raw directory with source_config.json");
        if (need_data) d->required();
        cmd->add_option("-n,--name", name, "Name of the (target) dataset");
        cmd->add_option("-t,--task", task, "Task id: mortality|aki|sepsis|kidney_function|los");
        cmd->add_option("--task-name", task_name, "Display name used in the log layout");
        cmd->add_option("-m,--model", model, "Model kind: logreg|elasticnet|gbt");
        cmd->add_option("-s,--seed", seed, "Random seed for splits, tuning, and training");
        cmd->add_option("-l,--log-dir", log_dir, "Log directory for results and model files");
        cmd->add_option("-e,--experiment", experiment_file, "Experiment config file (json); flags override");
        cmd->add_option("--hyperparams", hyperparams, "Model hyperparameters as json or @file");
        cmd->add_option("--workers", workers, "Concurrent fold workers");
        cmd->add_flag("--load_cache", load_cache, "Load the extracted-cohort cache when present");
        cmd->add_flag("--generate_cache", generate_cache, "Write the extracted-cohort cache");
        cmd->add_flag("-v,--verbose", verbose, "Verbose logging");
        cmd->add_option("--cv-folds", folds, "Cross-validation folds");
        cmd->add_option("--cv-repetitions", repetitions, "Cross-validation repetitions");
        cmd->add_option("--folds-to-tune", folds_to_tune, "Folds used during hyperparameter tuning");
        cmd->add_option("--n-init", n_init, "Initial random points for tuning");
        cmd->add_option("--n-calls", n_calls, "Total tuning iterations");
        cmd->add_flag("--no-features", no_features, "Skip history feature generation");
        cmd->add_flag("--no-static", no_static, "Drop static predictors");
        cmd->add_flag("--no-scaling", no_scaling, "Skip scaling");
        cmd->add_option("--horizon", horizon_h, "Hourly-label prediction window in hours");
        cmd->add_flag("--any-future", any_future, "Label every pre-onset hour positive");
        cmd->add_flag("--kdigo-ordinal", kdigo_ordinal, "Predict the ordinal stage instead of binary onset");
        cmd->add_option("--observation-hours", observation_h, "Input window for once-per-stay tasks");
        cmd->add_option("--min-los", mortality_min_los_h, "Mortality cohort minimum length of stay (hours)");
        cmd->add_option("--suspicion-mode", suspicion_mode, "abx_and_culture|abx_only");
        cmd->add_option("--abx-continuity-days", abx_continuity_days,
                        "Continuous-antibiotics requirement in days (0 disables)");
        cmd->add_option("--sofa-delta", sofa_delta, "Organ-dysfunction threshold in points");
        cmd->add_flag("--exclude-empty-groups", exclude_empty_groups,
                      "Drop groups without a single positive label (aki/sepsis)");
    }

    experiment::ExperimentConfig to_config() const {
        experiment::ExperimentConfig cfg;
        if (!experiment_file.empty())
            cfg = experiment::parse_experiment_config(read_text_file(experiment_file));
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        if (cfg.data_dir.empty()) throw ConfigError("a data directory is required (-d or config)");
        cfg.dataset_name = name;
        cfg.task.id = task;
        cfg.task.name = task_name;
        cfg.model = model;
        if (!hyperparams.empty()) cfg.hyperparams = parse_hyperparams_arg(hyperparams);
        cfg.seed = seed;
        cfg.log_dir = log_dir;
        cfg.workers = workers;
        cfg.load_cache = load_cache;
        cfg.generate_cache = generate_cache;
        cfg.cv.folds = folds;
        cfg.cv.repetitions = repetitions;
        cfg.cv.folds_to_tune = folds_to_tune;
        cfg.cv.n_init = n_init;
        cfg.cv.n_calls = n_calls;
        cfg.preprocess.generate_features = !no_features;
        cfg.preprocess.use_static = !no_static;
        cfg.preprocess.scaling = !no_scaling;
        cfg.task.hourly.horizon_h = horizon_h;
        cfg.task.hourly.any_future = any_future;
        cfg.task.kdigo_ordinal = kdigo_ordinal;
        cfg.task.observation_h = observation_h;
        cfg.task.mortality_min_los_h = mortality_min_los_h;
        cfg.task.exclude_groups_without_positives = exclude_empty_groups;
        cfg.task.sepsis.abx_continuity_days = abx_continuity_days;
        cfg.task.sepsis.sofa_delta = sofa_delta;
        if (suspicion_mode == "abx_only")
            cfg.task.sepsis.suspicion_mode = labelers::SepsisDefinition::SuspicionMode::abx_only;
        else if (suspicion_mode == "abx_and_culture")
            cfg.task.sepsis.suspicion_mode = labelers::SepsisDefinition::SuspicionMode::abx_and_culture;
        else
            throw ConfigError("unknown suspicion mode '" + suspicion_mode + "'");
        return cfg;
    }
};

void print_summary(const experiment::ResultRecord& record, bool verbose) {
    if (verbose) {
        for (const auto& f : record.folds) {
            std::cout << "  repetition " << f.repetition << " fold " << f.fold << ":";
            for (const auto& [k, v] : f.metrics) std::cout << " " << k << "=" << v;
            std::cout << "\n";
        }
    }
    std::cout << "aggregate:";
    for (const auto& [k, ms] : record.aggregate)
        std::cout << " " << k << "=" << ms.mean << "±" << ms.std;
    std::cout << "\nresults written to " << record.output_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    // the documented short spellings use single-dash multi-char names; CLI11
    // only takes those as long options, so rewrite them up front
    static const std::map<std::string, std::string> aliases = {
        {"-tn", "--task-name"},   {"-sn", "--source-name"},     {"-hp", "--hyperparams"},
        {"-lc", "--load_cache"},  {"-gc", "--generate_cache"},
    };
    std::vector<std::string> rewritten;
    std::vector<char*> argv2;
    for (int i = 0; i < argc; ++i) {
        std::string arg = argv[i];
        auto it = aliases.find(arg);
        rewritten.push_back(it == aliases.end() ? arg : it->second);
    }
    for (auto& s : rewritten) argv2.push_back(s.data());

    CLI::App app{"harmonized ICU cohort extraction and prediction benchmark"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, extract_args;

    auto* train = app.add_subcommand("train", "Tune and train a model under repeated cross-validation");
    train_args.add_to(train, true);
    bool tune = false;
    std::string checkpoint;
    std::vector<std::string> pool_dirs;
    std::int64_t pool_size = 0;
    train->add_flag("--tune", tune, "Find best hyperparameters before the final fits");
    train->add_option("--checkpoint", checkpoint, "Reuse tuned hyperparameters from a previous results.json");
    train->add_option("--pool-dir", pool_dirs, "Additional cohorts for pooled training (repeatable)");
    train->add_option("--pool-size", pool_size, "Stays subsampled per cohort in pooled mode");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate trained models on another dataset");
    eval_args.add_to(evaluate, true);
    std::string source_name, source_dir;
    evaluate->add_option("--source-name", source_name, "Name of the source dataset")->required();
    evaluate->add_option("--source-dir", source_dir, "Directory containing models and fitted recipes")
        ->required();

    auto* extract = app.add_subcommand("extract", "Build a task cohort from raw source tables");
    extract_args.add_to(extract, true);
    std::string out_dir;
    extract->add_option("-o,--out", out_dir, "Output cohort directory")->required();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic raw dataset with ground truth");
    std::string synth_out, synth_config;
    int synth_stays = 1000;
    std::uint64_t synth_seed = 7;
    synth->add_option("-o,--out", synth_out, "Output directory")->required();
    synth->add_option("--stays", synth_stays, "Number of stays");
    synth->add_option("-s,--seed", synth_seed, "Generator seed");
    synth->add_option("--config", synth_config, "Generator config json file (overrides defaults)");

    CLI11_PARSE(app, static_cast<int>(argv2.size()), argv2.data());

    try {
        if (train->parsed()) {
            auto cfg = train_args.to_config();
            cfg.tune = tune;
            cfg.checkpoint = checkpoint;
            cfg.pool_dirs = pool_dirs;
            cfg.pool_size = pool_size;
            auto record = experiment::run_train(cfg);
            print_summary(record, train_args.verbose);
        } else if (evaluate->parsed()) {
            auto cfg = eval_args.to_config();
            auto record = experiment::run_evaluate(cfg, source_dir, source_name);
            print_summary(record, eval_args.verbose);
        } else if (extract->parsed()) {
            auto cfg = extract_args.to_config();
            auto cohort = experiment::extract_cohort(cfg.data_dir, cfg);
            cohort::write_cohort(cohort.bundle, out_dir);
            write_text_file(std::filesystem::path(out_dir) / "attrition.json",
                            cohort.attrition.to_json().dump(2) + "\n");
            std::cout << "cohort with " << cohort.stay_ids.size() << " stays written to " << out_dir
                      << "\n";
            if (extract_args.verbose) {
                for (const auto& s : cohort.attrition.steps)
                    std::cout << "  " << s.criterion << ": " << s.n_before << " -> " << s.n_after << " (-"
                              << s.n_excluded << ")\n";
            }
        } else if (synth->parsed()) {
            synthgen::SynthConfig cfg;
            if (!synth_config.empty())
                cfg = synthgen::SynthConfig::from_json(
                    parse_json_strict(read_text_file(synth_config), "synth config"));
            if (synth->count("--stays")) cfg.n_stays = synth_stays;
            if (synth->count("--seed")) cfg.seed = synth_seed;
            synthgen::generate_to_dir(cfg, synth_out);
            std::cout << "synthetic dataset with " << cfg.n_stays << " stays written to " << synth_out
                      << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
