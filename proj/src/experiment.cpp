#include "icubench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "icubench/synthgen.hpp"

namespace icubench::experiment {

using cohort::CohortBundle;

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    int count = std::min<int>(workers, static_cast<int>(n));
    std::mutex error_mutex;
    std::exception_ptr error;
    for (int w = 0; w < count; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

bool is_classification(const cohort::TaskOptions& task) {
    if (task.id == "aki" && task.kdigo_ordinal) return false;  // ordinal stage via regression
    return task.id == "mortality" || task.id == "aki" || task.id == "sepsis";
}

json default_space(const std::string& model_kind) {
    if (model_kind == "logreg") {
        return json{
            {"C", {{"kind", "log_uniform"}, {"a", 1e-3}, {"b", 1e1}}},
            {"penalty", {{"kind", "choice"}, {"values", {"l1", "l2", "elasticnet"}}}},
            {"l1_ratio", {{"kind", "uniform"}, {"a", 0.0}, {"b", 1.0}}},
        };
    }
    if (model_kind == "elasticnet") {
        return json{
            {"alpha", {{"kind", "log_uniform"}, {"a", 1e-2}, {"b", 1e1}}},
            {"tol", {{"kind", "log_uniform"}, {"a", 1e-5}, {"b", 1e-1}}},
            {"l1_ratio", {{"kind", "uniform"}, {"a", 0.0}, {"b", 1.0}}},
        };
    }
    if (model_kind == "gbt") {
        return json{
            {"colsample", {{"kind", "uniform"}, {"a", 0.33}, {"b", 1.0}}},
            {"subsample", {{"kind", "uniform"}, {"a", 0.33}, {"b", 1.0}}},
            {"num_leaves", {{"kind", "log_uniform"}, {"a", 8}, {"b", 128}}},
            {"max_depth", {{"kind", "randint"}, {"a", 3}, {"b", 7}}},
        };
    }
    throw ConfigError("unknown model kind '" + model_kind + "' (available: logreg, elasticnet, gbt)");
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = seed + 0x9e3779b97f4a7c15ull;
    for (std::uint64_t v : {a + 1, b + 1}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdull;
        h ^= h >> 33;
    }
    return h;
}

double get_num(const json& hp, const char* key, double fallback) {
    auto it = hp.find(key);
    if (it == hp.end()) return fallback;
    if (!it->is_number()) throw ConfigError(std::string("hyperparameter '") + key + "' must be numeric");
    return it->get<double>();
}

int get_int(const json& hp, const char* key, int fallback) {
    return static_cast<int>(std::llround(get_num(hp, key, fallback)));
}

bool get_flag(const json& hp, const char* key, bool fallback) {
    auto it = hp.find(key);
    if (it == hp.end()) return fallback;
    if (!it->is_boolean()) throw ConfigError(std::string("hyperparameter '") + key + "' must be boolean");
    return it->get<bool>();
}

void reject_unknown_hp(const json& hp, const std::set<std::string>& known, const std::string& kind) {
    for (auto it = hp.begin(); it != hp.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown hyperparameter '" + it.key() + "' for model " + kind);
}

// accepts either {"balanced": bool} or {"class_weight": "balanced"|"none"}
bool class_weight_flag(const json& hp, bool fallback) {
    if (hp.contains("class_weight")) {
        std::string w = hp["class_weight"].get<std::string>();
        if (w == "balanced") return true;
        if (w == "none") return false;
        throw ConfigError("class_weight must be 'balanced' or 'none'");
    }
    return get_flag(hp, "balanced", fallback);
}

}  // namespace

models::TrainedModel train_model(const std::string& kind, const json& hp, bool classification,
                                 std::uint64_t seed, const ModelData& train, const ModelData* val) {
    if (kind == "logreg") {
        if (!classification) throw ConfigError("logreg supports classification tasks only");
        reject_unknown_hp(hp, {"C", "penalty", "l1_ratio", "max_iter", "tol", "balanced", "class_weight"},
                          kind);
        models::LogRegParams p;
        p.C = get_num(hp, "C", 1.0);
        p.l1_ratio = get_num(hp, "l1_ratio", 0.5);
        p.max_iter = get_int(hp, "max_iter", 100000);
        p.tol = get_num(hp, "tol", 1e-7);
        p.balanced = class_weight_flag(hp, true);
        std::string penalty = hp.value("penalty", std::string("l2"));
        if (penalty == "l1") p.penalty = models::Penalty::l1;
        else if (penalty == "l2") p.penalty = models::Penalty::l2;
        else if (penalty == "elasticnet") p.penalty = models::Penalty::elasticnet;
        else throw ConfigError("unknown penalty '" + penalty + "'");
        return models::train_logreg(train.x, train.y, p);
    }
    if (kind == "elasticnet") {
        if (classification) throw ConfigError("elasticnet supports regression tasks only");
        reject_unknown_hp(hp, {"alpha", "l1_ratio", "tol", "max_iter"}, kind);
        models::ElasticNetParams p;
        p.alpha = get_num(hp, "alpha", 1.0);
        p.l1_ratio = get_num(hp, "l1_ratio", 0.5);
        p.tol = get_num(hp, "tol", 1e-6);
        p.max_iter = get_int(hp, "max_iter", 10000);
        return models::train_elasticnet(train.x, train.y, p);
    }
    if (kind == "gbt") {
        reject_unknown_hp(hp,
                          {"learning_rate", "num_leaves", "max_depth", "colsample", "subsample",
                           "subsample_freq", "n_estimators", "min_child_samples", "early_stopping_rounds",
                           "balanced", "class_weight", "max_bins"},
                          kind);
        models::GbtParams p;
        p.learning_rate = get_num(hp, "learning_rate", 0.1);
        p.num_leaves = get_int(hp, "num_leaves", 31);
        p.max_depth = get_int(hp, "max_depth", -1);
        p.colsample = get_num(hp, "colsample", 1.0);
        p.subsample = get_num(hp, "subsample", 1.0);
        p.subsample_freq = get_int(hp, "subsample_freq", 1);
        p.n_estimators = get_int(hp, "n_estimators", 10000);
        p.min_child_samples = get_int(hp, "min_child_samples", 1000);
        p.early_stopping_rounds = get_int(hp, "early_stopping_rounds", 10);
        p.balanced = classification && class_weight_flag(hp, true);
        p.max_bins = get_int(hp, "max_bins", 255);
        p.seed = seed;
        auto task = classification ? models::TaskKind::classification : models::TaskKind::regression;
        if (val) return models::train_gbt(train.x, train.y, p, task, &val->x, val->y);
        return models::train_gbt(train.x, train.y, p, task);
    }
    throw ConfigError("unknown model kind '" + kind + "' (available: logreg, elasticnet, gbt)");
}

CohortBundle bundle_subset(const CohortBundle& bundle, const std::vector<std::int64_t>& ids) {
    std::set<std::int64_t> keep(ids.begin(), ids.end());
    auto filter = [&](const Frame& f) {
        const auto& col = f.i64(bundle.vars.group);
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < col.size(); ++r)
            if (keep.count(col[r])) rows.push_back(r);
        return f.select_rows(rows);
    };
    CohortBundle out;
    out.sta = filter(bundle.sta);
    out.dyn = filter(bundle.dyn);
    out.outc = filter(bundle.outc);
    out.vars = bundle.vars;
    return out;
}

ModelData make_model_data(const CohortBundle& transformed, const CohortBundle& raw, bool use_static) {
    const auto& vars = transformed.vars;
    bool hourly = transformed.outc.has(vars.sequence);

    std::vector<std::string> feature_names;
    if (use_static)
        for (const auto& c : vars.statics) feature_names.push_back(c);
    for (const auto& c : vars.dynamic) feature_names.push_back(c);

    // per-stay static row and raw sex lookup
    std::map<std::int64_t, std::size_t> sta_row;
    {
        const auto& ids = transformed.sta.i64(vars.group);
        for (std::size_t r = 0; r < ids.size(); ++r) sta_row[ids[r]] = r;
    }
    std::map<std::int64_t, double> raw_sex;
    if (raw.sta.has("sex")) {
        const auto& ids = raw.sta.i64(vars.group);
        const auto& sex = raw.sta.f64("sex");
        for (std::size_t r = 0; r < ids.size(); ++r) raw_sex[ids[r]] = sex[r];
    }

    // dynamic row index: hourly joins on (stay, time), once-per-stay takes the
    // stay's last observation row
    const auto& dyn_ids = transformed.dyn.i64(vars.group);
    const auto& dyn_time = transformed.dyn.i64(vars.sequence);
    std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> dyn_at;
    std::map<std::int64_t, std::size_t> dyn_last;
    for (std::size_t r = 0; r < dyn_ids.size(); ++r) {
        dyn_at[{dyn_ids[r], dyn_time[r]}] = r;
        auto it = dyn_last.find(dyn_ids[r]);
        if (it == dyn_last.end() || dyn_time[r] > dyn_time[it->second]) dyn_last[dyn_ids[r]] = r;
    }

    std::vector<const std::vector<double>*> sta_cols, dyn_cols;
    if (use_static)
        for (const auto& c : vars.statics) sta_cols.push_back(&transformed.sta.f64(c));
    for (const auto& c : vars.dynamic) dyn_cols.push_back(&transformed.dyn.f64(c));

    const auto& out_ids = transformed.outc.i64(vars.group);
    const auto& labels = transformed.outc.f64(vars.label);

    ModelData data;
    data.x.d = feature_names.size();
    data.x.names = feature_names;
    std::size_t n = out_ids.size();
    data.x.values.reserve(n * data.x.d);

    for (std::size_t r = 0; r < n; ++r) {
        std::int64_t stay = out_ids[r];
        std::size_t dyn_row;
        if (hourly) {
            auto key = std::make_pair(stay, transformed.outc.i64(vars.sequence)[r]);
            auto it = dyn_at.find(key);
            if (it == dyn_at.end()) continue;  // outcome row without features (should not happen)
            dyn_row = it->second;
        } else {
            auto it = dyn_last.find(stay);
            if (it == dyn_last.end()) continue;
            dyn_row = it->second;
        }
        auto sit = sta_row.find(stay);
        if (sit == sta_row.end()) continue;
        for (const auto* col : sta_cols) data.x.values.push_back((*col)[sit->second]);
        for (const auto* col : dyn_cols) data.x.values.push_back((*col)[dyn_row]);
        data.y.push_back(labels[r]);
        data.stays.push_back(stay);
        auto sx = raw_sex.find(stay);
        data.sex.push_back(sx == raw_sex.end() ? kMissing : sx->second);
    }
    data.x.n = data.y.size();
    return data;
}

namespace {

double log_loss(std::span<const double> probs, std::span<const double> labels) {
    double s = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
        s -= labels[i] > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    return probs.empty() ? 0.0 : s / static_cast<double>(probs.size());
}

FoldResult score_fold(int r, int k, bool classification, const std::vector<double>& scores,
                      const ModelData& test) {
    FoldResult fr;
    fr.repetition = r;
    fr.fold = k;
    if (classification) {
        fr.metrics["auroc"] = metrics::auroc(scores, test.y);
        fr.metrics["auprc"] = metrics::auprc(scores, test.y);
        fr.metrics["calibration_error"] = metrics::calibration_error(scores, test.y);
        fr.metrics["accuracy"] = metrics::accuracy(scores, test.y);
        fr.metrics["log_loss"] = log_loss(scores, test.y);
        fr.metrics["jsd"] = metrics::jsd(scores, test.y);
        bool have_sex = !test.sex.empty();
        for (double s : test.sex)
            if (is_missing(s)) have_sex = false;
        if (have_sex)
            fr.metrics["demographic_parity_ratio"] = metrics::demographic_parity_ratio(scores, test.sex);
        fr.curves["calibration"] = metrics::calibration_curve(scores, test.y);
        fr.curves["roc"] = metrics::roc_curve(scores, test.y);
        fr.curves["pr"] = metrics::pr_curve(scores, test.y);
    } else {
        fr.metrics["mae"] = metrics::mae(scores, test.y);
        fr.metrics["jsd"] = metrics::jsd(scores, test.y);
    }
    return fr;
}

std::string timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
    return buf;
}

std::filesystem::path make_output_dir(const ExperimentConfig& config) {
    std::filesystem::path base = std::filesystem::path(config.log_dir) / config.dataset_name /
                                 (config.task.name.empty() ? config.task.id : config.task.name) /
                                 config.model;
    std::string stamp = timestamp_now();
    auto dir = base / stamp;
    for (int i = 2; std::filesystem::exists(dir); ++i) dir = base / (stamp + "-" + std::to_string(i));
    std::filesystem::create_directories(dir);
    return dir;
}

std::string fold_tag(int r, int k) { return "r" + std::to_string(r) + "_f" + std::to_string(k); }

json read_json_file(const std::filesystem::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_json_strict(text, what);
}

struct LoadedCohort {
    CohortBundle bundle;
    cohort::AttritionReport attrition;
};

LoadedCohort load_or_extract(const ExperimentConfig& config) {
    namespace fs = std::filesystem;
    fs::path dir = config.data_dir;
    LoadedCohort out;
    if (fs::exists(dir / "sta.csv") || fs::exists(dir / "sta.csv.gz") || fs::exists(dir / "sta.parquet")) {
        out.bundle = cohort::read_cohort(dir);
        if (fs::exists(dir / "attrition.json"))
            out.attrition =
                cohort::AttritionReport::from_json(read_json_file(dir / "attrition.json", "attrition"));
        return out;
    }
    if (fs::exists(dir / "source_config.json")) {
        fs::path cache = dir / ".cohort_cache" / config.task.id;
        if (config.load_cache && fs::exists(cache / "sta.csv")) {
            out.bundle = cohort::read_cohort(cache);
            if (fs::exists(cache / "attrition.json"))
                out.attrition = cohort::AttritionReport::from_json(
                    read_json_file(cache / "attrition.json", "attrition"));
            return out;
        }
        auto task_cohort = extract_cohort(dir, config);
        out.bundle = std::move(task_cohort.bundle);
        out.attrition = std::move(task_cohort.attrition);
        if (config.generate_cache) {
            cohort::write_cohort(out.bundle, cache);
            write_text_file(cache / "attrition.json", out.attrition.to_json().dump(2) + "\n");
        }
        return out;
    }
    throw DataError("data dir " + dir.string() +
                    " holds neither a cohort (sta.csv) nor raw tables (source_config.json)");
}

}  // namespace

cohort::TaskCohort extract_cohort(const std::filesystem::path& raw_dir, const ExperimentConfig& config) {
    auto src = harmonize::parse_source_config(read_text_file(raw_dir / "source_config.json"));
    std::filesystem::path concepts_path = raw_dir / "concepts.json";
    if (!std::filesystem::exists(concepts_path))
        throw DataError("missing concepts.json next to source_config.json in " + raw_dir.string());
    auto dict = harmonize::parse_concept_dictionary(read_text_file(concepts_path));
    auto raw = harmonize::load_raw_tables(raw_dir, src);
    std::vector<std::string> features;
    for (const auto& name : synthgen::dynamic_feature_names())
        if (dict.has(name) && dict.at(name).sources.count(src.name)) features.push_back(name);
    if (features.empty()) throw DataError("no dynamic feature concepts available for dataset " + src.name);
    return cohort::build_task_cohort(raw, src, dict, src.name, config.task, features);
}

json ExperimentConfig::to_json() const {
    json j;
    j["data_dir"] = data_dir;
    j["dataset_name"] = dataset_name;
    json t;
    t["id"] = task.id;
    t["horizon_h"] = task.hourly.horizon_h;
    t["any_future"] = task.hourly.any_future;
    t["kdigo_ordinal"] = task.kdigo_ordinal;
    t["observation_h"] = task.observation_h;
    t["exclude_groups_without_positives"] = task.exclude_groups_without_positives;
    t["mortality_min_los_h"] = task.mortality_min_los_h;
    json s;
    s["sofa_delta"] = task.sepsis.sofa_delta;
    s["sofa_lookback_h"] = task.sepsis.sofa_lookback_h;
    s["window_before_h"] = task.sepsis.window_before_h;
    s["window_after_h"] = task.sepsis.window_after_h;
    s["culture_after_abx_max_h"] = task.sepsis.culture_after_abx_max_h;
    s["abx_after_culture_max_h"] = task.sepsis.abx_after_culture_max_h;
    s["abx_continuity_days"] = task.sepsis.abx_continuity_days;
    s["suspicion_mode"] =
        task.sepsis.suspicion_mode == labelers::SepsisDefinition::SuspicionMode::abx_only ? "abx_only"
                                                                                          : "abx_and_culture";
    t["sepsis"] = s;
    j["task"] = t;
    j["model"] = json{{"kind", model}, {"hyperparams", hyperparams}, {"space", space}};
    j["tune"] = tune;
    j["cv"] = json{{"folds", cv.folds},
                   {"repetitions", cv.repetitions},
                   {"folds_to_tune", cv.folds_to_tune},
                   {"n_init", cv.n_init},
                   {"n_calls", cv.n_calls}};
    j["preprocess"] = json{{"generate_features", preprocess.generate_features},
                           {"scaling", preprocess.scaling},
                           {"use_static", preprocess.use_static}};
    if (!recipe.is_null()) j["recipe"] = recipe;
    j["seed"] = seed;
    j["log_dir"] = log_dir;
    j["workers"] = workers;
    if (!pool_dirs.empty()) {
        j["pool_dirs"] = pool_dirs;
        j["pool_size"] = pool_size;
    }
    if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
    return j;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    json root = parse_json_strict(text, "experiment config");
    auto c = cursor(root, "experiment");
    c.require_object();
    c.reject_unknown_keys({"data_dir", "dataset_name", "task", "model", "tune", "cv", "preprocess",
                           "recipe", "seed", "log_dir", "workers", "pool_dirs", "pool_size", "checkpoint"});
    ExperimentConfig cfg;
    cfg.task.id = "mortality";
    cfg.data_dir = c.at("data_dir").get_string();
    cfg.dataset_name = c.str_or("dataset_name", cfg.dataset_name);
    if (c.has("task")) {
        auto t = c.at("task");
        if (t.node->is_string()) {
            cfg.task.id = t.get_string();
        } else {
            t.reject_unknown_keys({"id", "name", "horizon_h", "any_future", "kdigo_ordinal",
                                   "observation_h", "exclude_groups_without_positives",
                                   "mortality_min_los_h", "sepsis"});
            cfg.task.id = t.at("id").get_string();
            cfg.task.name = t.str_or("name", "");
            cfg.task.hourly.horizon_h = t.num_or("horizon_h", cfg.task.hourly.horizon_h);
            cfg.task.hourly.any_future = t.bool_or("any_future", cfg.task.hourly.any_future);
            cfg.task.kdigo_ordinal = t.bool_or("kdigo_ordinal", cfg.task.kdigo_ordinal);
            cfg.task.observation_h = t.num_or("observation_h", cfg.task.observation_h);
            cfg.task.exclude_groups_without_positives =
                t.bool_or("exclude_groups_without_positives", false);
            cfg.task.mortality_min_los_h = t.num_or("mortality_min_los_h", cfg.task.mortality_min_los_h);
            if (t.has("sepsis")) {
                auto s = t.at("sepsis");
                s.reject_unknown_keys({"sofa_delta", "sofa_lookback_h", "window_before_h", "window_after_h",
                                       "culture_after_abx_max_h", "abx_after_culture_max_h",
                                       "abx_continuity_days", "suspicion_mode"});
                auto& d = cfg.task.sepsis;
                d.sofa_delta = s.num_or("sofa_delta", d.sofa_delta);
                d.sofa_lookback_h = s.num_or("sofa_lookback_h", d.sofa_lookback_h);
                d.window_before_h = s.num_or("window_before_h", d.window_before_h);
                d.window_after_h = s.num_or("window_after_h", d.window_after_h);
                d.culture_after_abx_max_h = s.num_or("culture_after_abx_max_h", d.culture_after_abx_max_h);
                d.abx_after_culture_max_h = s.num_or("abx_after_culture_max_h", d.abx_after_culture_max_h);
                d.abx_continuity_days = s.num_or("abx_continuity_days", d.abx_continuity_days);
                std::string mode = s.str_or("suspicion_mode", "abx_and_culture");
                if (mode == "abx_only")
                    d.suspicion_mode = labelers::SepsisDefinition::SuspicionMode::abx_only;
                else if (mode == "abx_and_culture")
                    d.suspicion_mode = labelers::SepsisDefinition::SuspicionMode::abx_and_culture;
                else s.at("suspicion_mode").fail("unknown suspicion mode '" + mode + "'");
            }
        }
    }
    if (c.has("model")) {
        auto m = c.at("model");
        if (m.node->is_string()) {
            cfg.model = m.get_string();
        } else {
            m.reject_unknown_keys({"kind", "hyperparams", "space"});
            cfg.model = m.at("kind").get_string();
            if (m.has("hyperparams")) cfg.hyperparams = *m.at("hyperparams").node;
            if (m.has("space")) cfg.space = *m.at("space").node;
        }
    }
    cfg.tune = c.bool_or("tune", false);
    if (c.has("cv")) {
        auto cv = c.at("cv");
        cv.reject_unknown_keys({"folds", "repetitions", "folds_to_tune", "n_init", "n_calls"});
        cfg.cv.folds = static_cast<int>(cv.int_or("folds", cfg.cv.folds));
        cfg.cv.repetitions = static_cast<int>(cv.int_or("repetitions", cfg.cv.repetitions));
        cfg.cv.folds_to_tune = static_cast<int>(cv.int_or("folds_to_tune", cfg.cv.folds_to_tune));
        cfg.cv.n_init = static_cast<int>(cv.int_or("n_init", cfg.cv.n_init));
        cfg.cv.n_calls = static_cast<int>(cv.int_or("n_calls", cfg.cv.n_calls));
    }
    if (c.has("preprocess")) {
        auto p = c.at("preprocess");
        p.reject_unknown_keys({"generate_features", "scaling", "use_static"});
        cfg.preprocess.generate_features = p.bool_or("generate_features", true);
        cfg.preprocess.scaling = p.bool_or("scaling", true);
        cfg.preprocess.use_static = p.bool_or("use_static", true);
    }
    if (c.has("recipe")) cfg.recipe = *c.at("recipe").node;
    cfg.seed = static_cast<std::uint64_t>(c.int_or("seed", 0));
    cfg.log_dir = c.str_or("log_dir", cfg.log_dir);
    cfg.workers = static_cast<int>(c.int_or("workers", 1));
    if (c.has("pool_dirs")) {
        auto pd = c.at("pool_dirs");
        pd.require_array();
        for (std::size_t i = 0; i < pd.node->size(); ++i) cfg.pool_dirs.push_back(pd.at(i).get_string());
        cfg.pool_size = c.int_or("pool_size", 0);
    }
    cfg.checkpoint = c.str_or("checkpoint", "");
    return cfg;
}

json ResultRecord::to_json() const {
    json folds_json = json::array();
    for (const auto& f : folds) {
        json fj = {{"repetition", f.repetition}, {"fold", f.fold}, {"metrics", f.metrics}};
        json curves = json::object();
        for (const auto& [name, pts] : f.curves) {
            json arr = json::array();
            for (const auto& p : pts) arr.push_back({p.x, p.y});
            curves[name] = std::move(arr);
        }
        fj["curves"] = std::move(curves);
        folds_json.push_back(std::move(fj));
    }
    json agg = json::object();
    for (const auto& [name, ms] : aggregate) agg[name] = {{"mean", ms.mean}, {"std", ms.std}};
    return json{{"config", config},
                {"folds", folds_json},
                {"aggregate", agg},
                {"wall_clock_s", wall_clock_s}};
}

namespace {

struct Prepared {
    LoadedCohort cohort;
    tuner::SplitPlan plan;
    recipes::Recipe recipe;
    bool classification = false;
};

Prepared prepare(const ExperimentConfig& config) {
    Prepared prep;
    prep.cohort = load_or_extract(config);
    prep.classification = is_classification(config.task);
    if (!prep.cohort.bundle.vars.statics.empty() && !config.preprocess.use_static) {
        prep.cohort.bundle.vars.statics.clear();
    }
    const auto& ids = prep.cohort.bundle.sta.i64(prep.cohort.bundle.vars.group);
    prep.plan = tuner::make_splits({ids.begin(), ids.end()}, config.cv.folds, config.cv.repetitions,
                                   config.seed);
    if (!config.recipe.is_null()) prep.recipe = recipes::Recipe::from_json(config.recipe);
    else prep.recipe = recipes::default_recipe(config.preprocess.generate_features, config.preprocess.scaling);
    return prep;
}

// recipe fitting depends on the split, not the hyperparameters, so the
// transformed fold data is computed once and shared across tuning trials
struct CellData {
    recipes::FittedRecipe fitted;
    ModelData train, val, test;
};

CellData prepare_cell(const ExperimentConfig& config, const Prepared& prep, int r, int k) {
    const auto& cell = prep.plan.at(r, k);
    auto train_raw = bundle_subset(prep.cohort.bundle, cell.train);
    auto val_raw = bundle_subset(prep.cohort.bundle, cell.val);
    auto test_raw = bundle_subset(prep.cohort.bundle, cell.test);

    CellData data;
    data.fitted = recipes::fit(prep.recipe, train_raw);
    data.train = make_model_data(recipes::apply(data.fitted, train_raw), train_raw,
                                 config.preprocess.use_static);
    data.val = make_model_data(recipes::apply(data.fitted, val_raw), val_raw, config.preprocess.use_static);
    data.test = make_model_data(recipes::apply(data.fitted, test_raw), test_raw,
                                config.preprocess.use_static);
    return data;
}

struct CellArtifacts {
    FoldResult result;
    models::TrainedModel model;
    recipes::FittedRecipe fitted;
};

CellArtifacts run_cell(const ExperimentConfig& config, const Prepared& prep, int r, int k, const json& hp,
                       CellData&& data) {
    CellArtifacts art;
    art.fitted = std::move(data.fitted);
    std::uint64_t cell_seed = mix_seed(config.seed, static_cast<std::uint64_t>(r),
                                       static_cast<std::uint64_t>(k));
    art.model = train_model(config.model, hp, prep.classification, cell_seed, data.train, &data.val);
    auto scores = art.model.predict(data.test.x);
    art.result = score_fold(r, k, prep.classification, scores, data.test);
    return art;
}

// Pooled external-validation training: equal-size subsamples of several
// cohorts, one model fit with an 80/20 grouped train/val split.
ResultRecord run_pooled_train(const ExperimentConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> dirs{config.data_dir};
    dirs.insert(dirs.end(), config.pool_dirs.begin(), config.pool_dirs.end());

    std::vector<CohortBundle> bundles;
    std::int64_t smallest = std::numeric_limits<std::int64_t>::max();
    for (const auto& d : dirs) {
        ExperimentConfig sub = config;
        sub.data_dir = d;
        bundles.push_back(load_or_extract(sub).bundle);
        smallest = std::min(smallest, static_cast<std::int64_t>(bundles.back().sta.nrow()));
    }
    std::int64_t per_cohort = config.pool_size > 0 ? std::min(config.pool_size, smallest) : smallest;

    // subsample each cohort and remap stay ids into disjoint ranges
    std::mt19937_64 rng(config.seed);
    CohortBundle pooled;
    pooled.vars = bundles.front().vars;
    for (std::size_t b = 0; b < bundles.size(); ++b) {
        auto ids = bundles[b].sta.i64(pooled.vars.group);
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(static_cast<std::size_t>(std::min<std::int64_t>(per_cohort,
                                                                   static_cast<std::int64_t>(ids.size()))));
        auto part = bundle_subset(bundles[b], ids);
        std::int64_t offset = static_cast<std::int64_t>(b + 1) * 1000000000ll;
        for (Frame* f : {&part.sta, &part.dyn, &part.outc})
            for (auto& id : f->i64(pooled.vars.group)) id += offset;
        if (b == 0) {
            pooled = std::move(part);
        } else {
            if (part.dyn.names() != pooled.dyn.names())
                throw DataError("pooled cohorts have mismatching feature schemas");
            for (Frame* dst : {&pooled.sta, &pooled.dyn, &pooled.outc}) {
                const Frame& src = dst == &pooled.sta ? part.sta : dst == &pooled.dyn ? part.dyn : part.outc;
                for (std::size_t cidx = 0; cidx < dst->ncol(); ++cidx) {
                    std::visit(
                        [&](auto& col) {
                            using T = std::decay_t<decltype(col)>;
                            const auto& other = std::get<T>(src.column(cidx));
                            col.insert(col.end(), other.begin(), other.end());
                        },
                        dst->column(cidx));
                }
            }
        }
    }

    bool classification = is_classification(config.task);
    auto recipe = config.recipe.is_null()
                      ? recipes::default_recipe(config.preprocess.generate_features, config.preprocess.scaling)
                      : recipes::Recipe::from_json(config.recipe);

    // 80/20 grouped holdout
    auto ids = pooled.sta.i64(pooled.vars.group);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::size_t n_val = std::max<std::size_t>(1, ids.size() / 5);
    std::vector<std::int64_t> val_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::int64_t> train_ids(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());

    auto train_raw = bundle_subset(pooled, train_ids);
    auto val_raw = bundle_subset(pooled, val_ids);
    auto fitted = recipes::fit(recipe, train_raw);
    auto train = make_model_data(recipes::apply(fitted, train_raw), train_raw, config.preprocess.use_static);
    auto val = make_model_data(recipes::apply(fitted, val_raw), val_raw, config.preprocess.use_static);
    auto model = train_model(config.model, config.hyperparams, classification, config.seed, train, &val);
    auto scores = model.predict(val.x);

    ResultRecord record;
    record.folds.push_back(score_fold(0, 0, classification, scores, val));
    record.aggregate = metrics::aggregate({record.folds[0].metrics});
    record.config = config.to_json();
    record.config["mode"] = "pooled_train";
    record.config["pooled_stays_per_cohort"] = per_cohort;
    record.config["best_hyperparams"] = config.hyperparams;
    record.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto dir = make_output_dir(config);
    record.output_dir = dir;
    write_text_file(dir / "results.json", record.to_json().dump(2) + "\n");
    model.save(dir / "model_pooled.json");
    write_text_file(dir / "recipe_pooled.json", fitted.to_json().dump() + "\n");
    return record;
}

}  // namespace

ResultRecord run_train(const ExperimentConfig& config) {
    if (!config.pool_dirs.empty()) return run_pooled_train(config);
    auto t0 = std::chrono::steady_clock::now();
    auto prep = prepare(config);

    json resolved_hp = config.hyperparams;
    json trials = json::array();
    if (!config.checkpoint.empty()) {
        auto prev = read_json_file(config.checkpoint, "checkpoint results");
        if (prev.contains("config") && prev["config"].contains("best_hyperparams"))
            resolved_hp = prev["config"]["best_hyperparams"];
        else
            throw ConfigError("checkpoint " + config.checkpoint + " carries no best_hyperparams");
    } else if (config.tune) {
        json space_json = config.space.empty() ? default_space(config.model) : config.space;
        auto space = tuner::parse_param_space(cursor(space_json, "space"));
        int folds_to_tune = std::min(config.cv.folds_to_tune, config.cv.folds);

        // tuning happens on the first repetition's first folds
        std::vector<CellData> tune_cells(static_cast<std::size_t>(folds_to_tune));
        parallel_for(static_cast<std::size_t>(folds_to_tune), config.workers,
                     [&](std::size_t k) { tune_cells[k] = prepare_cell(config, prep, 0, static_cast<int>(k)); });

        int trial_index = 0;
        auto objective = [&](const json& point) {
            json hp = config.hyperparams;
            for (auto it = point.begin(); it != point.end(); ++it) hp[it.key()] = it.value();
            double sum = 0;
            for (int k = 0; k < folds_to_tune; ++k) {
                const auto& cell = tune_cells[static_cast<std::size_t>(k)];
                std::uint64_t trial_seed =
                    mix_seed(config.seed, static_cast<std::uint64_t>(k),
                             static_cast<std::uint64_t>(trial_index));
                auto model = train_model(config.model, hp, prep.classification, trial_seed, cell.train,
                                         &cell.val);
                auto scores = model.predict(cell.val.x);
                sum += prep.classification ? -metrics::auroc(scores, cell.val.y)
                                           : metrics::mae(scores, cell.val.y);
            }
            ++trial_index;
            return sum / folds_to_tune;
        };
        tuner::OptimizeOptions opts;
        opts.n_init = config.cv.n_init;
        opts.n_calls = config.cv.n_calls;
        opts.seed = config.seed;
        auto best = tuner::bayes_optimize(space, objective, opts);
        for (auto it = best.best_point.begin(); it != best.best_point.end(); ++it)
            resolved_hp[it.key()] = it.value();
        for (const auto& trial : best.trials) trials.push_back(trial.to_json());
    }

    ResultRecord record;
    record.attrition = prep.cohort.attrition;

    int total = config.cv.repetitions * config.cv.folds;
    std::vector<CellArtifacts> cells(static_cast<std::size_t>(total));
    parallel_for(static_cast<std::size_t>(total), config.workers, [&](std::size_t i) {
        int r = static_cast<int>(i) / config.cv.folds;
        int k = static_cast<int>(i) % config.cv.folds;
        cells[i] = run_cell(config, prep, r, k, resolved_hp, prepare_cell(config, prep, r, k));
    });

    std::vector<std::map<std::string, double>> per_fold;
    for (auto& cell : cells) {
        record.folds.push_back(cell.result);
        per_fold.push_back(cell.result.metrics);
    }
    record.aggregate = metrics::aggregate(per_fold);

    record.config = config.to_json();
    record.config["best_hyperparams"] = resolved_hp;
    record.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto dir = make_output_dir(config);
    record.output_dir = dir;
    write_text_file(dir / "results.json", record.to_json().dump(2) + "\n");
    write_text_file(dir / "attrition.json", record.attrition.to_json().dump(2) + "\n");
    if (!trials.empty()) write_text_file(dir / "trials.json", trials.dump(2) + "\n");
    for (int i = 0; i < total; ++i) {
        int r = i / config.cv.folds;
        int k = i % config.cv.folds;
        cells[static_cast<std::size_t>(i)].model.save(dir / ("model_" + fold_tag(r, k) + ".json"));
        write_text_file(dir / ("recipe_" + fold_tag(r, k) + ".json"),
                        cells[static_cast<std::size_t>(i)].fitted.to_json().dump() + "\n");
    }
    return record;
}

ResultRecord run_evaluate(const ExperimentConfig& config, const std::string& source_dir,
                          const std::string& source_name) {
    namespace fs = std::filesystem;
    auto t0 = std::chrono::steady_clock::now();
    auto prep = prepare(config);

    ResultRecord record;
    record.attrition = prep.cohort.attrition;

    bool pooled = fs::exists(fs::path(source_dir) / "model_pooled.json");
    std::vector<std::map<std::string, double>> per_fold;
    int total = config.cv.repetitions * config.cv.folds;
    std::vector<FoldResult> results(static_cast<std::size_t>(total));
    parallel_for(static_cast<std::size_t>(total), config.workers, [&](std::size_t i) {
        int r = static_cast<int>(i) / config.cv.folds;
        int k = static_cast<int>(i) % config.cv.folds;
        std::string tag = pooled ? "pooled" : fold_tag(r, k);
        auto model = models::TrainedModel::load(fs::path(source_dir) / ("model_" + tag + ".json"));
        auto fitted = recipes::FittedRecipe::from_json(read_json_file(
            fs::path(source_dir) / ("recipe_" + tag + ".json"), "fitted recipe"));

        auto test_raw = bundle_subset(prep.cohort.bundle, prep.plan.at(r, k).test);
        auto test = make_model_data(recipes::apply(fitted, test_raw), test_raw,
                                    config.preprocess.use_static);
        if (test.x.names != model.feature_names)
            throw DataError("feature-name mismatch between source model and target cohort");
        auto scores = model.predict(test.x);
        results[i] = score_fold(r, k, prep.classification, scores, test);
    });
    for (auto& fr : results) {
        record.folds.push_back(fr);
        per_fold.push_back(fr.metrics);
    }
    record.aggregate = metrics::aggregate(per_fold);
    record.config = config.to_json();
    record.config["mode"] = "evaluate";
    record.config["source_dir"] = source_dir;
    record.config["source_name"] = source_name;
    record.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto dir = make_output_dir(config);
    record.output_dir = dir;
    write_text_file(dir / "results.json", record.to_json().dump(2) + "\n");
    write_text_file(dir / "attrition.json", record.attrition.to_json().dump(2) + "\n");
    return record;
}

}  // namespace icubench::experiment
