#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "icubench/experiment.hpp"
#include "icubench/labelers.hpp"
#include "icubench/metrics.hpp"
#include "icubench/models.hpp"
#include "icubench/synthgen.hpp"
#include "icubench/tuner.hpp"

namespace py = pybind11;
using namespace icubench;

namespace {

json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<std::int64_t>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::dict>(obj)) {
        json out = json::object();
        for (auto item : obj.cast<py::dict>())
            out[item.first.cast<std::string>()] = py_to_json(item.second);
        return out;
    }
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        json out = json::array();
        for (auto item : obj.cast<py::sequence>()) out.push_back(py_to_json(item));
        return out;
    }
    throw ConfigError("cannot convert python object to json");
}

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const auto& v : j) out.append(json_to_py(v));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (auto it = j.begin(); it != j.end(); ++it)
                out[py::str(it.key())] = json_to_py(it.value());
            return out;
        }
        default: return py::none();
    }
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    auto buf = arr.request();
    const double* data = static_cast<const double*>(buf.ptr);
    return {data, data + buf.size};
}

models::Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr,
                         const std::vector<std::string>& names) {
    auto buf = arr.request();
    if (buf.ndim != 2) throw DataError("feature matrix must be 2-d");
    models::Matrix m;
    m.n = static_cast<std::size_t>(buf.shape[0]);
    m.d = static_cast<std::size_t>(buf.shape[1]);
    const double* data = static_cast<const double*>(buf.ptr);
    m.values.assign(data, data + m.n * m.d);
    if (!names.empty()) {
        if (names.size() != m.d) throw DataError("feature_names length must match columns");
        m.names = names;
    } else {
        for (std::size_t j = 0; j < m.d; ++j) m.names.push_back("f" + std::to_string(j));
    }
    return m;
}

labelers::Series to_series(const std::vector<std::pair<std::int64_t, double>>& pts) {
    labelers::Series s;
    for (auto [t, v] : pts) s.push_back({t, v});
    return s;
}

}  // namespace

PYBIND11_MODULE(_icubench, m) {
    m.doc() = "harmonized ICU cohort extraction and prediction benchmark (C++ core)";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");

    // ---- metrics ----
    auto metrics_mod = m.def_submodule("metrics", "evaluation metrics");
    metrics_mod.def("auroc", [](py::array_t<double> s, py::array_t<double> y) {
        return metrics::auroc(to_vector(s), to_vector(y));
    });
    metrics_mod.def("auprc", [](py::array_t<double> s, py::array_t<double> y) {
        return metrics::auprc(to_vector(s), to_vector(y));
    });
    metrics_mod.def("mae", [](py::array_t<double> p, py::array_t<double> t) {
        return metrics::mae(to_vector(p), to_vector(t));
    });
    metrics_mod.def(
        "calibration_error",
        [](py::array_t<double> p, py::array_t<double> y, int bins) {
            return metrics::calibration_error(to_vector(p), to_vector(y), bins);
        },
        py::arg("probs"), py::arg("labels"), py::arg("bins") = 10);
    metrics_mod.def("jsd", [](py::array_t<double> p, py::array_t<double> q) {
        return metrics::jsd(to_vector(p), to_vector(q));
    });
    metrics_mod.def(
        "demographic_parity_ratio",
        [](py::array_t<double> preds, py::array_t<double> groups, double thr) {
            return metrics::demographic_parity_ratio(to_vector(preds), to_vector(groups), thr);
        },
        py::arg("preds"), py::arg("groups"), py::arg("threshold") = 0.5);
    metrics_mod.def(
        "accuracy",
        [](py::array_t<double> s, py::array_t<double> y, double thr) {
            return metrics::accuracy(to_vector(s), to_vector(y), thr);
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

    // ---- clinical labelers ----
    auto label_mod = m.def_submodule("labelers", "endpoint labeling primitives");
    label_mod.def(
        "kdigo_stage",
        [](const std::vector<std::pair<std::int64_t, double>>& creatinine,
           const std::vector<std::pair<std::int64_t, double>>& urine, double weight_kg,
           const std::vector<std::int64_t>& rrt_times, std::int64_t t) {
            labelers::KdigoInputs in;
            in.creatinine = to_series(creatinine);
            in.urine = to_series(urine);
            in.weight_kg = weight_kg;
            in.rrt_times = rrt_times;
            return labelers::kdigo_stage(in, t);
        },
        py::arg("creatinine"), py::arg("urine") = std::vector<std::pair<std::int64_t, double>>{},
        py::arg("weight_kg") = kMissing, py::arg("rrt_times") = std::vector<std::int64_t>{},
        py::arg("t") = 0,
        "KDIGO stage 0-3 at time t (minutes); series are (time_min, value) pairs");
    label_mod.def(
        "baseline_creatinine",
        [](const std::vector<std::pair<std::int64_t, double>>& crea, std::int64_t t) {
            return labelers::compute_baseline_creatinine(to_series(crea), t);
        },
        py::arg("creatinine"), py::arg("t"));
    label_mod.def(
        "urine_rates",
        [](const std::vector<std::pair<std::int64_t, double>>& urine, double weight_kg) {
            std::vector<std::pair<std::int64_t, double>> out;
            for (const auto& r : labelers::compute_urine_rate(to_series(urine), weight_kg))
                out.emplace_back(r.time_min, r.rate);
            return out;
        },
        py::arg("urine"), py::arg("weight_kg") = kMissing);
    label_mod.def(
        "remaining_los",
        [](double los_h, int n_bins) { return labelers::label_remaining_los(los_h, n_bins).hourly; },
        py::arg("los_h"), py::arg("n_bins"));
    label_mod.def(
        "detect_suspicion",
        [](const std::vector<std::pair<std::int64_t, double>>& abx,
           const std::vector<std::int64_t>& cultures, double los_h, py::object death_min,
           double abx_continuity_days, const std::string& mode) {
            std::vector<labelers::AbxEvent> events;
            for (auto [t, dur] : abx) events.push_back({t, dur});
            labelers::SepsisDefinition def;
            def.abx_continuity_days = abx_continuity_days;
            def.suspicion_mode = mode == "abx_only"
                                     ? labelers::SepsisDefinition::SuspicionMode::abx_only
                                     : labelers::SepsisDefinition::SuspicionMode::abx_and_culture;
            std::optional<std::int64_t> death;
            if (!death_min.is_none()) death = death_min.cast<std::int64_t>();
            return labelers::detect_suspicion(events, cultures, los_h, death, def);
        },
        py::arg("abx"), py::arg("cultures") = std::vector<std::int64_t>{}, py::arg("los_h") = 1e9,
        py::arg("death_min") = py::none(), py::arg("abx_continuity_days") = 3.0,
        py::arg("mode") = "abx_and_culture",
        "abx events are (time_min, prescription_duration_h) pairs; returns suspicion times");

    // ---- models ----
    py::class_<models::TrainedModel>(m, "TrainedModel")
        .def_readonly("kind", &models::TrainedModel::kind)
        .def_readonly("feature_names", &models::TrainedModel::feature_names)
        .def_readonly("rounds_used", &models::TrainedModel::rounds_used)
        .def_readonly("iterations_used", &models::TrainedModel::iterations_used)
        .def("predict",
             [](const models::TrainedModel& self, py::array_t<double> x) {
                 auto mat = to_matrix(x, self.feature_names);
                 return self.predict(mat);
             })
        .def("to_json", [](const models::TrainedModel& self) { return json_to_py(self.to_json()); })
        .def("save", [](const models::TrainedModel& self, const std::string& p) { self.save(p); })
        .def_static("load", [](const std::string& p) { return models::TrainedModel::load(p); });

    m.def(
        "train_logreg",
        [](py::array_t<double> x, py::array_t<double> y, py::dict hp,
           const std::vector<std::string>& names) {
            experiment::ModelData data;
            data.x = to_matrix(x, names);
            data.y = to_vector(y);
            return experiment::train_model("logreg", py_to_json(hp), true, 0, data, nullptr);
        },
        py::arg("x"), py::arg("y"), py::arg("hyperparams") = py::dict(),
        py::arg("feature_names") = std::vector<std::string>{});
    m.def(
        "train_elasticnet",
        [](py::array_t<double> x, py::array_t<double> y, py::dict hp,
           const std::vector<std::string>& names) {
            experiment::ModelData data;
            data.x = to_matrix(x, names);
            data.y = to_vector(y);
            return experiment::train_model("elasticnet", py_to_json(hp), false, 0, data, nullptr);
        },
        py::arg("x"), py::arg("y"), py::arg("hyperparams") = py::dict(),
        py::arg("feature_names") = std::vector<std::string>{});
    m.def(
        "train_gbt",
        [](py::array_t<double> x, py::array_t<double> y, py::dict hp, bool classification,
           std::uint64_t seed, const std::vector<std::string>& names) {
            experiment::ModelData data;
            data.x = to_matrix(x, names);
            data.y = to_vector(y);
            return experiment::train_model("gbt", py_to_json(hp), classification, seed, data, nullptr);
        },
        py::arg("x"), py::arg("y"), py::arg("hyperparams") = py::dict(),
        py::arg("classification") = true, py::arg("seed") = 0,
        py::arg("feature_names") = std::vector<std::string>{});

    // ---- tuner ----
    auto tuner_mod = m.def_submodule("tuner", "hyperparameter sampling and optimization");
    tuner_mod.def(
        "sample",
        [](py::dict spec, std::uint64_t seed, int count) {
            auto dist = tuner::ParamDistribution::parse(cursor(py_to_json(spec), "distribution"));
            std::mt19937_64 rng(seed);
            py::list out;
            for (int i = 0; i < count; ++i) out.append(json_to_py(dist.sample(rng)));
            return out;
        },
        py::arg("distribution"), py::arg("seed") = 0, py::arg("count") = 1);
    tuner_mod.def(
        "make_splits",
        [](const std::vector<std::int64_t>& ids, int folds, int repetitions, std::uint64_t seed) {
            auto plan = tuner::make_splits(ids, folds, repetitions, seed);
            py::list out;
            for (int r = 0; r < repetitions; ++r) {
                py::list row;
                for (int k = 0; k < folds; ++k) {
                    const auto& cell = plan.at(r, k);
                    row.append(py::dict(py::arg("train") = cell.train, py::arg("val") = cell.val,
                                        py::arg("test") = cell.test));
                }
                out.append(row);
            }
            return out;
        },
        py::arg("ids"), py::arg("folds") = 5, py::arg("repetitions") = 5, py::arg("seed") = 0);
    tuner_mod.def(
        "bayes_optimize",
        [](py::dict space, const std::function<double(py::dict)>& objective, int n_init, int n_calls,
           std::uint64_t seed) {
            auto parsed = tuner::parse_param_space(cursor(py_to_json(space), "space"));
            tuner::OptimizeOptions opts;
            opts.n_init = n_init;
            opts.n_calls = n_calls;
            opts.seed = seed;
            auto result = tuner::bayes_optimize(
                parsed,
                [&](const json& point) { return objective(json_to_py(point).cast<py::dict>()); }, opts);
            py::list trials;
            for (const auto& t : result.trials) trials.append(json_to_py(t.to_json()));
            return py::dict(py::arg("best_point") = json_to_py(result.best_point),
                            py::arg("best_value") = result.best_value, py::arg("trials") = trials);
        },
        py::arg("space"), py::arg("objective"), py::arg("n_init") = 10, py::arg("n_calls") = 50,
        py::arg("seed") = 0);

    // ---- synthetic data and experiments ----
    m.def(
        "generate_synthetic",
        [](const std::string& out_dir, int stays, std::uint64_t seed, py::object overrides) {
            synthgen::SynthConfig cfg;
            if (!overrides.is_none()) cfg = synthgen::SynthConfig::from_json(py_to_json(overrides));
            cfg.n_stays = stays;
            cfg.seed = seed;
            synthgen::generate_to_dir(cfg, out_dir);
        },
        py::arg("out_dir"), py::arg("stays") = 1000, py::arg("seed") = 7,
        py::arg("overrides") = py::none(),
        "write synthetic raw source tables, bundled configs, and truth.json");
    m.def(
        "extract_cohort",
        [](const std::string& raw_dir, const std::string& out_dir, py::object config) {
            experiment::ExperimentConfig cfg;
            if (!config.is_none())
                cfg = experiment::parse_experiment_config(py_to_json(config).dump());
            else
                cfg.task.id = "mortality";
            cfg.data_dir = raw_dir;
            auto cohort = experiment::extract_cohort(raw_dir, cfg);
            cohort::write_cohort(cohort.bundle, out_dir);
            write_text_file(std::filesystem::path(out_dir) / "attrition.json",
                            cohort.attrition.to_json().dump(2) + "\n");
            return json_to_py(cohort.attrition.to_json());
        },
        py::arg("raw_dir"), py::arg("out_dir"), py::arg("config") = py::none());
    m.def(
        "run_train",
        [](py::dict config) {
            auto cfg = experiment::parse_experiment_config(py_to_json(config).dump());
            return json_to_py(experiment::run_train(cfg).to_json());
        },
        py::arg("config"), "run the full train protocol; returns the results record");
    m.def(
        "run_evaluate",
        [](py::dict config, const std::string& source_dir, const std::string& source_name) {
            auto cfg = experiment::parse_experiment_config(py_to_json(config).dump());
            return json_to_py(experiment::run_evaluate(cfg, source_dir, source_name).to_json());
        },
        py::arg("config"), py::arg("source_dir"), py::arg("source_name"));

    m.attr("__version__") = "0.1.0";
}
