#include "icubench/cohort.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

namespace icubench::cohort {

namespace {

// extraction and grid building are pure per concept / per stay; spreading them
// over threads only shares immutable inputs
void concurrent_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr error;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) {
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

}  // namespace

int StayGrid::bins_with_data() const {
    int count = 0;
    for (int h = 0; h < n_bins; ++h) {
        for (const auto& feature : values) {
            if (!is_missing(feature[static_cast<std::size_t>(h)])) {
                ++count;
                break;
            }
        }
    }
    return count;
}

int StayGrid::longest_empty_gap() const {
    int longest = 0, run = 0;
    for (int h = 0; h < n_bins; ++h) {
        bool empty = true;
        for (const auto& feature : values) {
            if (!is_missing(feature[static_cast<std::size_t>(h)])) {
                empty = false;
                break;
            }
        }
        run = empty ? run + 1 : 0;
        longest = std::max(longest, run);
    }
    return longest;
}

StayGrid build_stay_grid(const std::vector<const harmonize::EventTable*>& events,
                         const harmonize::Stay& stay, double los_h,
                         const std::vector<harmonize::Aggregate>& aggregates,
                         const std::vector<std::string>& feature_names) {
    if (los_h < 0) throw DataError("build_stay_grid: negative length of stay");
    (void)feature_names;
    StayGrid grid;
    grid.stay_id = stay.stay_id;
    grid.n_bins = std::max(1, static_cast<int>(std::ceil(los_h - 1e-9)));
    grid.values.assign(events.size(), std::vector<double>(static_cast<std::size_t>(grid.n_bins), kMissing));

    for (std::size_t f = 0; f < events.size(); ++f) {
        const auto& table = *events[f];
        auto [lo, hi] = table.stay_range(stay.stay_id);
        auto agg = aggregates[f];
        // per-bin accumulation in one forward pass (rows are time sorted)
        std::size_t i = lo;
        while (i < hi) {
            std::int64_t h = table.time_min[i] >= 0 ? table.time_min[i] / 60 : -1;
            std::size_t j = i;
            while (j + 1 < hi && (table.time_min[j + 1] >= 0 ? table.time_min[j + 1] / 60 : -1) == h) ++j;
            if (h >= 0 && h < grid.n_bins) {
                double v;
                switch (agg) {
                    case harmonize::Aggregate::mean: {
                        v = 0;
                        for (std::size_t k = i; k <= j; ++k) v += table.value[k];
                        v /= static_cast<double>(j - i + 1);
                        break;
                    }
                    case harmonize::Aggregate::sum: {
                        v = 0;
                        for (std::size_t k = i; k <= j; ++k) v += table.value[k];
                        break;
                    }
                    case harmonize::Aggregate::min: {
                        v = table.value[i];
                        for (std::size_t k = i + 1; k <= j; ++k) v = std::min(v, table.value[k]);
                        break;
                    }
                    case harmonize::Aggregate::max: {
                        v = table.value[i];
                        for (std::size_t k = i + 1; k <= j; ++k) v = std::max(v, table.value[k]);
                        break;
                    }
                    case harmonize::Aggregate::first: v = table.value[i]; break;
                    default: v = table.value[j]; break;  // last
                }
                grid.values[f][static_cast<std::size_t>(h)] = v;
            }
            i = j + 1;
        }
    }
    return grid;
}

std::vector<ExclusionCriterion> base_exclusions() {
    std::vector<ExclusionCriterion> out;
    out.push_back({"age_below_18", [](const StayData& s) {
                       return !is_missing(s.grid.age) && s.grid.age < 18.0;
                   }});
    out.push_back({"invalid_discharge_time", [](const StayData& s) {
                       return !s.stay.valid_los();
                   }});
    out.push_back({"los_below_6h", [](const StayData& s) {
                       return s.stay.valid_los() && s.stay.los_hours() < 6.0;
                   }});
    out.push_back({"fewer_than_4_measured_bins", [](const StayData& s) {
                       return s.grid.bins_with_data() < 4;
                   }});
    out.push_back({"gap_over_12h", [](const StayData& s) {
                       return s.grid.longest_empty_gap() > 12;
                   }});
    return out;
}

std::pair<std::vector<std::size_t>, AttritionReport> apply_exclusions(
    const std::vector<ExclusionCriterion>& criteria, const std::vector<StayData>& stays) {
    std::vector<std::size_t> alive(stays.size());
    for (std::size_t i = 0; i < stays.size(); ++i) alive[i] = i;
    AttritionReport report;
    for (const auto& criterion : criteria) {
        AttritionStep step;
        step.criterion = criterion.name;
        step.n_before = alive.size();
        std::vector<std::size_t> next;
        next.reserve(alive.size());
        for (auto idx : alive) {
            if (criterion.excluded(stays[idx])) continue;
            next.push_back(idx);
        }
        step.n_after = next.size();
        step.n_excluded = step.n_before - step.n_after;
        report.steps.push_back(step);
        alive = std::move(next);
    }
    return {alive, report};
}

json AttritionReport::to_json() const {
    json out = json::array();
    for (const auto& s : steps)
        out.push_back({{"criterion", s.criterion},
                       {"n_before", s.n_before},
                       {"n_excluded", s.n_excluded},
                       {"n_after", s.n_after}});
    return out;
}

AttritionReport AttritionReport::from_json(const json& j) {
    AttritionReport r;
    for (const auto& s : j) {
        AttritionStep step;
        step.criterion = s.at("criterion").get<std::string>();
        step.n_before = s.at("n_before").get<std::size_t>();
        step.n_excluded = s.at("n_excluded").get<std::size_t>();
        step.n_after = s.at("n_after").get<std::size_t>();
        r.steps.push_back(std::move(step));
    }
    return r;
}

json Roles::to_json() const {
    return json{{"GROUP", group},
                {"SEQUENCE", sequence},
                {"LABEL", label},
                {"DYNAMIC", dynamic},
                {"STATIC", statics}};
}

Roles Roles::from_json(const json& j) {
    Roles r;
    auto c = cursor(j, "vars");
    c.reject_unknown_keys({"GROUP", "SEQUENCE", "LABEL", "DYNAMIC", "STATIC"});
    r.group = c.at("GROUP").get_string();
    r.sequence = c.at("SEQUENCE").get_string();
    r.label = c.at("LABEL").get_string();
    r.dynamic = j.at("DYNAMIC").get<std::vector<std::string>>();
    r.statics = j.at("STATIC").get<std::vector<std::string>>();
    return r;
}

void CohortBundle::validate() const {
    for (const auto& col : vars.dynamic)
        if (!dyn.has(col)) throw DataError("role DYNAMIC names missing column '" + col + "'");
    for (const auto& col : vars.statics)
        if (!sta.has(col)) throw DataError("role STATIC names missing column '" + col + "'");
    if (!sta.has(vars.group) || !dyn.has(vars.group) || !outc.has(vars.group))
        throw DataError("GROUP column '" + vars.group + "' must exist in all three tables");
    if (!outc.has(vars.label)) throw DataError("LABEL column '" + vars.label + "' missing from outc");

    std::set<std::int64_t> known(sta.i64(vars.group).begin(), sta.i64(vars.group).end());
    for (auto id : dyn.i64(vars.group))
        if (!known.count(id))
            throw DataError("dyn references stay " + std::to_string(id) + " absent from sta");
    for (auto id : outc.i64(vars.group))
        if (!known.count(id))
            throw DataError("outc references stay " + std::to_string(id) + " absent from sta");

    if (dyn.has(vars.sequence)) {
        const auto& ids = dyn.i64(vars.group);
        const auto& times = dyn.i64(vars.sequence);
        std::set<std::pair<std::int64_t, std::int64_t>> seen;
        for (std::size_t r = 0; r < ids.size(); ++r)
            if (!seen.emplace(ids[r], times[r]).second)
                throw DataError("duplicate (stay, time) in dyn: " + std::to_string(ids[r]) + "," +
                                std::to_string(times[r]));
    }
}

void write_cohort(const CohortBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_frame_csv(bundle.sta, dir / "sta.csv");
    write_frame_csv(bundle.dyn, dir / "dyn.csv");
    write_frame_csv(bundle.outc, dir / "outc.csv");
    write_text_file(dir / "vars.json", bundle.vars.to_json().dump(2) + "\n");
}

namespace {

std::filesystem::path member_path(const std::filesystem::path& dir, const std::string& stem) {
    for (const char* ext : {".csv", ".csv.gz", ".parquet"}) {
        auto p = dir / (stem + ext);
        if (std::filesystem::exists(p)) {
            if (std::string(ext) == ".parquet")
                throw DataError(stem + ".parquet found but parquet decoding is unavailable; provide the csv form of '" +
                                stem + "'");
            return p;
        }
    }
    throw DataError("cohort directory " + dir.string() + " is missing '" + stem + "' (expected " + stem +
                    ".csv)");
}

}  // namespace

CohortBundle read_cohort(const std::filesystem::path& dir) {
    CohortBundle bundle;
    bundle.sta = read_frame_csv(member_path(dir, "sta"));
    bundle.dyn = read_frame_csv(member_path(dir, "dyn"));
    bundle.outc = read_frame_csv(member_path(dir, "outc"));
    auto vars_path = dir / "vars.json";
    if (!std::filesystem::exists(vars_path))
        throw DataError("cohort directory " + dir.string() + " is missing 'vars.json'");
    bundle.vars = Roles::from_json(parse_json_strict(read_text_file(vars_path), "vars.json"));
    bundle.validate();
    return bundle;
}

double code_sex(const std::string& raw) {
    std::string s;
    for (char ch : raw) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "female" || s == "f" || s == "1" || s == "true") return 1.0;
    return 0.0;
}

bool TaskOptions::is_hourly() const { return id == "aki" || id == "sepsis" || id == "los"; }
bool TaskOptions::is_regression() const { return id == "kidney_function" || id == "los"; }

namespace {

labelers::Series to_series(const harmonize::EventTable& table, std::int64_t stay) {
    labelers::Series s;
    auto [lo, hi] = table.stay_range(stay);
    for (std::size_t i = lo; i < hi; ++i) s.push_back({table.time_min[i], table.value[i]});
    return s;
}

double static_value(const harmonize::EventTable& table, std::int64_t stay) {
    auto [lo, hi] = table.stay_range(stay);
    if (lo == hi) return kMissing;
    if (table.categorical) return code_sex(table.category[lo]);
    return table.value[lo];
}

}  // namespace

std::vector<StayData> assemble_stays(const harmonize::RawTables& raw, const harmonize::SourceConfig& cfg,
                                     const harmonize::ConceptDictionary& dict, const std::string& dataset,
                                     const std::vector<std::string>& dynamic_features) {
    auto stays = harmonize::load_stays(raw, cfg);

    auto extract_if_available = [&](const std::string& name) -> std::optional<harmonize::EventTable> {
        if (!dict.has(name)) return std::nullopt;
        const auto& def = dict.at(name);
        if (!def.sources.count(dataset)) return std::nullopt;
        return harmonize::extract_concept(raw, cfg, stays, def, dataset);
    };

    std::vector<harmonize::EventTable> dynamics(dynamic_features.size());
    std::vector<harmonize::Aggregate> aggs;
    for (const auto& name : dynamic_features) aggs.push_back(dict.at(name).aggregate);
    concurrent_for(dynamic_features.size(), [&](std::size_t i) {
        dynamics[i] = harmonize::extract_concept(raw, cfg, stays, dict.at(dynamic_features[i]), dataset);
    });
    std::vector<const harmonize::EventTable*> dyn_ptrs;
    for (const auto& t : dynamics) dyn_ptrs.push_back(&t);

    auto age = extract_if_available("age");
    auto sex = extract_if_available("sex");
    auto height = extract_if_available("height");
    auto weight = extract_if_available("weight");
    auto death = extract_if_available("death");
    auto sofa = extract_if_available("sofa");
    auto abx = extract_if_available("abx");
    auto samp = extract_if_available("samp");
    auto rrt = extract_if_available("rrt");
    auto hospital = extract_if_available("hospital_id");

    // crea/urine may already be dynamic features; reuse those tables
    const harmonize::EventTable* crea_tbl = nullptr;
    const harmonize::EventTable* urine_tbl = nullptr;
    for (std::size_t i = 0; i < dynamic_features.size(); ++i) {
        if (dynamic_features[i] == "crea") crea_tbl = &dynamics[i];
        if (dynamic_features[i] == "urine") urine_tbl = &dynamics[i];
    }
    std::optional<harmonize::EventTable> crea_extra, urine_extra;
    if (!crea_tbl) {
        crea_extra = extract_if_available("crea");
        if (crea_extra) crea_tbl = &*crea_extra;
    }
    if (!urine_tbl) {
        urine_extra = extract_if_available("urine");
        if (urine_extra) urine_tbl = &*urine_extra;
    }

    std::vector<StayData> out(stays.size());
    concurrent_for(stays.size(), [&](std::size_t si) {
        const auto& stay = stays[si];
        StayData sd;
        sd.stay = stay;
        if (stay.valid_los()) {
            sd.los_h = stay.los_hours();
        } else {
            // fallback horizon so grid-based criteria stay evaluable
            std::int64_t last = 0;
            for (const auto* t : dyn_ptrs) {
                auto [lo, hi] = t->stay_range(stay.stay_id);
                if (hi > lo) last = std::max(last, t->time_min[hi - 1]);
            }
            sd.los_h = std::max(1.0, std::ceil(static_cast<double>(last) / 60.0 + 1e-9));
        }
        sd.grid = build_stay_grid(dyn_ptrs, stay, sd.los_h, aggs, dynamic_features);
        if (age) sd.grid.age = static_value(*age, stay.stay_id);
        if (sex) sd.grid.sex = static_value(*sex, stay.stay_id);
        if (height) sd.grid.height = static_value(*height, stay.stay_id);
        if (weight) sd.grid.weight = static_value(*weight, stay.stay_id);
        if (crea_tbl) sd.creatinine = to_series(*crea_tbl, stay.stay_id);
        if (urine_tbl) sd.urine = to_series(*urine_tbl, stay.stay_id);
        if (sofa) sd.sofa = to_series(*sofa, stay.stay_id);
        if (abx) {
            auto [lo, hi] = abx->stay_range(stay.stay_id);
            for (std::size_t i = lo; i < hi; ++i) {
                labelers::AbxEvent ev;
                ev.time_min = abx->time_min[i];
                if (!abx->categorical && !is_missing(abx->value[i])) ev.duration_h = abx->value[i];
                sd.abx.push_back(ev);
            }
        }
        if (samp) {
            auto [lo, hi] = samp->stay_range(stay.stay_id);
            for (std::size_t i = lo; i < hi; ++i) sd.cultures.push_back(samp->time_min[i]);
        }
        if (rrt) {
            auto [lo, hi] = rrt->stay_range(stay.stay_id);
            for (std::size_t i = lo; i < hi; ++i) sd.rrt.push_back(rrt->time_min[i]);
        }
        if (death) {
            auto [lo, hi] = death->stay_range(stay.stay_id);
            if (hi > lo) {
                sd.death_event = true;
                sd.death_min = death->time_min[lo];
            }
        }
        if (hospital) {
            auto [lo, hi] = hospital->stay_range(stay.stay_id);
            if (hi > lo) sd.group = static_cast<std::int64_t>(hospital->value[lo]);
        }
        out[si] = std::move(sd);
    });
    return out;
}

std::map<std::int64_t, labelers::TaskLabels> compute_labels(const TaskOptions& task,
                                                            const std::vector<StayData>& stays,
                                                            bool dataset_records_mortality) {
    std::map<std::int64_t, labelers::TaskLabels> labels;
    for (const auto& sd : stays) {
        int n_bins = sd.grid.n_bins;
        if (task.id == "mortality") {
            labels[sd.stay.stay_id] = labelers::label_mortality(sd.death_event, dataset_records_mortality);
        } else if (task.id == "aki") {
            labelers::KdigoInputs in;
            in.creatinine = sd.creatinine;
            in.urine = sd.urine;
            in.weight_kg = sd.grid.weight;
            in.rrt_times = sd.rrt;
            labels[sd.stay.stay_id] = labelers::label_aki(in, n_bins, task.hourly, task.kdigo_ordinal);
        } else if (task.id == "sepsis") {
            auto suspicions = labelers::detect_suspicion(sd.abx, sd.cultures, sd.los_h, sd.death_min,
                                                         task.sepsis);
            labels[sd.stay.stay_id] =
                labelers::label_sepsis(sd.sofa, suspicions, n_bins, task.sepsis, task.hourly);
        } else if (task.id == "kidney_function") {
            labelers::TaskLabels l;
            l.task = task.id;
            double v = labelers::label_kidney_function(sd.creatinine);
            if (!is_missing(v)) l.stay_label = v;
            labels[sd.stay.stay_id] = std::move(l);
        } else if (task.id == "los") {
            labels[sd.stay.stay_id] = labelers::label_remaining_los(sd.los_h, n_bins);
        } else {
            throw ConfigError("unknown task '" + task.id + "'");
        }
    }
    return labels;
}

std::vector<ExclusionCriterion> task_exclusions(const TaskOptions& task,
                                                const std::map<std::int64_t, labelers::TaskLabels>& labels,
                                                const std::vector<StayData>& stays) {
    std::vector<ExclusionCriterion> out;
    auto onset_of = [&labels](const StayData& s) -> std::optional<std::int64_t> {
        auto it = labels.find(s.stay.stay_id);
        return it == labels.end() ? std::nullopt : it->second.onset_min;
    };

    if (task.id == "mortality") {
        double min_los = task.mortality_min_los_h;
        out.push_back({"los_below_" + std::to_string(static_cast<int>(min_los)) + "h",
                       [min_los](const StayData& s) { return s.stay.los_hours() < min_los; }});
    } else if (task.id == "kidney_function") {
        out.push_back({"los_below_48h", [](const StayData& s) { return s.stay.los_hours() < 48.0; }});
        out.push_back({"no_creatinine_day2", [&labels](const StayData& s) {
                           auto it = labels.find(s.stay.stay_id);
                           return it == labels.end() || !it->second.stay_label.has_value();
                       }});
    } else if (task.id == "aki" || task.id == "sepsis") {
        out.push_back({"onset_before_admission", [onset_of](const StayData& s) {
                           auto o = onset_of(s);
                           return o && *o < 0;
                       }});
        out.push_back({"onset_within_first_6h", [onset_of](const StayData& s) {
                           auto o = onset_of(s);
                           return o && *o >= 0 && *o < 6 * 60;
                       }});
        if (task.id == "aki") {
            out.push_back({"baseline_creatinine_above_4", [](const StayData& s) {
                               // last pre-admission value, else the earliest in the ICU
                               double baseline = kMissing;
                               for (const auto& m : s.creatinine) {
                                   if (m.time_min < 0) baseline = m.value;
                               }
                               if (is_missing(baseline)) {
                                   for (const auto& m : s.creatinine) {
                                       if (m.time_min >= 0) {
                                           baseline = m.value;
                                           break;
                                       }
                                   }
                               }
                               return !is_missing(baseline) && baseline > 4.0;
                           }});
        }
        if (task.exclude_groups_without_positives) {
            std::set<std::int64_t> groups_with_positives;
            for (const auto& sd : stays) {
                auto it = labels.find(sd.stay.stay_id);
                if (it != labels.end() && it->second.onset_min) groups_with_positives.insert(sd.group);
            }
            out.push_back({"group_without_positives", [groups_with_positives](const StayData& s) {
                               return !groups_with_positives.count(s.group);
                           }});
        }
    } else if (task.id == "los") {
        // no additional criteria
    }
    return out;
}

TaskCohort build_task_cohort(const harmonize::RawTables& raw, const harmonize::SourceConfig& cfg,
                             const harmonize::ConceptDictionary& dict, const std::string& dataset,
                             const TaskOptions& task,
                             const std::vector<std::string>& dynamic_features) {
    auto has_source = [&](const std::string& name) {
        return dict.has(name) && dict.at(name).sources.count(dataset) != 0;
    };
    bool dataset_records_mortality = has_source("death");
    if (task.id == "sepsis") {
        if (!has_source("sofa"))
            throw DataError("sepsis task unavailable: no 'sofa' concept for dataset '" + dataset + "'");
        if (!has_source("abx"))
            throw DataError("sepsis task unavailable: no 'abx' concept for dataset '" + dataset + "'");
        if (task.sepsis.suspicion_mode == labelers::SepsisDefinition::SuspicionMode::abx_and_culture &&
            !has_source("samp"))
            throw DataError("sepsis task unavailable: no 'samp' concept for dataset '" + dataset +
                            "' (use suspicion_mode=abx_only)");
    }
    if ((task.id == "aki" || task.id == "kidney_function") && !has_source("crea"))
        throw DataError(task.id + " task unavailable: no 'crea' concept for dataset '" + dataset + "'");

    auto stays = assemble_stays(raw, cfg, dict, dataset, dynamic_features);

    auto [base_alive, attrition] = apply_exclusions(base_exclusions(), stays);
    std::vector<StayData> survivors;
    survivors.reserve(base_alive.size());
    for (auto idx : base_alive) survivors.push_back(std::move(stays[idx]));

    auto labels = compute_labels(task, survivors, dataset_records_mortality);
    auto [task_alive, task_attrition] =
        apply_exclusions(task_exclusions(task, labels, survivors), survivors);
    for (auto& step : task_attrition.steps) attrition.steps.push_back(step);

    TaskCohort cohort;
    cohort.attrition = std::move(attrition);

    Roles roles;
    roles.dynamic = dynamic_features;
    roles.statics = {"age", "sex", "height", "weight"};

    std::vector<std::int64_t> sta_id;
    std::vector<double> sta_age, sta_sex, sta_height, sta_weight;
    std::vector<std::int64_t> dyn_id, dyn_time;
    std::vector<std::vector<double>> dyn_cols(dynamic_features.size());
    std::vector<std::int64_t> outc_id, outc_time;
    std::vector<double> outc_label;
    bool hourly = task.is_hourly();

    for (auto idx : task_alive) {
        const StayData& sd = survivors[idx];
        const auto& label = labels.at(sd.stay.stay_id);
        cohort.stay_ids.push_back(sd.stay.stay_id);

        sta_id.push_back(sd.stay.stay_id);
        sta_age.push_back(sd.grid.age);
        sta_sex.push_back(sd.grid.sex);
        sta_height.push_back(sd.grid.height);
        sta_weight.push_back(sd.grid.weight);

        int dyn_bins;
        if (hourly) {
            dyn_bins = static_cast<int>(label.hourly.size());
        } else {
            dyn_bins = std::min(sd.grid.n_bins, static_cast<int>(std::lround(task.observation_h)));
        }
        for (int h = 0; h < dyn_bins; ++h) {
            dyn_id.push_back(sd.stay.stay_id);
            dyn_time.push_back(h);
            for (std::size_t f = 0; f < dynamic_features.size(); ++f)
                dyn_cols[f].push_back(sd.grid.values[f][static_cast<std::size_t>(h)]);
        }

        if (hourly) {
            for (std::size_t h = 0; h < label.hourly.size(); ++h) {
                outc_id.push_back(sd.stay.stay_id);
                outc_time.push_back(static_cast<std::int64_t>(h));
                outc_label.push_back(label.hourly[h]);
            }
        } else {
            outc_id.push_back(sd.stay.stay_id);
            outc_label.push_back(*label.stay_label);
        }
    }

    cohort.bundle.sta.add_i64("stay_id", std::move(sta_id));
    cohort.bundle.sta.add_f64("age", std::move(sta_age));
    cohort.bundle.sta.add_f64("sex", std::move(sta_sex));
    cohort.bundle.sta.add_f64("height", std::move(sta_height));
    cohort.bundle.sta.add_f64("weight", std::move(sta_weight));

    cohort.bundle.dyn.add_i64("stay_id", std::move(dyn_id));
    cohort.bundle.dyn.add_i64("time", std::move(dyn_time));
    for (std::size_t f = 0; f < dynamic_features.size(); ++f)
        cohort.bundle.dyn.add_f64(dynamic_features[f], std::move(dyn_cols[f]));

    cohort.bundle.outc.add_i64("stay_id", std::move(outc_id));
    if (hourly) cohort.bundle.outc.add_i64("time", std::move(outc_time));
    cohort.bundle.outc.add_f64("label", std::move(outc_label));

    cohort.bundle.vars = std::move(roles);
    cohort.bundle.validate();
    return cohort;
}

}  // namespace icubench::cohort
