#include "icubench/recipes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace icubench::recipes {

using cohort::CohortBundle;

json Recipe::to_json() const {
    json steps_json = json::array();
    for (const auto& s : steps) steps_json.push_back({{"step", s.kind}, {"params", s.params}});
    return json{{"steps", steps_json}};
}

Recipe Recipe::from_json(const json& j) {
    Recipe r;
    auto c = cursor(j, "recipe");
    c.reject_unknown_keys({"steps"});
    auto steps = c.at("steps");
    steps.require_array();
    for (std::size_t i = 0; i < steps.node->size(); ++i) {
        auto sc = steps.at(i);
        sc.reject_unknown_keys({"step", "params"});
        StepConfig step;
        step.kind = sc.at("step").get_string();
        if (sc.has("params")) step.params = *sc.at("params").node;
        r.steps.push_back(std::move(step));
    }
    return r;
}

Recipe default_recipe(bool generate_features, bool scaling) {
    Recipe r;
    if (generate_features)
        r.steps.push_back({"hist_aggregate", json{{"stats", {"min", "max", "mean", "count"}}}});
    r.steps.push_back({"missing_indicator", json::object()});
    r.steps.push_back({"forward_fill", json::object()});
    r.steps.push_back({"mean_impute", json::object()});
    if (scaling) r.steps.push_back({"scale", json::object()});
    return r;
}

json FittedRecipe::to_json() const {
    json steps_json = json::array();
    for (const auto& s : steps)
        steps_json.push_back({{"step", s.kind}, {"params", s.params}, {"stats", s.stats}});
    return json{{"vars", roles.to_json()}, {"steps", steps_json}};
}

FittedRecipe FittedRecipe::from_json(const json& j) {
    FittedRecipe f;
    f.roles = cohort::Roles::from_json(j.at("vars"));
    for (const auto& s : j.at("steps")) {
        FittedStep step;
        step.kind = s.at("step").get<std::string>();
        step.params = s.value("params", json::object());
        step.stats = s.value("stats", json::object());
        f.steps.push_back(std::move(step));
    }
    return f;
}

namespace {

// column reference into either the dynamic or the static table
struct ColRef {
    bool in_dyn;
    std::string name;
};

bool is_indicator(const std::string& name) {
    return name.size() > 5 && name.compare(name.size() - 5, 5, "_miss") == 0;
}

std::vector<ColRef> resolve_columns(const json& params, const CohortBundle& bundle) {
    std::string which = params.value("columns", std::string("dynamic"));
    std::vector<ColRef> out;
    if (params.contains("columns") && params["columns"].is_array()) {
        for (const auto& c : params["columns"]) {
            std::string name = c.get<std::string>();
            if (bundle.dyn.has(name)) out.push_back({true, name});
            else if (bundle.sta.has(name)) out.push_back({false, name});
            else throw ConfigError("recipe step references unknown column '" + name + "'");
        }
        return out;
    }
    if (which == "dynamic" || which == "predictors") {
        for (const auto& c : bundle.vars.dynamic) out.push_back({true, c});
    }
    if (which == "statics" || which == "predictors") {
        for (const auto& c : bundle.vars.statics) out.push_back({false, c});
    }
    if (which != "dynamic" && which != "statics" && which != "predictors")
        throw ConfigError("unknown column selector '" + which + "'");
    return out;
}

std::vector<double>& col_data(CohortBundle& b, const ColRef& ref) {
    return ref.in_dyn ? b.dyn.f64(ref.name) : b.sta.f64(ref.name);
}
const std::vector<double>& col_data(const CohortBundle& b, const ColRef& ref) {
    return ref.in_dyn ? b.dyn.f64(ref.name) : b.sta.f64(ref.name);
}

// rows of each stay ordered by the sequence column
std::map<std::int64_t, std::vector<std::size_t>> stay_rows(const CohortBundle& b) {
    std::map<std::int64_t, std::vector<std::size_t>> out;
    const auto& ids = b.dyn.i64(b.vars.group);
    for (std::size_t r = 0; r < ids.size(); ++r) out[ids[r]].push_back(r);
    if (b.dyn.has(b.vars.sequence)) {
        const auto& t = b.dyn.i64(b.vars.sequence);
        for (auto& [id, rows] : out)
            std::sort(rows.begin(), rows.end(),
                      [&](std::size_t a, std::size_t c) { return t[a] < t[c]; });
    }
    return out;
}

double aggregate_values(const std::vector<double>& vals, const std::string& how) {
    if (vals.empty()) return kMissing;
    if (how == "mean") {
        double s = 0;
        for (double v : vals) s += v;
        return s / static_cast<double>(vals.size());
    }
    if (how == "min") return *std::min_element(vals.begin(), vals.end());
    if (how == "max") return *std::max_element(vals.begin(), vals.end());
    if (how == "sum") {
        double s = 0;
        for (double v : vals) s += v;
        return s;
    }
    if (how == "first") return vals.front();
    if (how == "last") return vals.back();
    throw ConfigError("unknown aggregate '" + how + "'");
}

// ---- step fit/apply pairs --------------------------------------------------

json fit_scale(const json& params, const CohortBundle& b) {
    json stats = json::object();
    auto cols = resolve_columns(params.contains("columns") ? params : json{{"columns", "predictors"}}, b);
    for (const auto& ref : cols) {
        if (is_indicator(ref.name)) continue;  // masks stay 0/1
        const auto& v = col_data(b, ref);
        double sum = 0, n = 0;
        for (double x : v)
            if (!is_missing(x)) {
                sum += x;
                n += 1;
            }
        double mean = n > 0 ? sum / n : 0.0;
        double ss = 0;
        for (double x : v)
            if (!is_missing(x)) ss += (x - mean) * (x - mean);
        double sd = n > 0 ? std::sqrt(ss / n) : 1.0;  // population
        if (sd == 0.0) sd = 1.0;
        stats[ref.name] = {{"mean", mean}, {"std", sd}};
    }
    return stats;
}

void apply_scale(const json& stats, CohortBundle& b) {
    for (auto it = stats.begin(); it != stats.end(); ++it) {
        ColRef ref{b.dyn.has(it.key()), it.key()};
        if (!ref.in_dyn && !b.sta.has(it.key()))
            throw DataError("scale: column '" + it.key() + "' missing from data");
        auto& v = col_data(b, ref);
        double mean = it.value().at("mean").get<double>();
        double sd = it.value().at("std").get<double>();
        for (auto& x : v)
            if (!is_missing(x)) x = (x - mean) / sd;
    }
}

json fit_missing_indicator(const json& params, const CohortBundle& b) {
    auto cols = resolve_columns(params, b);
    json names = json::array();
    for (const auto& ref : cols)
        if (ref.in_dyn && !is_indicator(ref.name)) names.push_back(ref.name);
    return json{{"columns", names}};
}

void apply_missing_indicator(const json& stats, CohortBundle& b) {
    for (const auto& cj : stats.at("columns")) {
        std::string name = cj.get<std::string>();
        if (!b.dyn.has(name)) throw DataError("missing_indicator: column '" + name + "' missing");
        const auto& v = b.dyn.f64(name);
        std::vector<double> mask(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) mask[i] = is_missing(v[i]) ? 1.0 : 0.0;
        std::string mask_name = name + "_miss";
        if (!b.dyn.has(mask_name)) {
            b.dyn.add_f64(mask_name, std::move(mask));
            b.vars.dynamic.push_back(mask_name);
        }
    }
}

void apply_forward_fill(const json& params, CohortBundle& b) {
    auto cols = resolve_columns(params, b);
    auto rows = stay_rows(b);
    for (const auto& ref : cols) {
        if (!ref.in_dyn) continue;
        auto& v = col_data(b, ref);
        for (const auto& [id, idx] : rows) {
            double carry = kMissing;
            for (auto r : idx) {
                if (is_missing(v[r])) {
                    if (!is_missing(carry)) v[r] = carry;
                } else {
                    carry = v[r];
                }
            }
        }
    }
}

json fit_mean_impute(const json& params, const CohortBundle& b) {
    json stats = json::object();
    auto cols = resolve_columns(params.contains("columns") ? params : json{{"columns", "predictors"}}, b);
    for (const auto& ref : cols) {
        const auto& v = col_data(b, ref);
        double sum = 0, n = 0;
        for (double x : v)
            if (!is_missing(x)) {
                sum += x;
                n += 1;
            }
        stats[ref.name] = n > 0 ? sum / n : 0.0;
    }
    return stats;
}

void apply_mean_impute(const json& stats, CohortBundle& b) {
    for (auto it = stats.begin(); it != stats.end(); ++it) {
        ColRef ref{b.dyn.has(it.key()), it.key()};
        if (!ref.in_dyn && !b.sta.has(it.key()))
            throw DataError("mean_impute: column '" + it.key() + "' missing from data");
        auto& v = col_data(b, ref);
        double mean = it.value().get<double>();
        for (auto& x : v)
            if (is_missing(x)) x = mean;
    }
}

json fit_hist_aggregate(const json& params, const CohortBundle& b) {
    auto cols = resolve_columns(params, b);
    json names = json::array();
    for (const auto& ref : cols)
        if (ref.in_dyn && !is_indicator(ref.name)) names.push_back(ref.name);
    json stats_list = params.value("stats", json::array({"min", "max", "mean", "count"}));
    return json{{"columns", names}, {"stats", stats_list}};
}

void apply_hist_aggregate(const json& stats, CohortBundle& b) {
    auto rows = stay_rows(b);
    std::vector<std::string> wanted;
    for (const auto& s : stats.at("stats")) wanted.push_back(s.get<std::string>());
    for (const auto& cj : stats.at("columns")) {
        std::string name = cj.get<std::string>();
        if (!b.dyn.has(name)) throw DataError("hist_aggregate: column '" + name + "' missing");
        const auto& v = b.dyn.f64(name);
        std::map<std::string, std::vector<double>> out;
        for (const auto& w : wanted) out[w].assign(v.size(), kMissing);

        // expanding window over observed (pre-fill) values only
        for (const auto& [id, idx] : rows) {
            double mn = kMissing, mx = kMissing, sum = 0;
            double count = 0;
            for (auto r : idx) {
                double x = v[r];
                if (!is_missing(x)) {
                    if (is_missing(mn) || x < mn) mn = x;
                    if (is_missing(mx) || x > mx) mx = x;
                    sum += x;
                    count += 1;
                }
                for (const auto& w : wanted) {
                    if (w == "min") out[w][r] = mn;
                    else if (w == "max") out[w][r] = mx;
                    else if (w == "mean") out[w][r] = count > 0 ? sum / count : kMissing;
                    else if (w == "count") out[w][r] = count;
                    else throw ConfigError("hist_aggregate: unknown stat '" + w + "'");
                }
            }
        }
        for (const auto& w : wanted) {
            std::string col = name + "_" + w;
            if (!b.dyn.has(col)) {
                b.dyn.add_f64(col, std::move(out[w]));
                b.vars.dynamic.push_back(col);
            }
        }
    }
}

void apply_resample(const json& params, CohortBundle& b) {
    int width = params.value("width_h", 2);
    if (width < 1) throw ConfigError("resample: width_h must be >= 1");
    std::string how = params.value("aggregate", std::string("mean"));
    // per-column overrides so each concept keeps its own aggregate
    std::map<std::string, std::string> per_column;
    if (params.contains("aggregates")) {
        for (auto it = params["aggregates"].begin(); it != params["aggregates"].end(); ++it)
            per_column[it.key()] = it.value().get<std::string>();
    }
    auto rows = stay_rows(b);

    Frame out;
    std::vector<std::int64_t> ids, times;
    std::map<std::string, std::vector<double>> cols;
    std::vector<std::string> value_cols;
    for (const auto& name : b.dyn.names())
        if (name != b.vars.group && name != b.vars.sequence) value_cols.push_back(name);

    const auto& t = b.dyn.i64(b.vars.sequence);
    for (const auto& [id, idx] : rows) {
        std::size_t i = 0;
        while (i < idx.size()) {
            std::int64_t bin = t[idx[i]] / width;
            std::size_t j = i;
            while (j + 1 < idx.size() && t[idx[j + 1]] / width == bin) ++j;
            ids.push_back(id);
            times.push_back(bin);
            for (const auto& name : value_cols) {
                const auto& v = b.dyn.f64(name);
                std::vector<double> group;
                for (std::size_t k = i; k <= j; ++k)
                    if (!is_missing(v[idx[k]])) group.push_back(v[idx[k]]);
                auto pc = per_column.find(name);
                cols[name].push_back(aggregate_values(group, pc == per_column.end() ? how : pc->second));
            }
            i = j + 1;
        }
    }
    out.add_i64(b.vars.group, std::move(ids));
    out.add_i64(b.vars.sequence, std::move(times));
    for (const auto& name : value_cols) out.add_f64(name, std::move(cols[name]));
    b.dyn = std::move(out);

    // hourly outcomes follow the coarser grid, keeping the latest label per bin
    if (b.outc.has(b.vars.sequence)) {
        const auto& oid = b.outc.i64(b.vars.group);
        const auto& ot = b.outc.i64(b.vars.sequence);
        const auto& ol = b.outc.f64(b.vars.label);
        std::map<std::pair<std::int64_t, std::int64_t>, std::pair<std::int64_t, double>> best;
        for (std::size_t r = 0; r < oid.size(); ++r) {
            auto key = std::make_pair(oid[r], ot[r] / width);
            auto it = best.find(key);
            if (it == best.end() || ot[r] > it->second.first) best[key] = {ot[r], ol[r]};
        }
        Frame oc;
        std::vector<std::int64_t> nid, nt;
        std::vector<double> nl;
        for (const auto& [key, val] : best) {
            nid.push_back(key.first);
            nt.push_back(key.second);
            nl.push_back(val.second);
        }
        oc.add_i64(b.vars.group, std::move(nid));
        oc.add_i64(b.vars.sequence, std::move(nt));
        oc.add_f64(b.vars.label, std::move(nl));
        b.outc = std::move(oc);
    }
}

json fit_one(const StepConfig& step, const CohortBundle& b) {
    if (step.kind == "scale") return fit_scale(step.params, b);
    if (step.kind == "missing_indicator") return fit_missing_indicator(step.params, b);
    if (step.kind == "forward_fill") return json::object();
    if (step.kind == "mean_impute") return fit_mean_impute(step.params, b);
    if (step.kind == "hist_aggregate") return fit_hist_aggregate(step.params, b);
    if (step.kind == "resample") return json::object();
    throw ConfigError("unknown recipe step '" + step.kind + "'");
}

void apply_one(const std::string& kind, const json& params, const json& stats, CohortBundle& b) {
    if (kind == "scale") apply_scale(stats, b);
    else if (kind == "missing_indicator") apply_missing_indicator(stats, b);
    else if (kind == "forward_fill") apply_forward_fill(params, b);
    else if (kind == "mean_impute") apply_mean_impute(stats, b);
    else if (kind == "hist_aggregate") apply_hist_aggregate(stats, b);
    else if (kind == "resample") apply_resample(params, b);
    else throw ConfigError("unknown recipe step '" + kind + "'");
}

}  // namespace

FittedRecipe fit(const Recipe& recipe, const CohortBundle& train) {
    CohortBundle work = train;
    FittedRecipe fitted;
    for (const auto& step : recipe.steps) {
        FittedStep fs;
        fs.kind = step.kind;
        fs.params = step.params;
        fs.stats = fit_one(step, work);
        apply_one(fs.kind, fs.params, fs.stats, work);
        fitted.steps.push_back(std::move(fs));
    }
    fitted.roles = work.vars;
    return fitted;
}

CohortBundle apply(const FittedRecipe& fitted, const CohortBundle& bundle) {
    CohortBundle work = bundle;
    for (const auto& step : fitted.steps) apply_one(step.kind, step.params, step.stats, work);
    return work;
}

CohortBundle inverse_scale(const FittedRecipe& fitted, const CohortBundle& bundle) {
    CohortBundle work = bundle;
    for (auto it = fitted.steps.rbegin(); it != fitted.steps.rend(); ++it) {
        if (it->kind != "scale") continue;
        for (auto s = it->stats.begin(); s != it->stats.end(); ++s) {
            bool in_dyn = work.dyn.has(s.key());
            if (!in_dyn && !work.sta.has(s.key())) continue;
            auto& v = in_dyn ? work.dyn.f64(s.key()) : work.sta.f64(s.key());
            double mean = s.value().at("mean").get<double>();
            double sd = s.value().at("std").get<double>();
            for (auto& x : v)
                if (!is_missing(x)) x = x * sd + mean;
        }
    }
    return work;
}

}  // namespace icubench::recipes
