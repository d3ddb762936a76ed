#include "icubench/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

namespace icubench::harmonize {

Aggregate aggregate_from_string(const std::string& s) {
    if (s == "mean") return Aggregate::mean;
    if (s == "max") return Aggregate::max;
    if (s == "min") return Aggregate::min;
    if (s == "first") return Aggregate::first;
    if (s == "last") return Aggregate::last;
    if (s == "sum") return Aggregate::sum;
    throw ConfigError("unknown aggregate '" + s + "'");
}

std::string to_string(Aggregate a) {
    switch (a) {
        case Aggregate::mean: return "mean";
        case Aggregate::max: return "max";
        case Aggregate::min: return "min";
        case Aggregate::first: return "first";
        case Aggregate::last: return "last";
        case Aggregate::sum: return "sum";
    }
    return "?";
}

const ConceptDef& ConceptDictionary::at(const std::string& name) const {
    auto it = concepts.find(name);
    if (it == concepts.end()) throw DataError("concept '" + name + "' not in dictionary");
    return it->second;
}

namespace {

std::vector<std::string> parse_ids(const JsonCursor& c) {
    auto token = [](const json& v, const JsonCursor& where) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer() || v.is_number_unsigned())
            return std::to_string(v.get<std::int64_t>());
        if (v.is_number()) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
            return buf;
        }
        where.fail("ids must be strings or numbers");
    };
    std::vector<std::string> out;
    if (c.node->is_array()) {
        for (std::size_t i = 0; i < c.node->size(); ++i) out.push_back(token((*c.node)[i], c.at(i)));
        if (out.empty()) c.fail("ids must not be empty");
    } else {
        out.push_back(token(*c.node, c));
    }
    return out;
}

SourceItem parse_source_item(const JsonCursor& c) {
    c.require_object();
    c.reject_unknown_keys({"table", "sub_var", "ids", "regex", "value_var", "unit_scale"});
    SourceItem item;
    item.table = c.at("table").get_string();
    item.sub_var = c.str_or("sub_var", "");
    bool has_ids = c.has("ids");
    bool has_regex = c.has("regex");
    if (has_ids && has_regex) c.fail("'ids' and 'regex' are mutually exclusive");
    if ((has_ids || has_regex) && item.sub_var.empty())
        c.fail("'ids'/'regex' require a 'sub_var' column to filter on");
    if (has_ids) item.ids = parse_ids(c.at("ids"));
    if (has_regex) {
        item.regex = c.at("regex").get_string();
        try {
            std::regex probe(item.regex);
            (void)probe;
        } catch (const std::regex_error& e) {
            c.at("regex").fail(std::string("invalid regex: ") + e.what());
        }
    }
    item.value_var = c.at("value_var").get_string();
    if (c.has("unit_scale")) item.unit_scale = c.at("unit_scale").get_number();
    return item;
}

json source_item_to_json(const SourceItem& item) {
    json out;
    out["table"] = item.table;
    if (!item.sub_var.empty()) out["sub_var"] = item.sub_var;
    if (!item.ids.empty()) out["ids"] = item.ids;
    if (!item.regex.empty()) out["regex"] = item.regex;
    out["value_var"] = item.value_var;
    if (item.unit_scale) out["unit_scale"] = *item.unit_scale;
    return out;
}

}  // namespace

ConceptDictionary parse_concept_dictionary(const std::string& text) {
    json root = parse_json_strict(text, "concept dictionary");
    auto rc = cursor(root);
    rc.require_object();
    ConceptDictionary dict;
    for (auto it = root.begin(); it != root.end(); ++it) {
        auto c = rc.at(it.key());
        c.require_object();
        c.reject_unknown_keys({"description", "category", "unit", "aggregate", "min", "max", "sources"});
        ConceptDef def;
        def.name = it.key();
        def.description = c.str_or("description", "");
        def.category = c.str_or("category", "");
        def.unit = c.str_or("unit", "");
        if (c.has("aggregate")) def.aggregate = aggregate_from_string(c.at("aggregate").get_string());
        if (c.has("min")) def.plausible_min = c.at("min").get_number();
        if (c.has("max")) def.plausible_max = c.at("max").get_number();
        if (def.plausible_min && def.plausible_max && !(*def.plausible_min < *def.plausible_max))
            c.fail("requires min < max");
        if (c.has("sources")) {
            auto s = c.at("sources");
            s.require_object();
            for (auto ds = s.node->begin(); ds != s.node->end(); ++ds) {
                auto list = s.at(ds.key());
                list.require_array();
                std::vector<SourceItem> items;
                for (std::size_t i = 0; i < list.node->size(); ++i)
                    items.push_back(parse_source_item(list.at(i)));
                def.sources[ds.key()] = std::move(items);
            }
        }
        dict.concepts[def.name] = std::move(def);
    }
    return dict;
}

std::string serialize_concept_dictionary(const ConceptDictionary& dict) {
    json root = json::object();
    for (const auto& [name, def] : dict.concepts) {
        json c;
        if (!def.description.empty()) c["description"] = def.description;
        if (!def.category.empty()) c["category"] = def.category;
        if (!def.unit.empty()) c["unit"] = def.unit;
        c["aggregate"] = to_string(def.aggregate);
        if (def.plausible_min) c["min"] = *def.plausible_min;
        if (def.plausible_max) c["max"] = *def.plausible_max;
        if (!def.sources.empty()) {
            json s = json::object();
            for (const auto& [ds, items] : def.sources) {
                json list = json::array();
                for (const auto& item : items) list.push_back(source_item_to_json(item));
                s[ds] = std::move(list);
            }
            c["sources"] = std::move(s);
        }
        root[name] = std::move(c);
    }
    return root.dump(2);
}

const IdLevel& SourceConfig::stay_level() const {
    auto it = id_cfg.find("icustay");
    if (it == id_cfg.end()) throw ConfigError("source config lacks an 'icustay' id level");
    return it->second;
}

SourceConfig parse_source_config(const std::string& text) {
    json root = parse_json_strict(text, "source config");
    auto rc = cursor(root);
    rc.require_object();
    rc.reject_unknown_keys({"name", "id_cfg", "tables"});
    SourceConfig cfg;
    cfg.name = rc.at("name").get_string();

    auto idc = rc.at("id_cfg");
    idc.require_object();
    std::vector<int> positions;
    for (auto it = idc.node->begin(); it != idc.node->end(); ++it) {
        auto lc = idc.at(it.key());
        lc.require_object();
        lc.reject_unknown_keys({"id", "position", "start", "end", "table"});
        IdLevel level;
        level.id = lc.at("id").get_string();
        level.position = static_cast<int>(lc.at("position").get_int());
        level.start = lc.at("start").get_string();
        level.end = lc.at("end").get_string();
        level.table = lc.at("table").get_string();
        positions.push_back(level.position);
        cfg.id_cfg[it.key()] = std::move(level);
    }
    if (!cfg.id_cfg.count("icustay")) idc.fail("must define an 'icustay' level");
    std::sort(positions.begin(), positions.end());
    if (std::adjacent_find(positions.begin(), positions.end()) != positions.end())
        idc.fail("id level positions must be distinct (strict hierarchy)");

    auto tc = rc.at("tables");
    tc.require_object();
    if (tc.node->empty()) tc.fail("at least one table is required");
    for (auto it = tc.node->begin(); it != tc.node->end(); ++it) {
        auto t = tc.at(it.key());
        t.require_object();
        t.reject_unknown_keys({"files", "defaults", "cols"});
        TableDef table;
        table.file = t.at("files").get_string();
        if (t.has("defaults")) {
            auto d = t.at("defaults");
            d.require_object();
            d.reject_unknown_keys({"index_var", "time_vars"});
            table.index_var = d.str_or("index_var", "");
            if (d.has("time_vars")) {
                auto tv = d.at("time_vars");
                tv.require_array();
                for (std::size_t i = 0; i < tv.node->size(); ++i)
                    table.time_vars.push_back(tv.at(i).get_string());
            }
        }
        auto cols = t.at("cols");
        cols.require_object();
        for (auto col = cols.node->begin(); col != cols.node->end(); ++col) {
            auto cc = cols.at(col.key());
            cc.require_object();
            cc.reject_unknown_keys({"name", "spec"});
            ColumnSpec spec;
            spec.raw_name = cc.at("name").get_string();
            std::string s = cc.at("spec").get_string();
            if (s == "col_integer") spec.type = ColType::i64;
            else if (s == "col_double") spec.type = ColType::f64;
            else if (s == "col_character") spec.type = ColType::str;
            else cc.at("spec").fail("unknown column spec '" + s + "'");
            table.cols[col.key()] = std::move(spec);
        }
        if (!table.index_var.empty() && !table.cols.count(table.index_var))
            t.fail("index_var '" + table.index_var + "' is not a declared column");
        cfg.tables[it.key()] = std::move(table);
    }

    // dangling-reference checks for the id levels
    for (const auto& [name, level] : cfg.id_cfg) {
        auto t = cfg.tables.find(level.table);
        if (t == cfg.tables.end())
            throw ConfigError("id_cfg." + name + ": table '" + level.table + "' is not defined");
        for (const std::string* col : {&level.id, &level.start, &level.end}) {
            if (!t->second.cols.count(*col))
                throw ConfigError("id_cfg." + name + ": column '" + *col + "' is absent from table '" +
                                  level.table + "'");
        }
    }
    return cfg;
}

RawTables load_raw_tables(const std::filesystem::path& dir, const SourceConfig& cfg) {
    RawTables raw;
    for (const auto& [name, table] : cfg.tables) {
        std::filesystem::path path = dir / table.file;
        if (!std::filesystem::exists(path)) {
            // allow the config to name foo.csv while foo.csv.gz is on disk and vice versa
            std::filesystem::path alt =
                path.extension() == ".gz" ? path.parent_path() / path.stem() : std::filesystem::path(path.string() + ".gz");
            if (std::filesystem::exists(alt)) path = alt;
            else throw DataError("table file missing: " + path.string());
        }
        std::vector<CsvColumnRequest> wanted;
        for (const auto& [canon, spec] : table.cols) wanted.push_back({spec.raw_name, canon, spec.type});
        raw[name] = read_csv(path, wanted);
    }
    return raw;
}

std::vector<Stay> load_stays(const RawTables& raw, const SourceConfig& cfg) {
    const IdLevel& stay_level = cfg.stay_level();
    auto it = raw.find(stay_level.table);
    if (it == raw.end()) throw DataError("stay table '" + stay_level.table + "' not loaded");
    const Frame& tbl = it->second;

    const IdLevel* patient_level = nullptr;
    if (auto p = cfg.id_cfg.find("patient"); p != cfg.id_cfg.end() && p->second.table == stay_level.table)
        patient_level = &p->second;

    std::vector<Stay> stays;
    std::size_t n = tbl.nrow();
    std::size_t id_col = tbl.index_of(stay_level.id);
    std::size_t start_col = tbl.index_of(stay_level.start);
    std::size_t end_col = tbl.index_of(stay_level.end);
    std::optional<std::size_t> pat_col;
    if (patient_level) pat_col = tbl.index_of(patient_level->id);
    for (std::size_t r = 0; r < n; ++r) {
        Stay s;
        s.stay_id = static_cast<std::int64_t>(tbl.as_double(id_col, r));
        if (pat_col) s.patient_id = static_cast<std::int64_t>(tbl.as_double(*pat_col, r));
        s.admit_min = tbl.as_double(start_col, r);
        double end = tbl.as_double(end_col, r);
        if (!is_missing(end)) s.discharge_min = end;
        if (is_missing(s.admit_min)) continue;  // unusable without an anchor
        stays.push_back(s);
    }
    std::sort(stays.begin(), stays.end(), [](const Stay& a, const Stay& b) { return a.stay_id < b.stay_id; });
    return stays;
}

std::pair<std::size_t, std::size_t> EventTable::stay_range(std::int64_t stay) const {
    auto lo = std::lower_bound(stay_id.begin(), stay_id.end(), stay);
    auto hi = std::upper_bound(stay_id.begin(), stay_id.end(), stay);
    return {static_cast<std::size_t>(lo - stay_id.begin()), static_cast<std::size_t>(hi - stay_id.begin())};
}

namespace {

constexpr double kPreStayAttachMin = 7.0 * 24.0 * 60.0;  // pre-admission lookback window

struct RawEvent {
    std::int64_t stay_id;
    std::int64_t time_min;
    double value = kMissing;
    std::string category;
    std::size_t order;  // input sequence, for first/last ties
};

bool id_matches(const std::string& cell, const std::vector<std::string>& ids) {
    for (const auto& id : ids) {
        if (cell == id) return true;
        double a, b;
        if (parse_double(cell, a) && parse_double(id, b) && a == b) return true;
    }
    return false;
}

// Map a patient-level measurement time to a stay: the stay whose window contains
// it, otherwise the next stay starting within the 7-day lookback.
const Stay* stay_for_patient_time(const std::vector<const Stay*>& patient_stays, double t) {
    for (const Stay* s : patient_stays) {
        double end = s->discharge_min ? *s->discharge_min : std::numeric_limits<double>::infinity();
        if (t >= s->admit_min && t <= end) return s;
    }
    const Stay* best = nullptr;
    for (const Stay* s : patient_stays) {
        if (s->admit_min >= t && s->admit_min - t <= kPreStayAttachMin) {
            if (!best || s->admit_min < best->admit_min) best = s;
        }
    }
    return best;
}

}  // namespace

EventTable extract_concept(const RawTables& raw, const SourceConfig& cfg, const std::vector<Stay>& stays,
                           const ConceptDef& def, const std::string& dataset) {
    auto src = def.sources.find(dataset);
    if (src == def.sources.end())
        throw DataError("concept '" + def.name + "' has no source for dataset '" + dataset + "'");

    std::map<std::int64_t, const Stay*> stay_by_id;
    std::map<std::int64_t, std::vector<const Stay*>> stays_by_patient;
    for (const auto& s : stays) {
        stay_by_id[s.stay_id] = &s;
        if (s.patient_id >= 0) stays_by_patient[s.patient_id].push_back(&s);
    }
    for (auto& [pid, ps] : stays_by_patient)
        std::sort(ps.begin(), ps.end(),
                  [](const Stay* a, const Stay* b) { return a->admit_min < b->admit_min; });

    const IdLevel& stay_level = cfg.stay_level();
    const IdLevel* patient_level = nullptr;
    if (auto p = cfg.id_cfg.find("patient"); p != cfg.id_cfg.end()) patient_level = &p->second;

    std::vector<RawEvent> events;
    std::size_t order = 0;
    std::size_t dropped = 0;
    bool saw_numeric = false, saw_categorical = false;

    for (const auto& item : src->second) {
        auto tbl_it = raw.find(item.table);
        if (tbl_it == raw.end())
            throw DataError("concept '" + def.name + "': table '" + item.table + "' not loaded");
        const Frame& tbl = tbl_it->second;
        const TableDef& tdef = cfg.tables.at(item.table);

        std::size_t value_col = tbl.index_of(item.value_var);
        std::optional<std::size_t> sub_col;
        if (!item.sub_var.empty()) sub_col = tbl.index_of(item.sub_var);
        std::optional<std::size_t> time_col;
        if (!tdef.index_var.empty()) time_col = tbl.index_of(tdef.index_var);

        // row owner: stay-level id column when present, else patient-level mapping
        std::optional<std::size_t> stay_col, patient_col;
        if (tbl.has(stay_level.id)) stay_col = tbl.index_of(stay_level.id);
        else if (patient_level && tbl.has(patient_level->id)) patient_col = tbl.index_of(patient_level->id);
        else
            throw DataError("concept '" + def.name + "': table '" + item.table +
                            "' has neither a stay nor a patient id column");

        std::optional<std::regex> rgx;
        if (!item.regex.empty()) rgx.emplace(item.regex);

        std::size_t n = tbl.nrow();
        for (std::size_t r = 0; r < n; ++r) {
            if (sub_col) {
                std::string cell;
                switch (tbl.type(*sub_col)) {
                    case ColType::str: cell = std::get<2>(tbl.column(*sub_col))[r]; break;
                    case ColType::i64: cell = std::to_string(std::get<0>(tbl.column(*sub_col))[r]); break;
                    case ColType::f64: {
                        char buf[64];
                        std::snprintf(buf, sizeof(buf), "%.17g", std::get<1>(tbl.column(*sub_col))[r]);
                        cell = buf;
                        break;
                    }
                }
                if (!item.ids.empty() && !id_matches(cell, item.ids)) continue;
                if (rgx && !std::regex_search(cell, *rgx)) continue;
            }

            const Stay* owner = nullptr;
            double t_abs = 0;
            if (time_col) {
                t_abs = tbl.as_double(*time_col, r);
                if (is_missing(t_abs)) continue;
            }
            if (stay_col) {
                auto sid = static_cast<std::int64_t>(tbl.as_double(*stay_col, r));
                auto s = stay_by_id.find(sid);
                if (s == stay_by_id.end()) continue;
                owner = s->second;
                if (!time_col) t_abs = owner->admit_min;  // static table: anchor at admission
            } else {
                auto pid = static_cast<std::int64_t>(tbl.as_double(*patient_col, r));
                auto p = stays_by_patient.find(pid);
                if (p == stays_by_patient.end()) continue;
                if (!time_col) continue;  // patient-level statics are not attributable
                owner = stay_for_patient_time(p->second, t_abs);
                if (!owner) continue;
            }

            RawEvent ev;
            ev.stay_id = owner->stay_id;
            ev.time_min = static_cast<std::int64_t>(std::llround(t_abs - owner->admit_min));
            ev.order = order++;

            bool numeric = false;
            double v = kMissing;
            switch (tbl.type(value_col)) {
                case ColType::f64:
                    v = std::get<1>(tbl.column(value_col))[r];
                    numeric = true;
                    break;
                case ColType::i64:
                    v = static_cast<double>(std::get<0>(tbl.column(value_col))[r]);
                    numeric = true;
                    break;
                case ColType::str: {
                    const std::string& cell = std::get<2>(tbl.column(value_col))[r];
                    if (cell.empty()) continue;
                    numeric = parse_double(cell, v);
                    if (!numeric) ev.category = cell;
                    break;
                }
            }
            if (numeric && is_missing(v)) continue;

            if (numeric) {
                if (item.unit_scale) v *= *item.unit_scale;
                if ((def.plausible_min && v < *def.plausible_min) ||
                    (def.plausible_max && v > *def.plausible_max)) {
                    ++dropped;
                    continue;
                }
                ev.value = v;
                saw_numeric = true;
            } else {
                saw_categorical = true;
            }
            events.push_back(std::move(ev));
        }
    }

    if (saw_numeric && saw_categorical)
        throw DataError("concept '" + def.name + "': mixed numeric and categorical values");
    bool categorical = saw_categorical;
    bool needs_numeric = def.plausible_min || def.plausible_max ||
                         def.aggregate == Aggregate::mean || def.aggregate == Aggregate::sum ||
                         def.aggregate == Aggregate::min || def.aggregate == Aggregate::max;
    if (categorical && needs_numeric)
        throw DataError("concept '" + def.name + "': value column non-numeric for a numeric concept");

    std::stable_sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
        if (a.stay_id != b.stay_id) return a.stay_id < b.stay_id;
        return a.time_min < b.time_min;
    });

    EventTable out;
    out.concept_name = def.name;
    out.categorical = categorical;
    out.dropped_out_of_bounds = dropped;

    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        while (j + 1 < events.size() && events[j + 1].stay_id == events[i].stay_id &&
               events[j + 1].time_min == events[i].time_min)
            ++j;
        out.stay_id.push_back(events[i].stay_id);
        out.time_min.push_back(events[i].time_min);
        if (categorical) {
            // first/last by input order within the tie group
            std::size_t pick = i;
            for (std::size_t k = i + 1; k <= j; ++k) {
                bool newer = events[k].order > events[pick].order;
                if ((def.aggregate == Aggregate::last && newer) ||
                    (def.aggregate == Aggregate::first && !newer))
                    pick = k;
            }
            out.category.push_back(events[pick].category);
            out.value.push_back(kMissing);
        } else {
            double v;
            switch (def.aggregate) {
                case Aggregate::mean: {
                    v = 0;
                    for (std::size_t k = i; k <= j; ++k) v += events[k].value;
                    v /= static_cast<double>(j - i + 1);
                    break;
                }
                case Aggregate::sum: {
                    v = 0;
                    for (std::size_t k = i; k <= j; ++k) v += events[k].value;
                    break;
                }
                case Aggregate::min: {
                    v = events[i].value;
                    for (std::size_t k = i + 1; k <= j; ++k) v = std::min(v, events[k].value);
                    break;
                }
                case Aggregate::max: {
                    v = events[i].value;
                    for (std::size_t k = i + 1; k <= j; ++k) v = std::max(v, events[k].value);
                    break;
                }
                case Aggregate::first: {
                    std::size_t pick = i;
                    for (std::size_t k = i + 1; k <= j; ++k)
                        if (events[k].order < events[pick].order) pick = k;
                    v = events[pick].value;
                    break;
                }
                case Aggregate::last: {
                    std::size_t pick = i;
                    for (std::size_t k = i + 1; k <= j; ++k)
                        if (events[k].order > events[pick].order) pick = k;
                    v = events[pick].value;
                    break;
                }
            }
            out.value.push_back(v);
        }
        i = j + 1;
    }
    return out;
}

EventTable extract_concept(const RawTables& raw, const SourceConfig& cfg, const ConceptDef& def,
                           const std::string& dataset) {
    return extract_concept(raw, cfg, load_stays(raw, cfg), def, dataset);
}

}  // namespace icubench::harmonize
