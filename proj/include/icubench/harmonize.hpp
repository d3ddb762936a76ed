#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "icubench/frame.hpp"
#include "icubench/json_util.hpp"

namespace icubench::harmonize {

enum class Aggregate { mean, max, min, first, last, sum };

Aggregate aggregate_from_string(const std::string& s);
std::string to_string(Aggregate a);

// One way of pulling a concept out of a raw table: pick rows (by id list, regex
// on sub_var, or the whole column) and read value_var, optionally rescaled.
struct SourceItem {
    std::string table;
    std::string sub_var;              // empty = whole-column selection
    std::vector<std::string> ids;     // raw tokens; numeric-equal comparison allowed
    std::string regex;                // mutually exclusive with ids
    std::string value_var;
    std::optional<double> unit_scale;
};

struct ConceptDef {
    std::string name;
    std::string description;
    std::string category;
    std::string unit;
    Aggregate aggregate = Aggregate::last;
    std::optional<double> plausible_min, plausible_max;
    std::map<std::string, std::vector<SourceItem>> sources;  // dataset -> items
};

struct ConceptDictionary {
    std::map<std::string, ConceptDef> concepts;

    const ConceptDef& at(const std::string& name) const;
    bool has(const std::string& name) const { return concepts.count(name) != 0; }
};

ConceptDictionary parse_concept_dictionary(const std::string& text);
std::string serialize_concept_dictionary(const ConceptDictionary& dict);

struct IdLevel {
    std::string id;     // column holding this level's identifier
    int position = 0;   // hierarchy position, larger = finer (icustay > patient)
    std::string start;  // admission-time column
    std::string end;    // discharge-time column
    std::string table;  // table the id/start/end columns live in
};

struct ColumnSpec {
    std::string raw_name;  // header in the csv file
    ColType type = ColType::f64;
};

struct TableDef {
    std::string file;
    std::string index_var;               // time column; empty = static table
    std::vector<std::string> time_vars;
    std::map<std::string, ColumnSpec> cols;  // canonical name -> spec
};

struct SourceConfig {
    std::string name;
    std::map<std::string, IdLevel> id_cfg;  // level name ("patient"/"icustay") -> def
    std::map<std::string, TableDef> tables;

    const IdLevel& stay_level() const;  // finest level; must be "icustay"
};

SourceConfig parse_source_config(const std::string& text);

// Long-format single-concept table, sorted by (stay_id, time) and deduplicated
// by the concept aggregate. Values are numeric unless the concept turned out
// categorical, in which case `category` holds the raw strings.
struct EventTable {
    std::string concept_name;
    std::vector<std::int64_t> stay_id;
    std::vector<std::int64_t> time_min;  // minutes relative to ICU admission; may be negative
    std::vector<double> value;
    std::vector<std::string> category;   // parallel to rows when categorical
    bool categorical = false;
    std::size_t dropped_out_of_bounds = 0;

    std::size_t size() const { return stay_id.size(); }
    // [first, last) row range of one stay (rows are sorted by stay).
    std::pair<std::size_t, std::size_t> stay_range(std::int64_t stay) const;
};

struct Stay {
    std::int64_t stay_id = 0;
    std::int64_t patient_id = -1;
    double admit_min = 0;                 // dataset-absolute minutes
    std::optional<double> discharge_min;  // absent = missing discharge

    bool valid_los() const { return discharge_min && *discharge_min >= admit_min; }
    double los_hours() const { return (*discharge_min - admit_min) / 60.0; }
};

using RawTables = std::map<std::string, Frame>;

// Load every table named in the config from `dir` (plain or .gz csv),
// keeping only declared columns under their canonical names.
RawTables load_raw_tables(const std::filesystem::path& dir, const SourceConfig& cfg);

std::vector<Stay> load_stays(const RawTables& raw, const SourceConfig& cfg);

EventTable extract_concept(const RawTables& raw, const SourceConfig& cfg, const std::vector<Stay>& stays,
                           const ConceptDef& def, const std::string& dataset);

// Convenience overload resolving stays internally.
EventTable extract_concept(const RawTables& raw, const SourceConfig& cfg, const ConceptDef& def,
                           const std::string& dataset);

}  // namespace icubench::harmonize
