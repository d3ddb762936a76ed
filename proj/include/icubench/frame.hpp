#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace icubench {

// Config/schema problems (bad JSON, unknown keys, invalid CLI usage). CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with the data itself (missing files, schema mismatch, bad values). CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return v != v; }

enum class ColType { i64, f64, str };

using ColumnData = std::variant<std::vector<std::int64_t>, std::vector<double>, std::vector<std::string>>;

// Column-oriented table. f64 columns use NaN for missing; i64/str columns have no
// missing representation and are used for keys and raw text.
class Frame {
public:
    std::size_t ncol() const { return names_.size(); }
    std::size_t nrow() const;

    const std::vector<std::string>& names() const { return names_; }
    bool has(std::string_view name) const { return find(name).has_value(); }
    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;  // throws DataError

    ColType type(std::size_t i) const;

    std::vector<std::int64_t>& i64(std::string_view name);
    const std::vector<std::int64_t>& i64(std::string_view name) const;
    std::vector<double>& f64(std::string_view name);
    const std::vector<double>& f64(std::string_view name) const;
    std::vector<std::string>& str(std::string_view name);
    const std::vector<std::string>& str(std::string_view name) const;

    void add_i64(std::string name, std::vector<std::int64_t> data);
    void add_f64(std::string name, std::vector<double> data);
    void add_str(std::string name, std::vector<std::string> data);
    void drop(std::string_view name);

    Frame select_rows(const std::vector<std::size_t>& rows) const;

    // Cell as double; i64 converted, str parsed (DataError when unparseable).
    double as_double(std::size_t col, std::size_t row) const;

    const ColumnData& column(std::size_t i) const { return cols_[i]; }
    ColumnData& column(std::size_t i) { return cols_[i]; }

private:
    void check_rows(std::size_t n, const std::string& name) const;

    std::vector<std::string> names_;
    std::vector<ColumnData> cols_;
};

// Typed-header CSV: header cells are "name:i64", "name:f64" or "name:str".
// Empty f64 cells round-trip as NaN. Used for cohort files and caches.
void write_frame_csv(const Frame& frame, const std::filesystem::path& path);
Frame read_frame_csv(const std::filesystem::path& path);

// Plain CSV with caller-declared column types. Columns not requested are
// skipped; the same raw column may feed several outputs. Supports .gz when the
// file ends in .gz.
struct CsvColumnRequest {
    std::string raw_name;  // header in the csv file
    std::string out_name;  // name in the resulting frame
    ColType type;
};
Frame read_csv(const std::filesystem::path& path, const std::vector<CsvColumnRequest>& wanted);

// Whole file as text, transparently gunzipping *.gz.
std::string read_text_file(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

bool parse_int64(const std::string& s, std::int64_t& out);
bool parse_double(const std::string& s, double& out);

}  // namespace icubench
