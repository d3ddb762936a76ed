#include "icubench/frame.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace icubench {

std::size_t Frame::nrow() const {
    if (cols_.empty()) return 0;
    return std::visit([](const auto& v) { return v.size(); }, cols_[0]);
}

std::optional<std::size_t> Frame::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t Frame::index_of(std::string_view name) const {
    auto i = find(name);
    if (!i) throw DataError("column not found: " + std::string(name));
    return *i;
}

ColType Frame::type(std::size_t i) const {
    switch (cols_[i].index()) {
        case 0: return ColType::i64;
        case 1: return ColType::f64;
        default: return ColType::str;
    }
}

void Frame::check_rows(std::size_t n, const std::string& name) const {
    if (!cols_.empty() && n != nrow()) {
        throw DataError("column " + name + " has " + std::to_string(n) + " rows, frame has " +
                        std::to_string(nrow()));
    }
}

std::vector<std::int64_t>& Frame::i64(std::string_view name) {
    return std::get<std::vector<std::int64_t>>(cols_[index_of(name)]);
}
const std::vector<std::int64_t>& Frame::i64(std::string_view name) const {
    return std::get<std::vector<std::int64_t>>(cols_[index_of(name)]);
}
std::vector<double>& Frame::f64(std::string_view name) {
    return std::get<std::vector<double>>(cols_[index_of(name)]);
}
const std::vector<double>& Frame::f64(std::string_view name) const {
    return std::get<std::vector<double>>(cols_[index_of(name)]);
}
std::vector<std::string>& Frame::str(std::string_view name) {
    return std::get<std::vector<std::string>>(cols_[index_of(name)]);
}
const std::vector<std::string>& Frame::str(std::string_view name) const {
    return std::get<std::vector<std::string>>(cols_[index_of(name)]);
}

void Frame::add_i64(std::string name, std::vector<std::int64_t> data) {
    if (has(name)) throw DataError("duplicate column: " + name);
    check_rows(data.size(), name);
    names_.push_back(std::move(name));
    cols_.emplace_back(std::move(data));
}
void Frame::add_f64(std::string name, std::vector<double> data) {
    if (has(name)) throw DataError("duplicate column: " + name);
    check_rows(data.size(), name);
    names_.push_back(std::move(name));
    cols_.emplace_back(std::move(data));
}
void Frame::add_str(std::string name, std::vector<std::string> data) {
    if (has(name)) throw DataError("duplicate column: " + name);
    check_rows(data.size(), name);
    names_.push_back(std::move(name));
    cols_.emplace_back(std::move(data));
}

void Frame::drop(std::string_view name) {
    auto i = index_of(name);
    names_.erase(names_.begin() + static_cast<std::ptrdiff_t>(i));
    cols_.erase(cols_.begin() + static_cast<std::ptrdiff_t>(i));
}

Frame Frame::select_rows(const std::vector<std::size_t>& rows) const {
    Frame out;
    for (std::size_t c = 0; c < ncol(); ++c) {
        std::visit(
            [&](const auto& col) {
                std::decay_t<decltype(col)> sel;
                sel.reserve(rows.size());
                for (auto r : rows) sel.push_back(col[r]);
                out.names_.push_back(names_[c]);
                out.cols_.emplace_back(std::move(sel));
            },
            cols_[c]);
    }
    return out;
}

double Frame::as_double(std::size_t col, std::size_t row) const {
    const auto& c = cols_[col];
    if (std::holds_alternative<std::vector<double>>(c)) return std::get<1>(c)[row];
    if (std::holds_alternative<std::vector<std::int64_t>>(c))
        return static_cast<double>(std::get<0>(c)[row]);
    double v;
    if (!parse_double(std::get<2>(c)[row], v))
        throw DataError("cannot interpret '" + std::get<2>(c)[row] + "' in column " + names_[col] +
                        " as a number");
    return v;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && p == e;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    char* end = nullptr;
    out = std::strtod(b, &end);
    return end == b + s.size();
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch == '\r') {
            // tolerate CRLF
        } else {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    if (path.extension() == ".gz") {
        gzFile gz = gzopen(path.string().c_str(), "rb");
        if (!gz) throw DataError("cannot open " + path.string());
        std::string out;
        char buf[1 << 16];
        int n;
        while ((n = gzread(gz, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
        bool bad = n < 0;
        gzclose(gz);
        if (bad) throw DataError("gzip read error in " + path.string());
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        if (nl > start) lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string format_f64(double v) {
    if (is_missing(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_frame_csv(const Frame& frame, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t c = 0; c < frame.ncol(); ++c) {
        if (c) out << ',';
        const char* t = frame.type(c) == ColType::i64 ? "i64"
                        : frame.type(c) == ColType::f64 ? "f64"
                                                        : "str";
        out << csv_escape(frame.names()[c]) << ':' << t;
    }
    out << '\n';
    std::size_t n = frame.nrow();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < frame.ncol(); ++c) {
            if (c) out << ',';
            switch (frame.type(c)) {
                case ColType::i64: out << std::get<0>(frame.column(c))[r]; break;
                case ColType::f64: out << format_f64(std::get<1>(frame.column(c))[r]); break;
                case ColType::str: out << csv_escape(std::get<2>(frame.column(c))[r]); break;
            }
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

Frame read_frame_csv(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    auto lines = split_lines(text);
    if (lines.empty()) throw DataError("empty file: " + path.string());
    auto header = split_csv_line(lines[0]);
    Frame frame;
    std::vector<ColType> types;
    for (auto& cell : header) {
        auto colon = cell.rfind(':');
        if (colon == std::string::npos)
            throw DataError(path.string() + ": header cell '" + cell + "' lacks a :type suffix");
        std::string name = cell.substr(0, colon);
        std::string t = cell.substr(colon + 1);
        ColType type;
        if (t == "i64") type = ColType::i64;
        else if (t == "f64") type = ColType::f64;
        else if (t == "str") type = ColType::str;
        else throw DataError(path.string() + ": unknown column type '" + t + "'");
        types.push_back(type);
        std::size_t nrows = lines.size() - 1;
        switch (type) {
            case ColType::i64: frame.add_i64(name, std::vector<std::int64_t>(nrows)); break;
            case ColType::f64: frame.add_f64(name, std::vector<double>(nrows)); break;
            case ColType::str: frame.add_str(name, std::vector<std::string>(nrows)); break;
        }
    }
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto cells = split_csv_line(lines[r]);
        if (cells.size() != header.size())
            throw DataError(path.string() + ": row " + std::to_string(r) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            switch (types[c]) {
                case ColType::i64: {
                    std::int64_t v;
                    if (!parse_int64(cells[c], v))
                        throw DataError(path.string() + ": bad integer '" + cells[c] + "' at row " +
                                        std::to_string(r));
                    std::get<0>(frame.column(c))[r - 1] = v;
                    break;
                }
                case ColType::f64: {
                    double v = kMissing;
                    if (!cells[c].empty() && !parse_double(cells[c], v))
                        throw DataError(path.string() + ": bad number '" + cells[c] + "' at row " +
                                        std::to_string(r));
                    std::get<1>(frame.column(c))[r - 1] = v;
                    break;
                }
                case ColType::str: std::get<2>(frame.column(c))[r - 1] = cells[c]; break;
            }
        }
    }
    return frame;
}

Frame read_csv(const std::filesystem::path& path, const std::vector<CsvColumnRequest>& wanted) {
    std::string text = read_text_file(path);
    auto lines = split_lines(text);
    if (lines.empty()) throw DataError("empty file: " + path.string());
    auto header = split_csv_line(lines[0]);

    struct Slot {
        std::size_t cell;
        CsvColumnRequest req;
    };
    std::vector<Slot> slots;
    for (const auto& req : wanted) {
        bool found = false;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == req.raw_name) {
                slots.push_back({i, req});
                found = true;
                break;
            }
        }
        if (!found)
            throw DataError(path.string() + ": declared column '" + req.raw_name + "' not in header");
    }

    std::size_t nrows = lines.size() - 1;
    Frame frame;
    for (const auto& s : slots) {
        switch (s.req.type) {
            case ColType::i64: frame.add_i64(s.req.out_name, std::vector<std::int64_t>(nrows)); break;
            case ColType::f64: frame.add_f64(s.req.out_name, std::vector<double>(nrows)); break;
            case ColType::str: frame.add_str(s.req.out_name, std::vector<std::string>(nrows)); break;
        }
    }
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto cells = split_csv_line(lines[r]);
        for (std::size_t k = 0; k < slots.size(); ++k) {
            const auto& s = slots[k];
            if (s.cell >= cells.size())
                throw DataError(path.string() + ": short row " + std::to_string(r));
            const std::string& cell = cells[s.cell];
            switch (s.req.type) {
                case ColType::i64: {
                    std::int64_t v = 0;
                    if (!cell.empty() && !parse_int64(cell, v)) {
                        double d;  // tolerate "123.0" style integers
                        if (parse_double(cell, d) && d == std::floor(d))
                            v = static_cast<std::int64_t>(d);
                        else
                            throw DataError(path.string() + ": bad integer '" + cell + "' at row " +
                                            std::to_string(r));
                    }
                    if (cell.empty())
                        throw DataError(path.string() + ": empty integer cell at row " +
                                        std::to_string(r));
                    std::get<0>(frame.column(k))[r - 1] = v;
                    break;
                }
                case ColType::f64: {
                    double v = kMissing;
                    if (!cell.empty() && !parse_double(cell, v))
                        throw DataError(path.string() + ": bad number '" + cell + "' at row " +
                                        std::to_string(r));
                    std::get<1>(frame.column(k))[r - 1] = v;
                    break;
                }
                case ColType::str: std::get<2>(frame.column(k))[r - 1] = cell; break;
            }
        }
    }
    return frame;
}

}  // namespace icubench
