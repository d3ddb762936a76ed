#pragma once

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

#include "icubench/frame.hpp"

namespace icubench {

using json = nlohmann::json;

// Parse with line/offset info in the error and rejection of duplicate object keys.
json parse_json_strict(const std::string& text, const std::string& what);

// Validation helper carrying a dotted path for error messages
// ("sources.miiv[0].ids" style).
struct JsonCursor {
    const json* node;
    std::string path;

    JsonCursor at(const std::string& key) const;
    JsonCursor at(std::size_t index) const;
    bool has(const std::string& key) const { return node->is_object() && node->contains(key); }

    void require_object() const;
    void require_array() const;
    void reject_unknown_keys(const std::set<std::string>& allowed) const;

    std::string get_string() const;
    double get_number() const;
    std::int64_t get_int() const;
    bool get_bool() const;

    // Optional scalar accessors: missing key = fallback.
    std::string str_or(const std::string& key, const std::string& fallback) const;
    double num_or(const std::string& key, double fallback) const;
    std::int64_t int_or(const std::string& key, std::int64_t fallback) const;
    bool bool_or(const std::string& key, bool fallback) const;

    [[noreturn]] void fail(const std::string& msg) const;
};

inline JsonCursor cursor(const json& root, std::string name = "") {
    return JsonCursor{&root, std::move(name)};
}

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace icubench
