#include "icubench/json_util.hpp"

#include <fstream>

namespace icubench {

namespace {

// SAX walker that only tracks object keys so duplicate keys can be reported
// with a usable path (nlohmann's DOM parser silently keeps the last one).
class DuplicateKeyChecker : public nlohmann::json_sax<json> {
public:
    std::string error;

    bool null() override { return true; }
    bool boolean(bool) override { return true; }
    bool number_integer(number_integer_t) override { return true; }
    bool number_unsigned(number_unsigned_t) override { return true; }
    bool number_float(number_float_t, const string_t&) override { return true; }
    bool string(string_t&) override { return true; }
    bool binary(binary_t&) override { return true; }

    bool start_object(std::size_t) override {
        scopes_.emplace_back();
        return true;
    }
    bool key(string_t& k) override {
        auto& scope = scopes_.back();
        if (!scope.keys.insert(k).second) {
            error = "duplicate key '" + k + "' at " + current_path(k);
            return false;
        }
        scope.current = k;
        return true;
    }
    bool end_object() override {
        scopes_.pop_back();
        return true;
    }
    bool start_array(std::size_t) override { return true; }
    bool end_array() override { return true; }
    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& ex) override {
        error = ex.what();
        return false;
    }

private:
    struct Scope {
        std::set<std::string> keys;
        std::string current;
    };
    std::vector<Scope> scopes_;

    std::string current_path(const std::string& leaf) const {
        std::string p;
        for (std::size_t i = 0; i + 1 < scopes_.size(); ++i) {
            if (!scopes_[i].current.empty()) {
                if (!p.empty()) p += '.';
                p += scopes_[i].current;
            }
        }
        if (!p.empty()) p += '.';
        return p + leaf;
    }
};

std::string line_of_offset(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

json parse_json_strict(const std::string& text, const std::string& what) {
    json out;
    try {
        out = json::parse(text);
    } catch (const json::parse_error& ex) {
        throw ConfigError(what + ": parse error at " + line_of_offset(text, ex.byte) + ": " + ex.what());
    }
    DuplicateKeyChecker checker;
    if (!json::sax_parse(text, &checker) && !checker.error.empty()) {
        throw ConfigError(what + ": " + checker.error);
    }
    return out;
}

JsonCursor JsonCursor::at(const std::string& key) const {
    require_object();
    auto it = node->find(key);
    if (it == node->end()) fail("missing required key '" + key + "'");
    return JsonCursor{&*it, path.empty() ? key : path + "." + key};
}

JsonCursor JsonCursor::at(std::size_t index) const {
    require_array();
    if (index >= node->size()) fail("index " + std::to_string(index) + " out of range");
    return JsonCursor{&(*node)[index], path + "[" + std::to_string(index) + "]"};
}

void JsonCursor::require_object() const {
    if (!node->is_object()) fail("expected an object");
}

void JsonCursor::require_array() const {
    if (!node->is_array()) fail("expected an array");
}

void JsonCursor::reject_unknown_keys(const std::set<std::string>& allowed) const {
    require_object();
    for (auto it = node->begin(); it != node->end(); ++it) {
        if (!allowed.count(it.key())) {
            fail("unknown key '" + it.key() + "'");
        }
    }
}

std::string JsonCursor::get_string() const {
    if (!node->is_string()) fail("expected a string");
    return node->get<std::string>();
}

double JsonCursor::get_number() const {
    if (!node->is_number()) fail("expected a number");
    return node->get<double>();
}

std::int64_t JsonCursor::get_int() const {
    if (!node->is_number_integer() && !node->is_number_unsigned()) fail("expected an integer");
    return node->get<std::int64_t>();
}

bool JsonCursor::get_bool() const {
    if (!node->is_boolean()) fail("expected a boolean");
    return node->get<bool>();
}

std::string JsonCursor::str_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? at(key).get_string() : fallback;
}
double JsonCursor::num_or(const std::string& key, double fallback) const {
    return has(key) ? at(key).get_number() : fallback;
}
std::int64_t JsonCursor::int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? at(key).get_int() : fallback;
}
bool JsonCursor::bool_or(const std::string& key, bool fallback) const {
    return has(key) ? at(key).get_bool() : fallback;
}

void JsonCursor::fail(const std::string& msg) const {
    throw ConfigError((path.empty() ? "config" : path) + ": " + msg);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace icubench
