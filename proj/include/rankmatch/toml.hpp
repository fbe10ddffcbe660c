#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rankmatch::toml {

// Minimal TOML reader covering what scenario files use: [section]
// headers (dotted allowed), key = value lines, #-comments, quoted
// strings, integers, floats, booleans and (nested, multi-line) arrays.
// Keys are flattened to "section.key". Anything outside this subset is
// rejected with a line-numbered InputError.
struct Value {
    enum class Kind { string, integer, floating, boolean, array };
    Kind kind = Kind::string;
    std::string str;
    std::int64_t integer = 0;
    double floating = 0.0;
    bool boolean = false;
    std::vector<Value> array;

    bool is_number() const { return kind == Kind::integer || kind == Kind::floating; }
    double as_number() const;  // integer or floating
};

using Table = std::map<std::string, Value>;

Table parse_string(const std::string& text, const std::string& origin);
Table parse_file(const std::string& path);

// Typed lookups; `required` variants throw InputError naming the key.
const Value* find(const Table& table, const std::string& key);
std::string get_string(const Table& table, const std::string& key);
std::string get_string_or(const Table& table, const std::string& key, const std::string& fallback);
double get_number(const Table& table, const std::string& key);
double get_number_or(const Table& table, const std::string& key, double fallback);
std::int64_t get_integer(const Table& table, const std::string& key);
std::int64_t get_integer_or(const Table& table, const std::string& key, std::int64_t fallback);
const Value& get_array(const Table& table, const std::string& key);

}  // namespace rankmatch::toml
