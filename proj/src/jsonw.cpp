#include "rankmatch/jsonw.hpp"

#include <cmath>
#include <cstdio>

namespace rankmatch::jsonw {

std::string number(double v) {
    if (!std::isfinite(v)) return "null";
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

std::string escape(const std::string& raw) {
    std::string out;
    out.reserve(raw.size() + 2);
    for (const char c : raw) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buffer[8];
                    std::snprintf(buffer, sizeof(buffer), "\\u%04x", c);
                    out += buffer;
                } else {
                    out.push_back(c);
                }
        }
    }
    return out;
}

// Container states: '0' empty, '1' has items, '2' key written and a
// value is expected without a comma.
void Writer::separate() {
    if (pending_.empty()) return;
    char& top = pending_.back();
    if (top == '1') out_.push_back(',');
    top = '1';
}

void Writer::begin_object() {
    separate();
    out_.push_back('{');
    pending_.push_back('0');
}

void Writer::end_object() {
    out_.push_back('}');
    pending_.pop_back();
}

void Writer::begin_array() {
    separate();
    out_.push_back('[');
    pending_.push_back('0');
}

void Writer::end_array() {
    out_.push_back(']');
    pending_.pop_back();
}

void Writer::key(const std::string& name) {
    separate();
    out_.push_back('"');
    out_ += escape(name);
    out_ += "\":";
    if (!pending_.empty()) pending_.back() = '2';
}

void Writer::string(const std::string& value) {
    separate();
    out_.push_back('"');
    out_ += escape(value);
    out_.push_back('"');
}

void Writer::number_value(double value) {
    separate();
    out_ += number(value);
}

void Writer::integer(std::int64_t value) {
    separate();
    out_ += std::to_string(value);
}

void Writer::unsigned_integer(std::uint64_t value) {
    separate();
    out_ += std::to_string(value);
}

void Writer::boolean(bool value) {
    separate();
    out_ += value ? "true" : "false";
}

void Writer::field(const std::string& name, const std::string& value) {
    key(name);
    string(value);
}

void Writer::field(const std::string& name, double value) {
    key(name);
    number_value(value);
}

void Writer::field_int(const std::string& name, std::int64_t value) {
    key(name);
    integer(value);
}

void Writer::field_uint(const std::string& name, std::uint64_t value) {
    key(name);
    unsigned_integer(value);
}

void Writer::field_bool(const std::string& name, bool value) {
    key(name);
    boolean(value);
}

}  // namespace rankmatch::jsonw
