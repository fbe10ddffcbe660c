#pragma once

#include <cstdint>
#include <string>

namespace rankmatch::jsonw {

// Number formatting for every artifact the tool writes: 17 significant
// digits, so doubles round-trip and reruns are byte-identical.
std::string number(double v);

// Hand-driven JSON writer with explicit key order; the caller opens and
// closes containers, the writer handles commas and escaping.
class Writer {
public:
    void begin_object();
    void end_object();
    void begin_array();
    void end_array();

    void key(const std::string& name);
    void string(const std::string& value);
    void number_value(double value);
    void integer(std::int64_t value);
    void unsigned_integer(std::uint64_t value);
    void boolean(bool value);

    // key/value shorthands
    void field(const std::string& name, const std::string& value);
    void field(const std::string& name, double value);
    void field_int(const std::string& name, std::int64_t value);
    void field_uint(const std::string& name, std::uint64_t value);
    void field_bool(const std::string& name, bool value);

    const std::string& str() const { return out_; }

private:
    void separate();
    std::string out_;
    // one flag per open container: whether a value was already written
    std::string pending_;
};

std::string escape(const std::string& raw);

}  // namespace rankmatch::jsonw
