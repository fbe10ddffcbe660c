#include "rankmatch/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "rankmatch/errors.hpp"

namespace rankmatch::toml {

double Value::as_number() const {
    if (kind == Kind::integer) return static_cast<double>(integer);
    if (kind == Kind::floating) return floating;
    throw InputError("toml: value is not numeric");
}

namespace {

struct Lexer {
    const std::string& text;
    const std::string& origin;
    std::size_t pos = 0;
    std::size_t line = 1;

    [[noreturn]] void fail(const std::string& message) const {
        throw InputError(origin + ":" + std::to_string(line) + ": " + message);
    }

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    void skip_inline_space() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos;
        if (!eof() && peek() == '#') {
            while (!eof() && peek() != '\n') ++pos;
        }
    }

    // Also skips newlines; used inside arrays.
    void skip_all_space() {
        for (;;) {
            skip_inline_space();
            if (!eof() && peek() == '\n') {
                ++pos;
                ++line;
                continue;
            }
            return;
        }
    }

    bool consume(char c) {
        if (!eof() && peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }

    void expect(char c, const char* what) {
        if (!consume(c)) fail(std::string("expected '") + c + "' " + what);
    }

    std::string bare_token() {
        const std::size_t start = pos;
        while (!eof()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                c == '+' || c == '.') {
                ++pos;
            } else {
                break;
            }
        }
        if (pos == start) fail("expected a key or value");
        return text.substr(start, pos - start);
    }

    std::string quoted_string() {
        expect('"', "to open a string");
        std::string out;
        while (!eof() && peek() != '"') {
            char c = text[pos++];
            if (c == '\n') fail("unterminated string");
            if (c == '\\') {
                if (eof()) fail("unterminated escape");
                const char esc = text[pos++];
                switch (esc) {
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    default: fail(std::string("unsupported escape \\") + esc);
                }
            }
            out.push_back(c);
        }
        expect('"', "to close a string");
        return out;
    }

    Value scalar_from_bare(const std::string& token) {
        Value v;
        if (token == "true" || token == "false") {
            v.kind = Value::Kind::boolean;
            v.boolean = token == "true";
            return v;
        }
        {
            std::int64_t parsed = 0;
            const auto [ptr, ec] =
                std::from_chars(token.data(), token.data() + token.size(), parsed);
            if (ec == std::errc() && ptr == token.data() + token.size()) {
                v.kind = Value::Kind::integer;
                v.integer = parsed;
                return v;
            }
        }
        {
            double parsed = 0.0;
            const auto [ptr, ec] =
                std::from_chars(token.data(), token.data() + token.size(), parsed);
            if (ec == std::errc() && ptr == token.data() + token.size()) {
                v.kind = Value::Kind::floating;
                v.floating = parsed;
                return v;
            }
        }
        fail("cannot parse value '" + token + "' (strings must be quoted)");
    }

    Value value() {
        skip_all_space();
        if (eof()) fail("expected a value");
        if (peek() == '"') {
            Value v;
            v.kind = Value::Kind::string;
            v.str = quoted_string();
            return v;
        }
        if (peek() == '[') {
            ++pos;
            Value v;
            v.kind = Value::Kind::array;
            skip_all_space();
            if (consume(']')) return v;
            for (;;) {
                v.array.push_back(value());
                skip_all_space();
                if (consume(',')) {
                    skip_all_space();
                    if (consume(']')) return v;  // trailing comma
                    continue;
                }
                expect(']', "to close an array");
                return v;
            }
        }
        return scalar_from_bare(bare_token());
    }
};

}  // namespace

Table parse_string(const std::string& text, const std::string& origin) {
    Lexer lex{text, origin};
    Table table;
    std::string prefix;

    for (;;) {
        lex.skip_all_space();
        if (lex.eof()) break;

        if (lex.consume('[')) {
            prefix.clear();
            for (;;) {
                lex.skip_inline_space();
                prefix += lex.bare_token();
                lex.skip_inline_space();
                if (lex.consume('.')) {
                    prefix += '.';
                    continue;
                }
                break;
            }
            lex.expect(']', "to close a section header");
            prefix += '.';
            lex.skip_inline_space();
            if (!lex.eof() && lex.peek() != '\n') lex.fail("trailing text after section header");
            continue;
        }

        const std::string key = prefix + lex.bare_token();
        lex.skip_inline_space();
        lex.expect('=', "after key");
        Value v = lex.value();
        lex.skip_inline_space();
        if (!lex.eof() && lex.peek() != '\n') lex.fail("trailing text after value for '" + key + "'");
        if (table.count(key)) lex.fail("duplicate key '" + key + "'");
        table.emplace(key, std::move(v));
    }
    return table;
}

Table parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
}

const Value* find(const Table& table, const std::string& key) {
    const auto it = table.find(key);
    return it == table.end() ? nullptr : &it->second;
}

namespace {
const Value& require(const Table& table, const std::string& key) {
    const Value* v = find(table, key);
    if (!v) throw InputError("config: missing required key '" + key + "'");
    return *v;
}
}  // namespace

std::string get_string(const Table& table, const std::string& key) {
    const Value& v = require(table, key);
    if (v.kind != Value::Kind::string)
        throw InputError("config: key '" + key + "' must be a string");
    return v.str;
}

std::string get_string_or(const Table& table, const std::string& key,
                          const std::string& fallback) {
    return find(table, key) ? get_string(table, key) : fallback;
}

double get_number(const Table& table, const std::string& key) {
    const Value& v = require(table, key);
    if (!v.is_number()) throw InputError("config: key '" + key + "' must be numeric");
    return v.as_number();
}

double get_number_or(const Table& table, const std::string& key, double fallback) {
    return find(table, key) ? get_number(table, key) : fallback;
}

std::int64_t get_integer(const Table& table, const std::string& key) {
    const Value& v = require(table, key);
    if (v.kind != Value::Kind::integer)
        throw InputError("config: key '" + key + "' must be an integer");
    return v.integer;
}

std::int64_t get_integer_or(const Table& table, const std::string& key, std::int64_t fallback) {
    return find(table, key) ? get_integer(table, key) : fallback;
}

const Value& get_array(const Table& table, const std::string& key) {
    const Value& v = require(table, key);
    if (v.kind != Value::Kind::array)
        throw InputError("config: key '" + key + "' must be an array");
    return v;
}

}  // namespace rankmatch::toml
