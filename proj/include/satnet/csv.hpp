#pragma once

// Minimal CSV output: '.' decimal point whatever the global locale, shortest
// round-trip formatting, RFC 4180 quoting.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "satnet/error.hpp"

namespace satnet::csv {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw IoError("number formatting failed");
    return {buf, end};
}

// Fixed decimals, for human-facing tables.
inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
    if (ec != std::errc{}) throw IoError("number formatting failed");
    return {buf, end};
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

class Row {
public:
    Row& add(std::string_view s) {
        fields_.push_back(quote(s));
        return *this;
    }
    Row& add(const char* s) { return add(std::string_view(s)); }
    Row& add(const std::string& s) { return add(std::string_view(s)); }
    Row& add(double v) {
        fields_.push_back(format_double(v));
        return *this;
    }
    Row& add(int v) { return add(static_cast<long long>(v)); }
    Row& add(long long v) {
        fields_.push_back(std::to_string(v));
        return *this;
    }
    Row& add(std::uint64_t v) {
        fields_.push_back(std::to_string(v));
        return *this;
    }
    Row& add(bool v) {
        fields_.emplace_back(v ? "true" : "false");
        return *this;
    }
    Row& empty() {
        fields_.emplace_back();
        return *this;
    }
    template <class T>
    Row& add(const std::optional<T>& v) {
        return v ? add(*v) : empty();
    }
    // A loss in dB as (value, is_infinite); infinity becomes an empty cell.
    Row& add_loss(double db) {
        if (std::isinf(db)) {
            fields_.emplace_back();
            fields_.emplace_back("true");
        } else {
            fields_.push_back(format_double(db));
            fields_.emplace_back("false");
        }
        return *this;
    }

    [[nodiscard]] std::string str() const {
        std::string s;
        for (std::size_t k = 0; k < fields_.size(); ++k) {
            if (k) s += ',';
            s += fields_[k];
        }
        return s;
    }

private:
    std::vector<std::string> fields_;
};

// Accumulates a table, then writes it in one go. The optional comment line
// goes first, prefixed with '#'.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    void push(const Row& r) { rows_.push_back(r.str()); }
    [[nodiscard]] std::size_t size() const { return rows_.size(); }
    [[nodiscard]] std::size_t columns() const { return header_.size(); }

    [[nodiscard]] std::string str(std::string_view comment = {}) const {
        std::string s;
        if (!comment.empty()) {
            s += "# ";
            s += comment;
            s += '\n';
        }
        Row h;
        for (const auto& c : header_) h.add(c);
        s += h.str() + '\n';
        for (const auto& r : rows_) s += r + '\n';
        return s;
    }

    void write(const std::filesystem::path& path, std::string_view comment = {}) const {
        std::ofstream os(path, std::ios::binary);
        os << str(comment);
        if (!os) throw IoError("cannot write " + path.string());
    }

private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

// Splits one CSV record (no embedded newlines).
inline std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace satnet::csv
