#pragma once

#include <algorithm>
#include <charconv>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "climattr/errors.hpp"

namespace climattr::csv {

// Splits one physical line into fields. Double-quoted fields may contain the
// delimiter and doubled quotes; embedded newlines are not supported.
inline std::vector<std::string> split_record(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"' && current.empty()) {
            in_quotes = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

// Line-oriented reader over delimiter-separated text. Tracks the physical
// line number so row-level failures can be reported against the source file.
class Reader {
public:
    Reader(std::istream& in, char delimiter) : in_(in), delimiter_(delimiter) {}

    // Next non-empty row, or nullopt at end of input.
    std::optional<std::vector<std::string>> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (line_ == 1 && line.size() >= 3 &&
                static_cast<unsigned char>(line[0]) == 0xEF &&
                static_cast<unsigned char>(line[1]) == 0xBB &&
                static_cast<unsigned char>(line[2]) == 0xBF) {
                line.erase(0, 3); // UTF-8 BOM
            }
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            return split_record(line, delimiter_);
        }
        return std::nullopt;
    }

    std::size_t line() const { return line_; }

private:
    std::istream& in_;
    char delimiter_;
    std::size_t line_ = 0;
};

// Index of a named column in a header row; throws SchemaError when missing.
inline std::size_t column_index(const std::vector<std::string>& header, std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == name) return i;
    }
    std::string available;
    for (const auto& h : header) {
        if (!available.empty()) available += ", ";
        available += std::string(trim(h));
    }
    throw SchemaError("column '" + std::string(name) + "' not found in header (have: " + available + ")");
}

inline std::optional<double> parse_double(std::string_view raw) {
    const auto s = trim(raw);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

inline std::optional<long long> parse_int(std::string_view raw) {
    const auto s = trim(raw);
    if (s.empty()) return std::nullopt;
    long long value = 0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

} // namespace climattr::csv
