#pragma once

#include <array>
#include <cctype>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "climattr/csv.hpp"
#include "climattr/errors.hpp"
#include "climattr/units.hpp"

namespace climattr {

struct Date {
    int year = 0;
    int month = 0; // 1-12
    int day = 0;   // 1-31
};

// One damaging event as recorded in the raw file.
struct EventRecord {
    Date date;
    double damage_cost = 0.0; // one currency unit throughout a dataset
    std::string region_tag;
};

struct TemperatureRecord {
    int year = 0;
    int month = 0;
    Temperature mean_temp;
};

// One (year, month) cell of the aligned series: event count, mean
// temperature and summed damage cost. Months with no events are kept with
// count 0 rather than dropped.
struct MonthlyObservation {
    int year = 0;
    int month = 0;
    long long count = 0;
    Temperature mean_temp;
    double total_cost = 0.0;
};

// Counterfactual temperature per calendar month (index 0 = January).
struct MonthlyBaseline {
    std::array<double, 12> t0{};
    TempUnit unit = TempUnit::fahrenheit;

    double for_month(int month) const { return t0.at(static_cast<std::size_t>(month - 1)); }
};

struct EventSchema {
    std::string date_column;
    std::string cost_column;
    std::optional<std::string> region_column;
    char delimiter = ',';
    // Magnitude suffixes on cost fields, keyed by upper-case suffix ("K" -> 1e3).
    std::map<std::string, double> cost_suffixes = {{"K", 1e3}, {"M", 1e6}, {"B", 1e9}};
};

struct TemperatureSchema {
    std::string year_column;
    std::string month_column;
    std::string temp_column;
    char delimiter = ',';
};

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct EventParseResult {
    std::vector<EventRecord> records;
    std::vector<RowError> row_errors;
};

struct YearWindow {
    int start_year = 0;
    int end_year = 0;
    // Exact-match filter on region_tag; empty means keep everything.
    std::vector<std::string> regions;
};

namespace detail {

inline bool leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
    static constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && leap_year(y)) return 29;
    return lengths[m - 1];
}

// Accepts "YYYY-MM-DD" and "MM/DD/YYYY", each optionally followed by a
// space and a time-of-day that is ignored.
inline std::optional<Date> parse_date(std::string_view raw) {
    auto s = csv::trim(raw);
    if (const auto sp = s.find(' '); sp != std::string_view::npos) s = s.substr(0, sp);

    char sep = 0;
    if (s.find('-') != std::string_view::npos) sep = '-';
    else if (s.find('/') != std::string_view::npos) sep = '/';
    else return std::nullopt;

    const auto p1 = s.find(sep);
    const auto p2 = s.find(sep, p1 + 1);
    if (p1 == std::string_view::npos || p2 == std::string_view::npos) return std::nullopt;

    const auto f1 = csv::parse_int(s.substr(0, p1));
    const auto f2 = csv::parse_int(s.substr(p1 + 1, p2 - p1 - 1));
    const auto f3 = csv::parse_int(s.substr(p2 + 1));
    if (!f1 || !f2 || !f3) return std::nullopt;

    Date d;
    if (sep == '-') {
        d = {static_cast<int>(*f1), static_cast<int>(*f2), static_cast<int>(*f3)};
    } else {
        d = {static_cast<int>(*f3), static_cast<int>(*f1), static_cast<int>(*f2)};
    }
    if (d.year < 1 || d.month < 1 || d.month > 12) return std::nullopt;
    if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return std::nullopt;
    return d;
}

// Cost field, optionally "$"-prefixed, optionally carrying a magnitude
// suffix from the schema table ("57.8K" -> 57800).
inline std::optional<double> parse_cost(std::string_view raw,
                                        const std::map<std::string, double>& suffixes,
                                        std::string& error) {
    auto s = csv::trim(raw);
    if (s.empty()) return 0.0; // blank cost cells mean "no recorded damage"
    if (s.front() == '$') s.remove_prefix(1);

    std::size_t suffix_at = s.size();
    while (suffix_at > 0 && std::isalpha(static_cast<unsigned char>(s[suffix_at - 1]))) --suffix_at;
    const auto number_part = s.substr(0, suffix_at);
    std::string suffix(s.substr(suffix_at));
    for (auto& c : suffix) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

    const auto value = csv::parse_double(number_part);
    if (!value) {
        error = "unparseable cost '" + std::string(raw) + "'";
        return std::nullopt;
    }
    double scale = 1.0;
    if (!suffix.empty()) {
        const auto it = suffixes.find(suffix);
        if (it == suffixes.end()) {
            error = "unknown cost suffix '" + suffix + "' in '" + std::string(raw) + "'";
            return std::nullopt;
        }
        scale = it->second;
    }
    const double cost = *value * scale;
    if (cost < 0.0) {
        error = "negative cost '" + std::string(raw) + "'";
        return std::nullopt;
    }
    return cost;
}

} // namespace detail

// Reads the raw event file. Rows that fail to parse are collected with their
// line numbers and skipped; a file that yields no records at all is an error.
inline EventParseResult parse_events(std::istream& in, const EventSchema& schema) {
    csv::Reader reader(in, schema.delimiter);
    const auto header = reader.next();
    if (!header) throw ParseError("event input is empty");

    const auto date_col = csv::column_index(*header, schema.date_column);
    const auto cost_col = csv::column_index(*header, schema.cost_column);
    std::optional<std::size_t> region_col;
    if (schema.region_column) region_col = csv::column_index(*header, *schema.region_column);

    EventParseResult result;
    while (auto row = reader.next()) {
        const auto line = reader.line();
        const auto width = std::max({date_col, cost_col, region_col.value_or(0)});
        if (row->size() <= width) {
            result.row_errors.push_back({line, "too few fields"});
            continue;
        }
        const auto date = detail::parse_date((*row)[date_col]);
        if (!date) {
            result.row_errors.push_back({line, "unparseable date '" + (*row)[date_col] + "'"});
            continue;
        }
        std::string cost_error;
        const auto cost = detail::parse_cost((*row)[cost_col], schema.cost_suffixes, cost_error);
        if (!cost) {
            result.row_errors.push_back({line, cost_error});
            continue;
        }
        EventRecord rec;
        rec.date = *date;
        rec.damage_cost = *cost;
        if (region_col) rec.region_tag = std::string(csv::trim((*row)[*region_col]));
        result.records.push_back(std::move(rec));
    }
    if (result.records.empty()) {
        throw ParseError("no event rows parsed successfully (" +
                         std::to_string(result.row_errors.size()) + " rows failed)");
    }
    return result;
}

// Reads the monthly temperature file. Unlike events, this series is the
// backbone of the analysis, so any bad row is fatal.
inline std::vector<TemperatureRecord> parse_temperatures(std::istream& in,
                                                         const TemperatureSchema& schema,
                                                         TempUnit unit) {
    csv::Reader reader(in, schema.delimiter);
    const auto header = reader.next();
    if (!header) throw ParseError("temperature input is empty");

    const auto year_col = csv::column_index(*header, schema.year_column);
    const auto month_col = csv::column_index(*header, schema.month_column);
    const auto temp_col = csv::column_index(*header, schema.temp_column);

    std::vector<TemperatureRecord> records;
    std::set<std::pair<int, int>> seen;
    while (auto row = reader.next()) {
        const auto line = std::to_string(reader.line());
        const auto width = std::max({year_col, month_col, temp_col});
        if (row->size() <= width) throw ParseError("line " + line + ": too few fields");

        const auto year = csv::parse_int((*row)[year_col]);
        const auto month = csv::parse_int((*row)[month_col]);
        const auto temp = csv::parse_double((*row)[temp_col]);
        if (!year) throw ParseError("line " + line + ": unparseable year '" + (*row)[year_col] + "'");
        if (!month) throw ParseError("line " + line + ": unparseable month '" + (*row)[month_col] + "'");
        if (*month < 1 || *month > 12) {
            throw ParseError("line " + line + ": month " + std::to_string(*month) + " outside 1-12");
        }
        if (!temp) throw ParseError("line " + line + ": non-numeric temperature '" + (*row)[temp_col] + "'");

        const auto key = std::make_pair(static_cast<int>(*year), static_cast<int>(*month));
        if (!seen.insert(key).second) {
            throw ParseError("line " + line + ": duplicate temperature record for " +
                             std::to_string(key.first) + "-" + std::to_string(key.second));
        }
        records.push_back({key.first, key.second, Temperature{*temp, unit}});
    }
    if (records.empty()) throw ParseError("no temperature rows parsed");
    return records;
}

// Aligns events with the temperature series over an inclusive year window.
// Every window month must have a temperature record; months without events
// get count 0 so quiet months still inform the fit.
inline std::vector<MonthlyObservation> aggregate_monthly(std::span<const EventRecord> events,
                                                         std::span<const TemperatureRecord> temps,
                                                         const YearWindow& window) {
    if (window.start_year > window.end_year) {
        throw UsageError("window start year exceeds end year");
    }

    std::map<std::pair<int, int>, Temperature> temp_by_month;
    std::optional<TempUnit> unit;
    for (const auto& t : temps) {
        if (unit && *unit != t.mean_temp.unit) {
            throw UnitMismatchError("temperature series mixes units");
        }
        unit = t.mean_temp.unit;
        temp_by_month[{t.year, t.month}] = t.mean_temp;
    }

    std::string gaps;
    for (int y = window.start_year; y <= window.end_year; ++y) {
        for (int m = 1; m <= 12; ++m) {
            if (!temp_by_month.count({y, m})) {
                if (!gaps.empty()) gaps += ", ";
                gaps += std::to_string(y) + "-" + (m < 10 ? "0" : "") + std::to_string(m);
            }
        }
    }
    if (!gaps.empty()) throw CoverageError("missing temperature for window months: " + gaps);

    const auto in_region = [&](const EventRecord& e) {
        if (window.regions.empty()) return true;
        for (const auto& r : window.regions) {
            if (e.region_tag == r) return true;
        }
        return false;
    };

    std::map<std::pair<int, int>, std::pair<long long, double>> tally; // (count, cost)
    for (const auto& e : events) {
        if (e.date.year < window.start_year || e.date.year > window.end_year) continue;
        if (!in_region(e)) continue;
        auto& cell = tally[{e.date.year, e.date.month}];
        cell.first += 1;
        cell.second += e.damage_cost;
    }

    std::vector<MonthlyObservation> out;
    out.reserve(static_cast<std::size_t>(window.end_year - window.start_year + 1) * 12);
    for (int y = window.start_year; y <= window.end_year; ++y) {
        for (int m = 1; m <= 12; ++m) {
            MonthlyObservation obs;
            obs.year = y;
            obs.month = m;
            obs.mean_temp = temp_by_month.at({y, m});
            if (const auto it = tally.find({y, m}); it != tally.end()) {
                obs.count = it->second.first;
                obs.total_cost = it->second.second;
            }
            out.push_back(obs);
        }
    }
    return out;
}

// Baseline file: rows of (month, temperature), one per calendar month, with
// an optional header line.
inline MonthlyBaseline baseline_from_file(std::istream& in, TempUnit unit, char delimiter = ',') {
    csv::Reader reader(in, delimiter);
    MonthlyBaseline baseline;
    baseline.unit = unit;
    std::set<int> seen;
    bool first = true;
    while (auto row = reader.next()) {
        if (row->size() < 2) {
            throw ParseError("baseline line " + std::to_string(reader.line()) + ": expected (month, temperature)");
        }
        const auto month = csv::parse_int((*row)[0]);
        if (!month && first) {
            first = false;
            continue; // header row
        }
        first = false;
        const auto temp = csv::parse_double((*row)[1]);
        if (!month || *month < 1 || *month > 12) {
            throw ParseError("baseline line " + std::to_string(reader.line()) + ": bad month '" + (*row)[0] + "'");
        }
        if (!temp) {
            throw ParseError("baseline line " + std::to_string(reader.line()) + ": bad temperature '" + (*row)[1] + "'");
        }
        if (!seen.insert(static_cast<int>(*month)).second) {
            throw ParseError("baseline month " + std::to_string(*month) + " appears twice");
        }
        baseline.t0[static_cast<std::size_t>(*month - 1)] = *temp;
    }
    if (seen.size() != 12) {
        std::string missing;
        for (int m = 1; m <= 12; ++m) {
            if (!seen.count(m)) {
                if (!missing.empty()) missing += ", ";
                missing += std::to_string(m);
            }
        }
        throw ParseError("baseline incomplete: missing months " + missing);
    }
    return baseline;
}

inline MonthlyBaseline convert_baseline(const MonthlyBaseline& b, TempUnit to) {
    MonthlyBaseline out;
    out.unit = to;
    for (std::size_t i = 0; i < 12; ++i) out.t0[i] = convert_absolute(b.t0[i], b.unit, to);
    return out;
}

} // namespace climattr
