#pragma once

#include <string>
#include <string_view>

#include "climattr/errors.hpp"

namespace climattr {

enum class TempUnit { fahrenheit, celsius };

inline const char* unit_label(TempUnit u) {
    return u == TempUnit::fahrenheit ? "F" : "C";
}

inline TempUnit unit_from_label(std::string_view s) {
    if (s == "F" || s == "f" || s == "fahrenheit" || s == "Fahrenheit") return TempUnit::fahrenheit;
    if (s == "C" || s == "c" || s == "celsius" || s == "Celsius") return TempUnit::celsius;
    throw SchemaError("unknown temperature unit '" + std::string(s) + "' (expected F or C)");
}

// A temperature value that knows its scale. Absolute readings, temperature
// differences and per-degree rates transform differently, so the three
// conversions are separate functions rather than one overload.
struct Temperature {
    double value = 0.0;
    TempUnit unit = TempUnit::fahrenheit;
};

// Absolute reading: T_C = (T_F - 32) / 1.8.
inline double convert_absolute(double value, TempUnit from, TempUnit to) {
    if (from == to) return value;
    if (from == TempUnit::fahrenheit) return (value - 32.0) / 1.8;
    return value * 1.8 + 32.0;
}

// Temperature difference: only the 1.8 scale factor applies.
inline double convert_delta(double value, TempUnit from, TempUnit to) {
    if (from == to) return value;
    if (from == TempUnit::fahrenheit) return value / 1.8;
    return value * 1.8;
}

// Per-degree rate (events per degree, percent per degree): the inverse
// scaling of a difference. r per degF equals 1.8 * r per degC.
inline double convert_rate(double value, TempUnit from, TempUnit to) {
    if (from == to) return value;
    if (from == TempUnit::fahrenheit) return value * 1.8;
    return value / 1.8;
}

inline Temperature to_unit(Temperature t, TempUnit to) {
    return Temperature{convert_absolute(t.value, t.unit, to), to};
}

inline void require_same_unit(TempUnit a, TempUnit b, const char* context) {
    if (a != b) {
        throw UnitMismatchError(std::string(context) + ": temperature units differ (" +
                                unit_label(a) + " vs " + unit_label(b) + ")");
    }
}

} // namespace climattr
