#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "climattr/attribution.hpp"
#include "climattr/errors.hpp"
#include "climattr/ingest.hpp"
#include "climattr/simulate.hpp"
#include "climattr/stats.hpp"

namespace climattr::io {

using json = nlohmann::ordered_json;

// All floats in output files are snapped to 9 significant digits before
// serialization so repeated runs produce byte-identical files. Negative zero
// is folded into plain zero; "-0" in a report helps nobody.
inline double round_sig(double x, int digits = 9) {
    if (x == 0.0) return 0.0;
    if (!std::isfinite(x)) return x;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*e", digits - 1, x);
    return std::strtod(buf, nullptr);
}

inline std::string format_sig(double x, int digits = 9) {
    if (x == 0.0) x = 0.0;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
    return buf;
}

inline json num(double x) {
    if (std::isnan(x)) return nullptr;
    return round_sig(x);
}

// ---------------------------------------------------------------------------
// files

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

// Full content is staged to a sibling temp file and renamed into place, so a
// failed run never leaves a partial output behind.
inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out << content;
        if (!out) throw IoError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw SchemaError(what + ": invalid JSON");
    return j;
}

inline json read_json_file(const std::filesystem::path& path) {
    return parse_json(read_text_file(path), path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

namespace detail {

inline double require_number(const json& j, const std::string& key, const std::string& what) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw SchemaError(what + ": missing numeric field '" + key + "'");
    }
    return j.at(key).get<double>();
}

inline std::string require_string(const json& j, const std::string& key, const std::string& what) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw SchemaError(what + ": missing string field '" + key + "'");
    }
    return j.at(key).get<std::string>();
}

} // namespace detail

// ---------------------------------------------------------------------------
// fitted models: a JSON array of 12 per-month objects

inline json month_model_to_json(const MonthModel& m, TempUnit unit) {
    json j;
    j["month"] = m.cond.month;
    j["mu_N"] = num(m.joint.mu_n);
    j["mu_T"] = num(m.joint.mu_t);
    j["sigma_N"] = num(m.joint.sigma_n);
    j["sigma_T"] = num(m.joint.sigma_t);
    j["rho"] = num(m.joint.rho);
    j["a"] = num(m.cond.intercept);
    j["b"] = num(m.cond.slope);
    j["sigma_cond"] = num(m.cond.sigma_cond);
    j["n_points"] = m.joint.n_points;
    j["temp_unit"] = unit_label(unit);
    return j;
}

inline json model_set_to_json(const ModelSet& set) {
    json arr = json::array();
    for (const auto& m : set.months) arr.push_back(month_model_to_json(m, set.temp_unit));
    return arr;
}

// strict = fitted-model rules (positive spreads, |rho| < 1, coefficients
// consistent with the moments). Scenario months are read with strict=false.
inline MonthModel month_model_from_json(const json& j, TempUnit expected_unit, bool strict) {
    const std::string what = "model entry";
    MonthModel m;
    const int month = static_cast<int>(detail::require_number(j, "month", what));
    if (month < 1 || month > 12) throw SchemaError(what + ": month outside 1-12");
    m.joint.mu_n = detail::require_number(j, "mu_N", what);
    m.joint.mu_t = detail::require_number(j, "mu_T", what);
    m.joint.sigma_n = detail::require_number(j, "sigma_N", what);
    m.joint.sigma_t = detail::require_number(j, "sigma_T", what);
    m.joint.rho = detail::require_number(j, "rho", what);
    m.joint.n_points = j.contains("n_points") ? j.at("n_points").get<int>() : 0;
    const auto unit = unit_from_label(detail::require_string(j, "temp_unit", what));
    if (unit != expected_unit) throw SchemaError(what + ": mixed temperature units in model file");

    if (strict) {
        if (m.joint.sigma_n <= 0.0 || m.joint.sigma_t <= 0.0) {
            throw SchemaError(what + ": spreads must be positive");
        }
        if (std::abs(m.joint.rho) >= 1.0) throw SchemaError(what + ": |rho| must be below 1");
        m.cond.intercept = detail::require_number(j, "a", what);
        m.cond.slope = detail::require_number(j, "b", what);
        m.cond.sigma_cond = detail::require_number(j, "sigma_cond", what);
        m.cond.month = month;
        m.cond.temp_unit = unit;
        const auto derived = conditional_from_bivariate(m.joint, month, unit);
        const auto close = [](double x, double y) {
            return std::abs(x - y) <= 1e-6 * std::max({1.0, std::abs(x), std::abs(y)});
        };
        if (!close(derived.intercept, m.cond.intercept) || !close(derived.slope, m.cond.slope) ||
            !close(derived.sigma_cond, m.cond.sigma_cond)) {
            throw SchemaError(what + ": (a, b, sigma_cond) inconsistent with the joint moments");
        }
    } else {
        // Scenario month: the conditional coefficients are derived from the
        // moments, so hand-written files may omit them.
        climattr::detail::validate_scenario_month(m.joint, month);
        m.cond = climattr::detail::scenario_conditional(m.joint, month, unit);
    }
    return m;
}

inline ModelSet model_set_from_json(const json& arr, bool strict = true) {
    if (!arr.is_array() || arr.size() != 12) {
        throw SchemaError("model file must be an array of 12 month entries");
    }
    const auto unit = unit_from_label(detail::require_string(arr.at(0), "temp_unit", "model entry"));

    ModelSet set;
    set.temp_unit = unit;
    std::array<bool, 12> seen{};
    for (const auto& j : arr) {
        const auto m = month_model_from_json(j, unit, strict);
        const auto idx = static_cast<std::size_t>(m.cond.month - 1);
        if (seen[idx]) throw SchemaError("model file repeats month " + std::to_string(m.cond.month));
        seen[idx] = true;
        set.months[idx] = m;
    }
    return set;
}

// ---------------------------------------------------------------------------
// aligned monthly series

inline json series_to_json(std::span<const MonthlyObservation> series) {
    json arr = json::array();
    for (const auto& obs : series) {
        json j;
        j["year"] = obs.year;
        j["month"] = obs.month;
        j["count"] = obs.count;
        j["mean_temp"] = num(obs.mean_temp.value);
        j["temp_unit"] = unit_label(obs.mean_temp.unit);
        j["total_cost"] = num(obs.total_cost);
        arr.push_back(std::move(j));
    }
    return arr;
}

inline std::vector<MonthlyObservation> series_from_json(const json& arr) {
    if (!arr.is_array() || arr.empty()) throw SchemaError("series file must be a nonempty array");
    std::vector<MonthlyObservation> out;
    out.reserve(arr.size());
    for (const auto& j : arr) {
        MonthlyObservation obs;
        obs.year = static_cast<int>(detail::require_number(j, "year", "series entry"));
        obs.month = static_cast<int>(detail::require_number(j, "month", "series entry"));
        if (obs.month < 1 || obs.month > 12) throw SchemaError("series entry: month outside 1-12");
        const double count = detail::require_number(j, "count", "series entry");
        if (count < 0) throw SchemaError("series entry: negative count");
        obs.count = static_cast<long long>(std::llround(count));
        obs.mean_temp.value = detail::require_number(j, "mean_temp", "series entry");
        obs.mean_temp.unit = unit_from_label(detail::require_string(j, "temp_unit", "series entry"));
        obs.total_cost = j.contains("total_cost") ? j.at("total_cost").get<double>() : 0.0;
        out.push_back(obs);
    }
    return out;
}

// ---------------------------------------------------------------------------
// scenarios: the fitted-model schema plus drift / length / seed fields

inline json scenario_to_json(const SyntheticScenario& s) {
    json j;
    j["models"] = model_set_to_json(scenario_model_set(s));
    j["drift_per_decade"] = num(s.drift_per_decade);
    j["n_years"] = s.n_years;
    j["start_year"] = s.start_year;
    j["seed"] = s.seed;
    if (s.regime_shift) {
        SyntheticScenario shifted = s;
        shifted.months = s.regime_shift->months;
        json r;
        r["start_year"] = s.regime_shift->start_year;
        r["models"] = model_set_to_json(scenario_model_set(shifted));
        j["regime_shift"] = std::move(r);
    }
    return j;
}

inline SyntheticScenario scenario_from_json(const json& j) {
    if (!j.is_object() || !j.contains("models")) {
        throw SchemaError("scenario file must be an object with a 'models' array");
    }
    SyntheticScenario s;
    const auto set = model_set_from_json(j.at("models"), /*strict=*/false);
    s.temp_unit = set.temp_unit;
    for (std::size_t i = 0; i < 12; ++i) s.months[i] = set.months[i].joint;
    s.drift_per_decade = detail::require_number(j, "drift_per_decade", "scenario");
    s.n_years = static_cast<int>(detail::require_number(j, "n_years", "scenario"));
    if (s.n_years < 1) throw SchemaError("scenario: n_years must be at least 1");
    if (j.contains("start_year")) s.start_year = j.at("start_year").get<int>();
    if (!j.contains("seed") || !j.at("seed").is_number_unsigned()) {
        throw SchemaError("scenario: missing unsigned 'seed'");
    }
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("regime_shift")) {
        const auto& r = j.at("regime_shift");
        RegimeShift shift;
        shift.start_year = static_cast<int>(detail::require_number(r, "start_year", "regime_shift"));
        const auto shifted = model_set_from_json(r.at("models"), /*strict=*/false);
        if (shifted.temp_unit != s.temp_unit) throw SchemaError("regime_shift: temperature unit differs");
        for (std::size_t i = 0; i < 12; ++i) shift.months[i] = shifted.months[i].joint;
        s.regime_shift = std::move(shift);
    }
    validate_scenario(s);
    return s;
}

// ---------------------------------------------------------------------------
// attribution tables

inline json attribution_to_json(const AttributionResult& result, TempUnit unit) {
    json j;
    j["temp_unit"] = unit_label(unit);
    j["scheme_weight"] = num(result.scheme_weight);
    json monthly = json::array();
    for (const auto& r : result.monthly) {
        json e;
        e["year"] = r.year;
        e["month"] = r.month;
        e["N_obs"] = num(r.n_obs);
        e["T_obs"] = num(r.t_obs);
        e["T0"] = num(r.t0);
        e["delta_E"] = num(r.delta_e);
        e["alpha"] = num(r.alpha);
        e["attributed_B"] = num(r.attributed_b);
        e["natural_B"] = num(r.natural_b);
        e["blended"] = num(r.blended);
        e["expected_N"] = num(r.expected_n);
        e["alpha_saturated"] = r.alpha_saturated;
        monthly.push_back(std::move(e));
    }
    j["monthly"] = std::move(monthly);
    json annual = json::array();
    for (const auto& r : result.annual) {
        json e;
        e["year"] = r.year;
        e["N_obs"] = num(r.n_obs);
        e["delta_E"] = num(r.delta_e);
        e["attributed_B"] = num(r.attributed_b);
        e["natural_B"] = num(r.natural_b);
        e["blended"] = num(r.blended);
        e["expected_N"] = num(r.expected_n);
        e["saturated_records"] = r.saturated_records;
        annual.push_back(std::move(e));
    }
    j["annual"] = std::move(annual);
    return j;
}

inline std::string attribution_monthly_csv(const AttributionResult& result) {
    std::string out = "year,month,N_obs,T_obs,T0,delta_E,alpha,attributed_B,natural_B,blended,expected_N,alpha_saturated\n";
    for (const auto& r : result.monthly) {
        out += std::to_string(r.year) + "," + std::to_string(r.month) + "," +
               format_sig(r.n_obs) + "," + format_sig(r.t_obs) + "," + format_sig(r.t0) + "," +
               format_sig(r.delta_e) + "," + format_sig(r.alpha) + "," +
               format_sig(r.attributed_b) + "," + format_sig(r.natural_b) + "," +
               format_sig(r.blended) + "," + format_sig(r.expected_n) + "," +
               (r.alpha_saturated ? "1" : "0") + "\n";
    }
    return out;
}

inline std::string attribution_annual_csv(const AttributionResult& result) {
    std::string out = "year,N_obs,delta_E,attributed_B,natural_B,blended,expected_N,saturated_records\n";
    for (const auto& r : result.annual) {
        out += std::to_string(r.year) + "," + format_sig(r.n_obs) + "," + format_sig(r.delta_e) + "," +
               format_sig(r.attributed_b) + "," + format_sig(r.natural_b) + "," +
               format_sig(r.blended) + "," + format_sig(r.expected_n) + "," +
               std::to_string(r.saturated_records) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// diagnostics / sensitivity / projection reports

inline json diagnostics_to_json(const FitDiagnostics& d) {
    json j;
    j["yearly_sd_fraction"] = num(d.yearly_sd_fraction);
    j["jensen_gap"] = num(d.jensen_gap);
    json fit;
    fit["slope"] = num(d.yearly_fit.slope);
    fit["intercept"] = num(d.yearly_fit.intercept);
    fit["percent_per_degC"] = num(d.yearly_fit.percent_per_degc);
    fit["residual_sd"] = num(d.yearly_fit.residual_sd);
    fit["temp_unit"] = unit_label(d.yearly_fit.temp_unit);
    j["yearly_fit"] = std::move(fit);
    j["outlier_threshold"] = num(d.outlier_threshold);
    json outliers = json::array();
    for (const auto& o : d.outlier_years) {
        outliers.push_back({{"year", o.year}, {"standardized_residual", num(o.standardized_residual)}});
    }
    j["outlier_years"] = std::move(outliers);
    return j;
}

inline json sensitivity_to_json(const SensitivityReport& r) {
    json j;
    j["mode"] = sensitivity_mode_label(r.mode);
    j["average_percent_per_degC"] = num(r.average_percent_per_degc);
    json per_month = json::array();
    for (std::size_t i = 0; i < 12; ++i) {
        per_month.push_back({{"month", static_cast<int>(i + 1)},
                             {"percent_per_degC", num(r.percent_per_month[i])},
                             {"mean_count", num(r.mean_count[i])}});
    }
    j["per_month"] = std::move(per_month);
    j["excluded_months"] = r.excluded_months;
    j["counterfactual_annual"] = num(r.counterfactual_annual);
    j["observed_annual"] = num(r.observed_annual);
    j["percent_increase_vs_baseline"] = num(r.percent_increase_vs_baseline);
    j["delta_T_degC"] = num(r.delta_t_degc);
    return j;
}

inline json projection_to_json(const CostProjection& p) {
    json j;
    j["counterfactual_annual"] = num(p.counterfactual_annual);
    j["percent_per_degC"] = num(p.percent_per_degc);
    j["delta_T_now_degC"] = num(p.delta_t_now_degc);
    j["delta_T_horizon_degC"] = num(p.delta_t_horizon_degc);
    j["avg_cost_per_event"] = num(p.avg_cost_per_event);
    j["warming_rate_degC_per_decade"] = num(p.warming_rate_degc_per_decade);
    j["horizon_years"] = p.horizon_years;
    j["current_attributed_cost_per_year"] = num(p.current_attributed_cost);
    j["projected_attributed_cost_per_year"] = num(p.projected_attributed_cost);
    return j;
}

} // namespace climattr::io
