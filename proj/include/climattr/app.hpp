#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "climattr/attribution.hpp"
#include "climattr/errors.hpp"
#include "climattr/ingest.hpp"
#include "climattr/model_io.hpp"
#include "climattr/rng.hpp"
#include "climattr/simulate.hpp"
#include "climattr/stats.hpp"

namespace climattr::app {

// A self-check (Monte Carlo expectation test) came out wrong. Mapped to
// exit code 1, distinct from bad input (2/3) and bad invocation (64).
class CheckFailure : public Error {
public:
    using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitUsage = 64;

// Everything the subcommands consume. A JSON config file fills this first,
// then command-line flags overwrite individual fields.
struct RunConfig {
    std::string config_path;

    // inputs
    std::string events_csv;
    std::string temps_csv;
    std::string series_json;
    std::string models_json;
    std::string baseline_csv;
    std::string baseline_years; // "FIRST:LAST", inclusive
    std::string scenario_json;

    // raw CSV column mapping
    std::string date_column = "date";
    std::string cost_column = "cost";
    std::string region_column;
    std::string event_delimiter = ",";
    std::string year_column = "year";
    std::string month_column = "month";
    std::string temp_column = "temp";
    std::string temp_delimiter = ",";
    std::string temp_unit = "F";     // unit of raw temperature values
    std::string baseline_unit;       // empty: same as temp_unit

    int start_year = 0;
    int end_year = 0;
    std::vector<std::string> regions;

    // analysis knobs
    double scheme_weight = 0.5;
    std::string mode = "mean-of-monthly";
    std::string weighting = "unweighted";
    double outlier_threshold = 2.0;

    // projection inputs
    double avg_cost = std::numeric_limits<double>::quiet_NaN();
    double warming_per_decade = 0.0;
    std::string warming_unit = "C";
    int horizon_years = 10;
    double delta_t_degc = std::numeric_limits<double>::quiet_NaN();
    double override_counterfactual = std::numeric_limits<double>::quiet_NaN();
    double override_percent = std::numeric_limits<double>::quiet_NaN();

    // simulation knobs
    int mc_samples = 20000;
    int replicates = 200; // 0 disables the volatility summary
    bool invert_alpha = false;
    std::uint64_t seed = 0;
    bool seed_set = false;

    // outputs
    std::string output_dir = "out";
    std::string models_out;
    std::string diagnostics_out;
    std::string series_out;
    std::string monthly_out;
    std::string annual_out;
    std::string attribution_json_out;
    std::string sensitivity_out;
    std::string projection_out;
    std::string truth_models_out;
    std::string sim_report_out;
    std::string report_out;
};

namespace detail {

inline double cfg_num(const io::json& v, const std::string& key) {
    if (!v.is_number()) throw SchemaError("config: '" + key + "' must be a number");
    return v.get<double>();
}

inline int cfg_int(const io::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw SchemaError("config: '" + key + "' must be an integer");
    return v.get<int>();
}

inline std::string cfg_str(const io::json& v, const std::string& key) {
    if (!v.is_string()) throw SchemaError("config: '" + key + "' must be a string");
    return v.get<std::string>();
}

} // namespace detail

inline void apply_config(RunConfig& cfg, const io::json& j) {
    if (!j.is_object()) throw SchemaError("config: top level must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "events_csv") cfg.events_csv = detail::cfg_str(value, key);
        else if (key == "temps_csv") cfg.temps_csv = detail::cfg_str(value, key);
        else if (key == "series_json") cfg.series_json = detail::cfg_str(value, key);
        else if (key == "models_json") cfg.models_json = detail::cfg_str(value, key);
        else if (key == "baseline_csv") cfg.baseline_csv = detail::cfg_str(value, key);
        else if (key == "baseline_years") cfg.baseline_years = detail::cfg_str(value, key);
        else if (key == "scenario_json") cfg.scenario_json = detail::cfg_str(value, key);
        else if (key == "date_column") cfg.date_column = detail::cfg_str(value, key);
        else if (key == "cost_column") cfg.cost_column = detail::cfg_str(value, key);
        else if (key == "region_column") cfg.region_column = detail::cfg_str(value, key);
        else if (key == "event_delimiter") cfg.event_delimiter = detail::cfg_str(value, key);
        else if (key == "year_column") cfg.year_column = detail::cfg_str(value, key);
        else if (key == "month_column") cfg.month_column = detail::cfg_str(value, key);
        else if (key == "temp_column") cfg.temp_column = detail::cfg_str(value, key);
        else if (key == "temp_delimiter") cfg.temp_delimiter = detail::cfg_str(value, key);
        else if (key == "temp_unit") cfg.temp_unit = detail::cfg_str(value, key);
        else if (key == "baseline_unit") cfg.baseline_unit = detail::cfg_str(value, key);
        else if (key == "start_year") cfg.start_year = detail::cfg_int(value, key);
        else if (key == "end_year") cfg.end_year = detail::cfg_int(value, key);
        else if (key == "regions") {
            if (!value.is_array()) throw SchemaError("config: 'regions' must be an array");
            cfg.regions.clear();
            for (const auto& r : value) cfg.regions.push_back(detail::cfg_str(r, key));
        } else if (key == "scheme_weight") cfg.scheme_weight = detail::cfg_num(value, key);
        else if (key == "mode") cfg.mode = detail::cfg_str(value, key);
        else if (key == "weighting") cfg.weighting = detail::cfg_str(value, key);
        else if (key == "outlier_threshold") cfg.outlier_threshold = detail::cfg_num(value, key);
        else if (key == "avg_cost_per_event") cfg.avg_cost = detail::cfg_num(value, key);
        else if (key == "warming_rate_per_decade") cfg.warming_per_decade = detail::cfg_num(value, key);
        else if (key == "warming_rate_unit") cfg.warming_unit = detail::cfg_str(value, key);
        else if (key == "horizon_years") cfg.horizon_years = detail::cfg_int(value, key);
        else if (key == "delta_T_degC") cfg.delta_t_degc = detail::cfg_num(value, key);
        else if (key == "sensitivity_override") {
            if (!value.is_object()) throw SchemaError("config: 'sensitivity_override' must be an object");
            for (const auto& [k2, v2] : value.items()) {
                if (k2 == "counterfactual_annual") cfg.override_counterfactual = detail::cfg_num(v2, k2);
                else if (k2 == "percent_per_degC") cfg.override_percent = detail::cfg_num(v2, k2);
                else if (k2 == "delta_T_degC") cfg.delta_t_degc = detail::cfg_num(v2, k2);
                else throw SchemaError("config: unknown sensitivity_override key '" + k2 + "'");
            }
        } else if (key == "mc_samples") cfg.mc_samples = detail::cfg_int(value, key);
        else if (key == "replicates") cfg.replicates = detail::cfg_int(value, key);
        else if (key == "invert_alpha") {
            if (!value.is_boolean()) throw SchemaError("config: 'invert_alpha' must be a boolean");
            cfg.invert_alpha = value.get<bool>();
        } else if (key == "seed") {
            if (!value.is_number_unsigned()) throw SchemaError("config: 'seed' must be a nonnegative integer");
            cfg.seed = value.get<std::uint64_t>();
            cfg.seed_set = true;
        } else if (key == "output_dir") cfg.output_dir = detail::cfg_str(value, key);
        else throw SchemaError("config: unknown key '" + key + "'");
    }
}

namespace detail {

inline char single_delimiter(const std::string& s, const char* what) {
    if (s.size() != 1) throw UsageError(std::string(what) + " must be a single character");
    return s[0];
}

inline SensitivityMode mode_from_label(const std::string& s) {
    if (s == "mean-of-monthly") return SensitivityMode::mean_of_monthly;
    if (s == "baseline-comparison") return SensitivityMode::baseline_comparison;
    throw UsageError("unknown mode '" + s + "' (expected mean-of-monthly or baseline-comparison)");
}

inline MonthlyWeighting weighting_from_label(const std::string& s) {
    if (s == "unweighted") return MonthlyWeighting::unweighted;
    if (s == "count-weighted") return MonthlyWeighting::count_weighted;
    throw UsageError("unknown weighting '" + s + "' (expected unweighted or count-weighted)");
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& explicit_path,
                                      const char* default_name) {
    if (!explicit_path.empty()) return explicit_path;
    return std::filesystem::path(cfg.output_dir) / default_name;
}

struct LoadedSeries {
    std::vector<MonthlyObservation> series;
    std::vector<RowError> row_errors;
};

inline LoadedSeries load_series(const RunConfig& cfg) {
    LoadedSeries out;
    if (!cfg.series_json.empty()) {
        out.series = io::series_from_json(io::read_json_file(cfg.series_json));
        const auto unit = out.series.front().mean_temp.unit;
        for (const auto& obs : out.series) {
            require_same_unit(obs.mean_temp.unit, unit, "series file");
        }
        return out;
    }
    if (cfg.events_csv.empty() || cfg.temps_csv.empty()) {
        throw UsageError("need either --series or both --events and --temps");
    }
    if (cfg.start_year == 0 || cfg.end_year == 0) {
        throw UsageError("--start-year and --end-year are required with raw CSV inputs");
    }

    EventSchema es;
    es.date_column = cfg.date_column;
    es.cost_column = cfg.cost_column;
    if (!cfg.region_column.empty()) es.region_column = cfg.region_column;
    es.delimiter = single_delimiter(cfg.event_delimiter, "event delimiter");

    TemperatureSchema ts;
    ts.year_column = cfg.year_column;
    ts.month_column = cfg.month_column;
    ts.temp_column = cfg.temp_column;
    ts.delimiter = single_delimiter(cfg.temp_delimiter, "temperature delimiter");

    const auto unit = unit_from_label(cfg.temp_unit);

    std::ifstream ev(cfg.events_csv);
    if (!ev) throw IoError("cannot open " + cfg.events_csv);
    auto parsed = parse_events(ev, es);
    out.row_errors = std::move(parsed.row_errors);

    std::ifstream tf(cfg.temps_csv);
    if (!tf) throw IoError("cannot open " + cfg.temps_csv);
    const auto temps = parse_temperatures(tf, ts, unit);

    YearWindow window{cfg.start_year, cfg.end_year, cfg.regions};
    out.series = aggregate_monthly(parsed.records, temps, window);
    return out;
}

inline void warn_row_errors(const std::vector<RowError>& errors) {
    if (errors.empty()) return;
    io::json rows = io::json::array();
    for (std::size_t i = 0; i < errors.size() && i < 5; ++i) {
        rows.push_back({{"line", errors[i].line}, {"message", errors[i].message}});
    }
    io::json w;
    w["warning"] = {{"type", "row_errors"}, {"count", errors.size()}, {"first_rows", rows}};
    std::cerr << w.dump() << "\n";
}

inline void convert_series_unit(std::vector<MonthlyObservation>& series, TempUnit to) {
    for (auto& obs : series) obs.mean_temp = to_unit(obs.mean_temp, to);
}

// T0 per calendar month as the mean observed temperature over an inclusive
// year range, e.g. the pre-warming head of the record.
inline MonthlyBaseline baseline_from_years(std::span<const MonthlyObservation> series,
                                           const std::string& range) {
    const auto colon = range.find(':');
    if (colon == std::string::npos) throw UsageError("baseline years must look like FIRST:LAST");
    const auto first = csv::parse_int(std::string_view(range).substr(0, colon));
    const auto last = csv::parse_int(std::string_view(range).substr(colon + 1));
    if (!first || !last || *first > *last) {
        throw UsageError("bad baseline year range '" + range + "'");
    }

    std::array<double, 12> sums{};
    std::array<int, 12> counts{};
    for (const auto& obs : series) {
        if (obs.year < *first || obs.year > *last) continue;
        sums[static_cast<std::size_t>(obs.month - 1)] += obs.mean_temp.value;
        counts[static_cast<std::size_t>(obs.month - 1)] += 1;
    }

    MonthlyBaseline baseline;
    baseline.unit = series.front().mean_temp.unit;
    std::string missing;
    for (int m = 1; m <= 12; ++m) {
        const auto i = static_cast<std::size_t>(m - 1);
        if (counts[i] == 0) {
            if (!missing.empty()) missing += ", ";
            missing += std::to_string(m);
            continue;
        }
        baseline.t0[i] = sums[i] / static_cast<double>(counts[i]);
    }
    if (!missing.empty()) {
        throw CoverageError("baseline years " + range + " have no data for months " + missing);
    }
    return baseline;
}

// Baseline from a file (converted to the model unit) or from a year range of
// the already-converted series.
inline MonthlyBaseline resolve_baseline(const RunConfig& cfg,
                                        std::span<const MonthlyObservation> series,
                                        TempUnit model_unit) {
    if (!cfg.baseline_csv.empty() && !cfg.baseline_years.empty()) {
        throw UsageError("give either --baseline or --baseline-years, not both");
    }
    if (!cfg.baseline_csv.empty()) {
        const auto unit = unit_from_label(cfg.baseline_unit.empty() ? cfg.temp_unit : cfg.baseline_unit);
        std::ifstream in(cfg.baseline_csv);
        if (!in) throw IoError("cannot open " + cfg.baseline_csv);
        return convert_baseline(baseline_from_file(in, unit), model_unit);
    }
    if (!cfg.baseline_years.empty()) return baseline_from_years(series, cfg.baseline_years);
    throw UsageError("need --baseline FILE or --baseline-years FIRST:LAST");
}

inline double mean_annual(const std::vector<AnnualRollup>& annual, double AnnualRollup::* field) {
    double sum = 0.0;
    for (const auto& r : annual) sum += r.*field;
    return sum / static_cast<double>(annual.size());
}

} // namespace detail

// ---------------------------------------------------------------------------
// subcommands

inline int cmd_fit(const RunConfig& cfg) {
    auto loaded = detail::load_series(cfg);
    detail::warn_row_errors(loaded.row_errors);
    const auto models = fit_model_set(loaded.series);
    const auto diag = compute_diagnostics(models, loaded.series, cfg.outlier_threshold);

    const auto models_path = detail::out_path(cfg, cfg.models_out, "models.json");
    io::write_json_file(models_path, io::model_set_to_json(models));
    io::write_json_file(detail::out_path(cfg, cfg.diagnostics_out, "diagnostics.json"),
                        io::diagnostics_to_json(diag));
    if (!cfg.series_out.empty()) {
        io::write_json_file(cfg.series_out, io::series_to_json(loaded.series));
    }

    std::cout << "fit: " << loaded.series.size() << " monthly observations -> "
              << models_path.string() << "\n"
              << "fit: yearly sd fraction " << io::format_sig(diag.yearly_sd_fraction, 3)
              << ", yearly trend " << io::format_sig(diag.yearly_fit.percent_per_degc, 3)
              << " %/degC, " << diag.outlier_years.size() << " outlier year(s)\n";
    return kExitOk;
}

inline int cmd_attribute(const RunConfig& cfg) {
    if (cfg.models_json.empty()) throw UsageError("attribute needs --models");
    const auto models = io::model_set_from_json(io::read_json_file(cfg.models_json));
    auto loaded = detail::load_series(cfg);
    detail::warn_row_errors(loaded.row_errors);
    detail::convert_series_unit(loaded.series, models.temp_unit);
    const auto baseline = detail::resolve_baseline(cfg, loaded.series, models.temp_unit);

    const auto result = attribute_series(loaded.series, models, baseline, cfg.scheme_weight);
    io::write_text_file(detail::out_path(cfg, cfg.monthly_out, "attribution_monthly.csv"),
                        io::attribution_monthly_csv(result));
    io::write_text_file(detail::out_path(cfg, cfg.annual_out, "attribution_annual.csv"),
                        io::attribution_annual_csv(result));
    io::write_json_file(detail::out_path(cfg, cfg.attribution_json_out, "attribution.json"),
                        io::attribution_to_json(result, models.temp_unit));

    std::cout << "attribute: " << result.monthly.size() << " months over "
              << result.annual.size() << " years; per year delta_E "
              << io::format_sig(detail::mean_annual(result.annual, &AnnualRollup::delta_e), 4)
              << ", share-split " << io::format_sig(detail::mean_annual(result.annual, &AnnualRollup::attributed_b), 4)
              << ", blended " << io::format_sig(detail::mean_annual(result.annual, &AnnualRollup::blended), 4)
              << "\n";
    return kExitOk;
}

inline int cmd_project(const RunConfig& cfg) {
    SensitivityReport report;
    const bool override_path =
        !std::isnan(cfg.override_counterfactual) && !std::isnan(cfg.override_percent);

    if (override_path) {
        report.mode = detail::mode_from_label(cfg.mode);
        report.counterfactual_annual = cfg.override_counterfactual;
        report.average_percent_per_degc = cfg.override_percent;
        report.delta_t_degc = cfg.delta_t_degc;
    } else {
        if (cfg.models_json.empty()) {
            throw UsageError("project needs --models (or counterfactual/percent overrides)");
        }
        const auto models = io::model_set_from_json(io::read_json_file(cfg.models_json));
        auto loaded = detail::load_series(cfg);
        detail::warn_row_errors(loaded.row_errors);
        detail::convert_series_unit(loaded.series, models.temp_unit);
        const auto baseline = detail::resolve_baseline(cfg, loaded.series, models.temp_unit);
        report = percent_per_degree(models, detail::mode_from_label(cfg.mode), &baseline,
                                    loaded.series, detail::weighting_from_label(cfg.weighting));
        if (!std::isnan(cfg.delta_t_degc)) report.delta_t_degc = cfg.delta_t_degc;
        io::write_json_file(detail::out_path(cfg, cfg.sensitivity_out, "sensitivity.json"),
                            io::sensitivity_to_json(report));
    }

    if (std::isnan(cfg.avg_cost)) throw UsageError("project needs --avg-cost");
    const WarmingRate rate{cfg.warming_per_decade, unit_from_label(cfg.warming_unit)};
    const auto proj = cost_projection(report, cfg.avg_cost, rate, cfg.horizon_years);
    io::write_json_file(detail::out_path(cfg, cfg.projection_out, "projection.json"),
                        io::projection_to_json(proj));

    std::cout << "project: counterfactual " << io::format_sig(proj.counterfactual_annual, 4)
              << " events/yr, sensitivity " << io::format_sig(proj.percent_per_degc, 3)
              << " %/degC, warming to date " << io::format_sig(proj.delta_t_now_degc, 3)
              << " degC (+" << io::format_sig(proj.warming_rate_degc_per_decade, 3)
              << " degC/decade), avg cost " << io::format_sig(proj.avg_cost_per_event, 4)
              << "/event\n"
              << "project: attributed cost " << io::format_sig(proj.current_attributed_cost, 4)
              << "/yr now -> " << io::format_sig(proj.projected_attributed_cost, 4) << "/yr after "
              << proj.horizon_years << " more years (delta_T "
              << io::format_sig(proj.delta_t_horizon_degc, 3) << " degC)\n";
    return kExitOk;
}

inline int cmd_simulate(const RunConfig& cfg) {
    if (cfg.scenario_json.empty()) throw UsageError("simulate needs --scenario");
    auto scenario = io::scenario_from_json(io::read_json_file(cfg.scenario_json));
    if (cfg.seed_set) scenario.seed = cfg.seed;
    if (cfg.replicates != 0 && cfg.replicates < 30) {
        throw UsageError("volatility summary needs at least 30 replicates (or 0 to skip)");
    }

    const auto series = generate_series(scenario);
    const auto truth = scenario_model_set(scenario);
    const auto baseline = scenario_baseline(scenario);
    io::write_json_file(detail::out_path(cfg, cfg.series_out, "series.json"),
                        io::series_to_json(series));
    io::write_json_file(detail::out_path(cfg, cfg.truth_models_out, "truth_models.json"),
                        io::model_set_to_json(truth));

    // One expectation check per month at a probe temperature one typical
    // spread (or the full drift, if larger) above the undrifted mean.
    std::uint64_t seed_state = scenario.seed ^ 0x5851F42D4C957F2DULL;
    io::json checks = io::json::array();
    std::string failed;
    int n_run = 0;
    for (int m = 1; m <= 12; ++m) {
        const auto& p = scenario.months[static_cast<std::size_t>(m - 1)];
        const auto& cond = truth.for_month(m).cond;
        const std::uint64_t month_seed = rng::splitmix64(seed_state);
        io::json entry;
        entry["month"] = m;
        if (cond.sigma_cond <= 0.0) {
            entry["skipped"] = "zero conditional spread";
            checks.push_back(std::move(entry));
            continue;
        }
        const double probe = std::max(
            p.sigma_t, std::abs(scenario.drift_per_decade) * static_cast<double>(scenario.n_years) / 10.0);
        const Temperature t{p.mu_t + probe, scenario.temp_unit};
        const Temperature t0{p.mu_t, scenario.temp_unit};
        const auto check = mc_expectation_check(cond, t, t0, cfg.mc_samples, month_seed, cfg.invert_alpha);
        const bool pass = std::abs(check.z()) <= 5.0;
        entry["T"] = io::num(t.value);
        entry["T0"] = io::num(t0.value);
        entry["mc_mean"] = io::num(check.mc_mean);
        entry["closed_form"] = io::num(check.closed_form);
        entry["std_error"] = io::num(check.std_error);
        entry["z"] = io::num(check.z());
        entry["pass"] = pass;
        checks.push_back(std::move(entry));
        n_run += 1;
        if (!pass) {
            if (!failed.empty()) failed += ", ";
            failed += std::to_string(m);
        }
    }

    io::json report;
    report["seed"] = scenario.seed;
    report["n_years"] = scenario.n_years;
    report["mc_samples"] = cfg.mc_samples;
    report["inverted_alpha"] = cfg.invert_alpha;
    report["expectation_checks"] = std::move(checks);
    if (cfg.replicates >= 30) {
        const auto vol = scheme_volatility(scenario, truth, baseline, cfg.replicates,
                                           rng::splitmix64(seed_state));
        io::json v;
        v["n_replicates"] = vol.n_replicates;
        v["n_annual_samples"] = vol.n_annual_samples;
        v["mean_delta_E"] = io::num(vol.mean_a);
        v["sd_delta_E"] = io::num(vol.sd_a);
        v["mean_share_split"] = io::num(vol.mean_b);
        v["sd_share_split"] = io::num(vol.sd_b);
        report["scheme_volatility"] = std::move(v);
    }
    report["all_checks_passed"] = failed.empty();
    io::write_json_file(detail::out_path(cfg, cfg.sim_report_out, "simulate_report.json"), report);

    std::cout << "simulate: " << series.size() << " observations (seed " << scenario.seed << "); "
              << n_run << " expectation checks " << (failed.empty() ? "passed" : "FAILED") << "\n";
    if (!failed.empty()) {
        throw CheckFailure("expectation check off by more than 5 standard errors for month(s) " +
                           failed + (cfg.invert_alpha ? " (alpha was inverted)" : ""));
    }
    return kExitOk;
}

inline int cmd_report(const RunConfig& cfg) {
    auto loaded = detail::load_series(cfg);
    detail::warn_row_errors(loaded.row_errors);

    ModelSet models;
    if (cfg.models_json.empty()) {
        models = fit_model_set(loaded.series);
    } else {
        models = io::model_set_from_json(io::read_json_file(cfg.models_json));
        detail::convert_series_unit(loaded.series, models.temp_unit);
    }
    const auto baseline = detail::resolve_baseline(cfg, loaded.series, models.temp_unit);
    const auto diag = compute_diagnostics(models, loaded.series, cfg.outlier_threshold);
    const auto result = attribute_series(loaded.series, models, baseline, cfg.scheme_weight);
    auto sens = percent_per_degree(models, detail::mode_from_label(cfg.mode), &baseline,
                                   loaded.series, detail::weighting_from_label(cfg.weighting));
    if (!std::isnan(cfg.delta_t_degc)) sens.delta_t_degc = cfg.delta_t_degc;

    io::write_json_file(detail::out_path(cfg, cfg.models_out, "models.json"),
                        io::model_set_to_json(models));
    io::write_json_file(detail::out_path(cfg, cfg.diagnostics_out, "diagnostics.json"),
                        io::diagnostics_to_json(diag));
    io::write_text_file(detail::out_path(cfg, cfg.monthly_out, "attribution_monthly.csv"),
                        io::attribution_monthly_csv(result));
    io::write_text_file(detail::out_path(cfg, cfg.annual_out, "attribution_annual.csv"),
                        io::attribution_annual_csv(result));
    io::write_json_file(detail::out_path(cfg, cfg.attribution_json_out, "attribution.json"),
                        io::attribution_to_json(result, models.temp_unit));
    io::write_json_file(detail::out_path(cfg, cfg.sensitivity_out, "sensitivity.json"),
                        io::sensitivity_to_json(sens));

    io::json summary;
    summary["temp_unit"] = unit_label(models.temp_unit);
    summary["window"] = {{"start_year", loaded.series.front().year},
                         {"end_year", loaded.series.back().year}};
    summary["observed_annual_mean"] = io::num(sens.observed_annual);
    summary["counterfactual_annual"] = io::num(sens.counterfactual_annual);
    summary["average_percent_per_degC"] = io::num(sens.average_percent_per_degc);
    summary["delta_T_degC"] = io::num(sens.delta_t_degc);
    summary["mean_annual_attributed"] = {
        {"delta_E", io::num(detail::mean_annual(result.annual, &AnnualRollup::delta_e))},
        {"share_split", io::num(detail::mean_annual(result.annual, &AnnualRollup::attributed_b))},
        {"blended", io::num(detail::mean_annual(result.annual, &AnnualRollup::blended))}};
    summary["diagnostics"] = io::diagnostics_to_json(diag);

    if (!std::isnan(cfg.avg_cost)) {
        const WarmingRate rate{cfg.warming_per_decade, unit_from_label(cfg.warming_unit)};
        const auto proj = cost_projection(sens, cfg.avg_cost, rate, cfg.horizon_years);
        io::write_json_file(detail::out_path(cfg, cfg.projection_out, "projection.json"),
                            io::projection_to_json(proj));
        summary["projection"] = io::projection_to_json(proj);
    }
    io::write_json_file(detail::out_path(cfg, cfg.report_out, "report.json"), summary);

    std::cout << "report: years " << loaded.series.front().year << "-" << loaded.series.back().year
              << ", observed " << io::format_sig(sens.observed_annual, 4) << "/yr vs counterfactual "
              << io::format_sig(sens.counterfactual_annual, 4) << "/yr\n"
              << "report: sensitivity " << io::format_sig(sens.average_percent_per_degc, 3)
              << " %/degC (" << sensitivity_mode_label(sens.mode) << ")\n"
              << "report: attributed per year: delta_E "
              << io::format_sig(detail::mean_annual(result.annual, &AnnualRollup::delta_e), 4)
              << ", share-split "
              << io::format_sig(detail::mean_annual(result.annual, &AnnualRollup::attributed_b), 4)
              << ", blended "
              << io::format_sig(detail::mean_annual(result.annual, &AnnualRollup::blended), 4) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// wiring

namespace detail {

inline std::string find_config_arg(int argc, const char* const* argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string_view a = argv[i];
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return std::string(a.substr(9));
    }
    return {};
}

inline void add_common_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--config", cfg.config_path, "JSON config file; flags override its values");
    sub->add_option("--out", cfg.output_dir, "output directory")->capture_default_str();
}

inline void add_series_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--events", cfg.events_csv, "raw event CSV");
    sub->add_option("--temps", cfg.temps_csv, "monthly temperature CSV");
    sub->add_option("--series", cfg.series_json, "aligned monthly series JSON (instead of --events/--temps)");
    sub->add_option("--date-col", cfg.date_column)->capture_default_str();
    sub->add_option("--cost-col", cfg.cost_column)->capture_default_str();
    sub->add_option("--region-col", cfg.region_column, "event column holding a region tag");
    sub->add_option("--event-delim", cfg.event_delimiter)->capture_default_str();
    sub->add_option("--year-col", cfg.year_column)->capture_default_str();
    sub->add_option("--month-col", cfg.month_column)->capture_default_str();
    sub->add_option("--temp-col", cfg.temp_column)->capture_default_str();
    sub->add_option("--temp-delim", cfg.temp_delimiter)->capture_default_str();
    sub->add_option("--temp-unit", cfg.temp_unit, "unit of raw temperatures (F or C)")->capture_default_str();
    sub->add_option("--start-year", cfg.start_year, "first year of the analysis window");
    sub->add_option("--end-year", cfg.end_year, "last year of the analysis window");
    sub->add_option("--region", cfg.regions, "keep only events with this region tag (repeatable)");
}

inline void add_baseline_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--baseline", cfg.baseline_csv, "counterfactual temperature CSV (month,temp)");
    sub->add_option("--baseline-unit", cfg.baseline_unit, "unit of the baseline file (default: --temp-unit)");
    sub->add_option("--baseline-years", cfg.baseline_years,
                    "derive the baseline from these series years, FIRST:LAST");
}

inline void add_projection_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--mode", cfg.mode, "mean-of-monthly or baseline-comparison")->capture_default_str();
    sub->add_option("--weighting", cfg.weighting, "unweighted or count-weighted")->capture_default_str();
    sub->add_option("--avg-cost", cfg.avg_cost, "average damage cost per event");
    sub->add_option("--warming-rate", cfg.warming_per_decade, "expected warming per decade")->capture_default_str();
    sub->add_option("--warming-unit", cfg.warming_unit, "unit of --warming-rate (F or C)")->capture_default_str();
    sub->add_option("--horizon", cfg.horizon_years, "projection horizon in years")->capture_default_str();
    sub->add_option("--delta-t", cfg.delta_t_degc, "warming to date in degC (overrides the series estimate)");
}

} // namespace detail

inline int error_exit(const char* type, const std::string& message, int code) {
    io::json err;
    err["error"] = {{"type", type}, {"message", message}, {"exit_code", code}};
    std::cerr << err.dump() << "\n";
    return code;
}

inline int run(int argc, const char* const* argv) {
    RunConfig cfg;
    try {
        const auto config_path = detail::find_config_arg(argc, argv);
        if (!config_path.empty()) apply_config(cfg, io::read_json_file(config_path));
    } catch (const SchemaError& e) {
        return error_exit("schema", e.what(), kExitBadInput);
    } catch (const IoError& e) {
        return error_exit("io", e.what(), kExitBadInput);
    }

    CLI::App app{"per-month event/temperature models and climate attribution"};
    app.set_version_flag("--version", "climattr 0.1.0");
    app.require_subcommand(1);
    app.add_option("--config", cfg.config_path, "JSON config file; flags override its values");

    auto* fit = app.add_subcommand("fit", "fit per-month count/temperature models");
    detail::add_common_options(fit, cfg);
    detail::add_series_options(fit, cfg);
    fit->add_option("--outlier-threshold", cfg.outlier_threshold)->capture_default_str();
    fit->add_option("--models-out", cfg.models_out, "fitted models JSON path");
    fit->add_option("--diagnostics-out", cfg.diagnostics_out, "diagnostics JSON path");
    fit->add_option("--series-out", cfg.series_out, "also write the aligned series JSON here");

    auto* attribute = app.add_subcommand("attribute", "split observed counts into climate and natural shares");
    detail::add_common_options(attribute, cfg);
    detail::add_series_options(attribute, cfg);
    detail::add_baseline_options(attribute, cfg);
    attribute->add_option("--models", cfg.models_json, "fitted models JSON");
    attribute->add_option("--weight", cfg.scheme_weight, "blend weight on delta_E in [0,1]")->capture_default_str();
    attribute->add_option("--monthly-out", cfg.monthly_out, "monthly attribution CSV path");
    attribute->add_option("--annual-out", cfg.annual_out, "annual attribution CSV path");
    attribute->add_option("--json-out", cfg.attribution_json_out, "attribution JSON path");

    auto* project = app.add_subcommand("project", "temperature sensitivity and attributed-cost projection");
    detail::add_common_options(project, cfg);
    detail::add_series_options(project, cfg);
    detail::add_baseline_options(project, cfg);
    detail::add_projection_options(project, cfg);
    project->add_option("--models", cfg.models_json, "fitted models JSON");
    project->add_option("--counterfactual-annual", cfg.override_counterfactual,
                        "skip model evaluation: counterfactual events per year");
    project->add_option("--percent-per-degc", cfg.override_percent,
                        "skip model evaluation: sensitivity in percent per degC");
    project->add_option("--sensitivity-out", cfg.sensitivity_out, "sensitivity JSON path");
    project->add_option("--projection-out", cfg.projection_out, "projection JSON path");

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic series and self-check the split");
    detail::add_common_options(simulate, cfg);
    simulate->add_option("--scenario", cfg.scenario_json, "scenario JSON");
    auto* seed_opt = simulate->add_option("--seed", cfg.seed, "override the scenario seed");
    simulate->add_option("--mc-samples", cfg.mc_samples, "samples per expectation check")->capture_default_str();
    simulate->add_option("--replicates", cfg.replicates, "replicate histories for the volatility summary (0 = skip)")
        ->capture_default_str();
    simulate->add_flag("--invert-alpha", cfg.invert_alpha,
                       "flip the density ratio; the expectation checks must then fail");
    simulate->add_option("--series-out", cfg.series_out, "generated series JSON path");
    simulate->add_option("--truth-models-out", cfg.truth_models_out, "scenario truth models JSON path");
    simulate->add_option("--report-out", cfg.sim_report_out, "simulation report JSON path");

    auto* report = app.add_subcommand("report", "fit, attribute and project in one pass");
    detail::add_common_options(report, cfg);
    detail::add_series_options(report, cfg);
    detail::add_baseline_options(report, cfg);
    detail::add_projection_options(report, cfg);
    report->add_option("--models", cfg.models_json, "use these fitted models instead of refitting");
    report->add_option("--weight", cfg.scheme_weight, "blend weight on delta_E in [0,1]")->capture_default_str();
    report->add_option("--outlier-threshold", cfg.outlier_threshold)->capture_default_str();
    report->add_option("--models-out", cfg.models_out, "fitted models JSON path");
    report->add_option("--diagnostics-out", cfg.diagnostics_out, "diagnostics JSON path");
    report->add_option("--monthly-out", cfg.monthly_out, "monthly attribution CSV path");
    report->add_option("--annual-out", cfg.annual_out, "annual attribution CSV path");
    report->add_option("--json-out", cfg.attribution_json_out, "attribution JSON path");
    report->add_option("--sensitivity-out", cfg.sensitivity_out, "sensitivity JSON path");
    report->add_option("--projection-out", cfg.projection_out, "projection JSON path");
    report->add_option("--report-out", cfg.report_out, "combined report JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return error_exit("usage", e.what(), kExitUsage);
    }
    if (seed_opt->count() > 0) cfg.seed_set = true;

    try {
        if (app.got_subcommand(fit)) return cmd_fit(cfg);
        if (app.got_subcommand(attribute)) return cmd_attribute(cfg);
        if (app.got_subcommand(project)) return cmd_project(cfg);
        if (app.got_subcommand(simulate)) return cmd_simulate(cfg);
        if (app.got_subcommand(report)) return cmd_report(cfg);
        return error_exit("usage", "no subcommand given", kExitUsage);
    } catch (const CheckFailure& e) {
        return error_exit("check_failed", e.what(), kExitCheckFailed);
    } catch (const UsageError& e) {
        return error_exit("usage", e.what(), kExitUsage);
    } catch (const InsufficientDataError& e) {
        return error_exit("insufficient_data", e.what(), kExitDegenerate);
    } catch (const DegenerateFitError& e) {
        return error_exit("degenerate_fit", e.what(), kExitDegenerate);
    } catch (const UnitMismatchError& e) {
        return error_exit("unit_mismatch", e.what(), kExitBadInput);
    } catch (const CoverageError& e) {
        return error_exit("coverage", e.what(), kExitBadInput);
    } catch (const ParseError& e) {
        return error_exit("parse", e.what(), kExitBadInput);
    } catch (const SchemaError& e) {
        return error_exit("schema", e.what(), kExitBadInput);
    } catch (const IoError& e) {
        return error_exit("io", e.what(), kExitBadInput);
    } catch (const std::filesystem::filesystem_error& e) {
        return error_exit("io", e.what(), kExitBadInput);
    } catch (const std::exception& e) {
        return error_exit("error", e.what(), kExitBadInput);
    }
}

// Convenience entry point for in-process tests: argv without the program name.
inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("climattr");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace climattr::app
