#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "climattr/errors.hpp"
#include "climattr/ingest.hpp"
#include "climattr/stats.hpp"
#include "climattr/units.hpp"

namespace climattr {

inline constexpr double kAlphaLogSaturation = 700.0;

// Density ratio P(N|T0) / P(N|T) for one observation. Ratios beyond
// exp(700) are clamped and tagged so rollups can flag them instead of
// propagating infinities.
struct AlphaResult {
    double value = 1.0;
    double log_ratio = 0.0;
    bool saturated = false;
};

// Expected extra events when the month's temperature is T instead of T0.
// Under the linear-mean Gaussian model the integral collapses to
// slope * (T - T0); may be negative.
inline double expected_extra(const ConditionalModel& model, Temperature t, Temperature t0) {
    require_same_unit(t.unit, model.temp_unit, "expected_extra: T");
    require_same_unit(t0.unit, model.temp_unit, "expected_extra: T0");
    return model.slope * (t.value - t0.value);
}

inline AlphaResult attribution_alpha(const ConditionalModel& model, double n,
                                     Temperature t, Temperature t0) {
    require_same_unit(t.unit, model.temp_unit, "attribution_alpha: T");
    require_same_unit(t0.unit, model.temp_unit, "attribution_alpha: T0");
    if (model.sigma_cond <= 0.0) {
        throw DegenerateFitError("attribution_alpha: conditional model has zero residual spread");
    }
    const double m = model.mean_at(t.value);
    const double m0 = model.mean_at(t0.value);
    // Difference of squared exponents in factored form: exactly zero when N
    // is the midpoint of the two conditional means, and stable when the
    // means are close.
    const double log_ratio =
        (m0 - m) * (2.0 * n - (m + m0)) / (2.0 * model.sigma_cond * model.sigma_cond);

    AlphaResult r;
    r.log_ratio = log_ratio;
    r.saturated = log_ratio > kAlphaLogSaturation;
    r.value = std::exp(std::min(log_ratio, kAlphaLogSaturation));
    return r;
}

// N = N*alpha + N*(1-alpha) with the second term computed as N - N*alpha,
// so the two shares add back to N in floating point.
inline std::pair<double, double> scheme_b_split(double n, double alpha) {
    const double natural = n * alpha;
    const double attributed = n - natural;
    return {natural, attributed};
}

inline double scheme_c_blend(double delta_e, double attributed_b, double weight = 0.5) {
    if (!(weight >= 0.0 && weight <= 1.0)) {
        throw UsageError("scheme weight must lie in [0, 1]");
    }
    return weight * delta_e + (1.0 - weight) * attributed_b;
}

namespace detail {

// Composite Simpson rule; panels is rounded up to an even count.
template <typename F>
double simpson(F f, double lo, double hi, int panels) {
    if (panels < 2) panels = 2;
    if (panels % 2 != 0) panels += 1;
    const double h = (hi - lo) / panels;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < panels; ++i) {
        acc += f(lo + h * i) * (i % 2 == 0 ? 2.0 : 4.0);
    }
    return acc * h / 3.0;
}

} // namespace detail

// Numerically integrated counterpart of the closed form b*(T - T0), over a
// finite interval instead of the whole real line. By the density-ratio
// identity the integrand of E[N*(1-alpha)|T] is n*[pdf(n|T) - pdf(n|T0)],
// the same one that defines the expected extra count, so a single function
// covers both. The closed form is exact for full-line integration; this
// exists to quantify how much truncating the domain (say to counts >= 0)
// moves the answer.
inline double expected_extra_truncated(const ConditionalModel& model, Temperature t,
                                       Temperature t0, double lo, double hi,
                                       int panels = 8192) {
    require_same_unit(t.unit, model.temp_unit, "expected_extra_truncated: T");
    require_same_unit(t0.unit, model.temp_unit, "expected_extra_truncated: T0");
    if (model.sigma_cond <= 0.0) {
        throw DegenerateFitError("expected_extra_truncated: zero residual spread");
    }
    if (!(lo < hi)) throw UsageError("integration interval is empty");
    const double m = model.mean_at(t.value);
    const double m0 = model.mean_at(t0.value);
    return detail::simpson(
        [&](double n) {
            return n * (gaussian_pdf(n, m, model.sigma_cond) - gaussian_pdf(n, m0, model.sigma_cond));
        },
        lo, hi, panels);
}

// Expected annual total under the counterfactual temperatures.
inline double counterfactual_annual(const ModelSet& models, const MonthlyBaseline& baseline) {
    require_same_unit(baseline.unit, models.temp_unit, "counterfactual_annual");
    double total = 0.0;
    for (int m = 1; m <= 12; ++m) {
        total += models.for_month(m).cond.mean_at(baseline.for_month(m));
    }
    return total;
}

enum class SensitivityMode { mean_of_monthly, baseline_comparison };

enum class MonthlyWeighting { unweighted, count_weighted };

inline const char* sensitivity_mode_label(SensitivityMode m) {
    return m == SensitivityMode::mean_of_monthly ? "mean-of-monthly" : "baseline-comparison";
}

struct SensitivityReport {
    SensitivityMode mode = SensitivityMode::mean_of_monthly;
    std::array<double, 12> percent_per_month{}; // percent per degC, NaN when excluded
    std::array<double, 12> mean_count{};
    std::vector<int> excluded_months; // mean count of zero: percentage undefined
    double average_percent_per_degc = 0.0;
    // Baseline-dependent quantities; NaN when the inputs were not supplied.
    double counterfactual_annual = std::numeric_limits<double>::quiet_NaN();
    double observed_annual = std::numeric_limits<double>::quiet_NaN();
    double percent_increase_vs_baseline = std::numeric_limits<double>::quiet_NaN();
    double delta_t_degc = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline int count_distinct_years(std::span<const MonthlyObservation> series) {
    std::map<int, bool> years;
    for (const auto& obs : series) years[obs.year] = true;
    return static_cast<int>(years.size());
}

} // namespace detail

// Percent change in events per degC. mean-of-monthly averages the per-month
// percentages 100*b_i/mu_i; baseline-comparison compares the observed annual
// total against the counterfactual one and divides by the mean warming.
inline SensitivityReport percent_per_degree(const ModelSet& models,
                                            SensitivityMode mode,
                                            const MonthlyBaseline* baseline = nullptr,
                                            std::span<const MonthlyObservation> observed = {},
                                            MonthlyWeighting weighting = MonthlyWeighting::unweighted) {
    SensitivityReport report;
    report.mode = mode;

    for (int m = 1; m <= 12; ++m) {
        const auto& mm = models.for_month(m);
        report.mean_count[static_cast<std::size_t>(m - 1)] = mm.joint.mu_n;
        if (mm.joint.mu_n == 0.0) {
            report.percent_per_month[static_cast<std::size_t>(m - 1)] =
                std::numeric_limits<double>::quiet_NaN();
            report.excluded_months.push_back(m);
            continue;
        }
        const double pct_per_unit = 100.0 * mm.cond.slope / mm.joint.mu_n;
        report.percent_per_month[static_cast<std::size_t>(m - 1)] =
            convert_rate(pct_per_unit, models.temp_unit, TempUnit::celsius);
    }

    if (baseline != nullptr) {
        report.counterfactual_annual = counterfactual_annual(models, *baseline);
        if (!observed.empty()) {
            require_same_unit(observed.front().mean_temp.unit, models.temp_unit, "percent_per_degree");
            const int n_years = detail::count_distinct_years(observed);
            double count_sum = 0.0, temp_sum = 0.0;
            for (const auto& obs : observed) {
                count_sum += static_cast<double>(obs.count);
                temp_sum += obs.mean_temp.value;
            }
            report.observed_annual = count_sum / static_cast<double>(n_years);
            report.percent_increase_vs_baseline =
                100.0 * (report.observed_annual - report.counterfactual_annual) /
                report.counterfactual_annual;

            double baseline_mean = 0.0;
            for (const double t : baseline->t0) baseline_mean += t;
            baseline_mean /= 12.0;
            const double observed_mean_t = temp_sum / static_cast<double>(observed.size());
            report.delta_t_degc =
                convert_delta(observed_mean_t - baseline_mean, models.temp_unit, TempUnit::celsius);
        }
    }

    if (mode == SensitivityMode::baseline_comparison) {
        if (baseline == nullptr || observed.empty()) {
            throw UsageError("baseline-comparison sensitivity needs a baseline and an observed series");
        }
        if (report.delta_t_degc == 0.0) {
            throw DegenerateFitError("observed and baseline mean temperatures are identical");
        }
        report.average_percent_per_degc = report.percent_increase_vs_baseline / report.delta_t_degc;
    } else {
        double weight_sum = 0.0, acc = 0.0;
        for (int m = 1; m <= 12; ++m) {
            const double pct = report.percent_per_month[static_cast<std::size_t>(m - 1)];
            if (std::isnan(pct)) continue;
            const double w = weighting == MonthlyWeighting::count_weighted
                                 ? models.for_month(m).joint.mu_n
                                 : 1.0;
            acc += w * pct;
            weight_sum += w;
        }
        if (weight_sum == 0.0) throw DegenerateFitError("no month has a defined percentage");
        report.average_percent_per_degc = acc / weight_sum;
    }
    return report;
}

// Per-observation attribution outputs. attributed_b + natural_b == n_obs by
// construction; the split may be negative when alpha exceeds one.
struct AttributionRecord {
    int year = 0;
    int month = 0;
    double n_obs = 0.0;
    double t_obs = 0.0; // model unit
    double t0 = 0.0;
    double expected_n = 0.0; // conditional mean at t_obs
    double delta_e = 0.0;    // scheme A
    double alpha = 1.0;
    bool alpha_saturated = false;
    double attributed_b = 0.0; // scheme B climate share
    double natural_b = 0.0;    // scheme B natural share
    double blended = 0.0;      // scheme C
};

struct AnnualRollup {
    int year = 0;
    double n_obs = 0.0;
    double expected_n = 0.0;
    double delta_e = 0.0;
    double attributed_b = 0.0;
    double natural_b = 0.0;
    double blended = 0.0;
    int saturated_records = 0;
};

struct AttributionResult {
    std::vector<AttributionRecord> monthly;
    std::vector<AnnualRollup> annual;
    double scheme_weight = 0.5;
};

inline AttributionResult attribute_series(std::span<const MonthlyObservation> series,
                                          const ModelSet& models,
                                          const MonthlyBaseline& baseline,
                                          double scheme_weight = 0.5) {
    if (!(scheme_weight >= 0.0 && scheme_weight <= 1.0)) {
        throw UsageError("scheme weight must lie in [0, 1]");
    }
    require_same_unit(baseline.unit, models.temp_unit, "attribute_series");

    AttributionResult result;
    result.scheme_weight = scheme_weight;
    result.monthly.reserve(series.size());
    std::map<int, AnnualRollup> annual;

    for (const auto& obs : series) {
        require_same_unit(obs.mean_temp.unit, models.temp_unit, "attribute_series");
        const auto& model = models.for_month(obs.month).cond;
        const Temperature t = obs.mean_temp;
        const Temperature t0{baseline.for_month(obs.month), baseline.unit};
        const double n = static_cast<double>(obs.count);

        AttributionRecord rec;
        rec.year = obs.year;
        rec.month = obs.month;
        rec.n_obs = n;
        rec.t_obs = t.value;
        rec.t0 = t0.value;
        rec.expected_n = model.mean_at(t.value);
        rec.delta_e = expected_extra(model, t, t0);
        const auto alpha = attribution_alpha(model, n, t, t0);
        rec.alpha = alpha.value;
        rec.alpha_saturated = alpha.saturated;
        const auto [natural, attributed] = scheme_b_split(n, alpha.value);
        rec.natural_b = natural;
        rec.attributed_b = attributed;
        rec.blended = scheme_c_blend(rec.delta_e, rec.attributed_b, scheme_weight);
        result.monthly.push_back(rec);

        auto& roll = annual[obs.year];
        roll.year = obs.year;
        roll.n_obs += rec.n_obs;
        roll.expected_n += rec.expected_n;
        roll.delta_e += rec.delta_e;
        roll.attributed_b += rec.attributed_b;
        roll.natural_b += rec.natural_b;
        roll.blended += rec.blended;
        if (rec.alpha_saturated) roll.saturated_records += 1;
    }

    result.annual.reserve(annual.size());
    for (const auto& [year, roll] : annual) result.annual.push_back(roll);
    return result;
}

// Attributed cost per year now and after further warming. No inflation
// adjustment: costs stay in the dataset's currency.
struct CostProjection {
    double counterfactual_annual = 0.0;
    double percent_per_degc = 0.0;
    double delta_t_now_degc = 0.0;
    double delta_t_horizon_degc = 0.0;
    double avg_cost_per_event = 0.0;
    double warming_rate_degc_per_decade = 0.0;
    int horizon_years = 0;
    double current_attributed_cost = 0.0;  // per year
    double projected_attributed_cost = 0.0;
};

struct WarmingRate {
    double per_decade = 0.0;
    TempUnit unit = TempUnit::celsius;
};

inline CostProjection cost_projection(const SensitivityReport& report,
                                      double avg_cost_per_event,
                                      WarmingRate warming_rate,
                                      int horizon_years) {
    if (horizon_years < 0) throw UsageError("projection horizon must be nonnegative");
    if (avg_cost_per_event < 0.0) throw UsageError("average cost per event must be nonnegative");
    if (std::isnan(report.counterfactual_annual) || std::isnan(report.delta_t_degc)) {
        throw UsageError("cost projection needs counterfactual annual count and current warming");
    }

    CostProjection proj;
    proj.counterfactual_annual = report.counterfactual_annual;
    proj.percent_per_degc = report.average_percent_per_degc;
    proj.delta_t_now_degc = report.delta_t_degc;
    proj.avg_cost_per_event = avg_cost_per_event;
    proj.warming_rate_degc_per_decade =
        convert_delta(warming_rate.per_decade, warming_rate.unit, TempUnit::celsius);
    proj.horizon_years = horizon_years;
    proj.delta_t_horizon_degc =
        proj.delta_t_now_degc +
        proj.warming_rate_degc_per_decade * static_cast<double>(horizon_years) / 10.0;

    const double events_per_degc = proj.counterfactual_annual * proj.percent_per_degc / 100.0;
    proj.current_attributed_cost = events_per_degc * proj.delta_t_now_degc * avg_cost_per_event;
    proj.projected_attributed_cost = events_per_degc * proj.delta_t_horizon_degc * avg_cost_per_event;
    return proj;
}

} // namespace climattr
