#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "climattr/errors.hpp"
#include "climattr/ingest.hpp"
#include "climattr/units.hpp"

namespace climattr {

// Moments of the joint Gaussian over (count, temperature) for one calendar
// month. Maximum-likelihood moments, so variances use divisor n.
struct BivariateParams {
    double mu_n = 0.0;
    double mu_t = 0.0;
    double sigma_n = 0.0;
    double sigma_t = 0.0;
    double rho = 0.0;
    int n_points = 0;
};

// The count-given-temperature model: Gaussian with mean intercept + slope*T
// and standard deviation sigma_cond = sigma_n * sqrt(1 - rho^2).
struct ConditionalModel {
    double intercept = 0.0;  // events per month
    double slope = 0.0;      // events per month per degree (temp_unit)
    double sigma_cond = 0.0;
    int month = 0;           // 1-12
    TempUnit temp_unit = TempUnit::fahrenheit;

    double mean_at(double t) const { return intercept + slope * t; }
};

struct MonthModel {
    BivariateParams joint;
    ConditionalModel cond;
};

// All twelve per-month models plus the shared temperature unit. This is the
// object the fit stage hands to attribution.
struct ModelSet {
    std::array<MonthModel, 12> months{};
    TempUnit temp_unit = TempUnit::fahrenheit;

    const MonthModel& for_month(int month) const {
        return months.at(static_cast<std::size_t>(month - 1));
    }
};

inline constexpr double kDegeneracyEps = 1e-12;

inline double gaussian_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

// Maximum-likelihood fit of the joint Gaussian to one month's (N, T) points.
// Two-pass moments; divisor n throughout, which is what maximizes the
// likelihood (the n-1 estimator would not).
inline BivariateParams fit_bivariate(std::span<const std::pair<double, double>> points) {
    const auto n = points.size();
    if (n < 3) {
        throw InsufficientDataError("bivariate fit needs at least 3 points, got " + std::to_string(n));
    }
    double sum_n = 0.0, sum_t = 0.0;
    for (const auto& [nn, tt] : points) {
        sum_n += nn;
        sum_t += tt;
    }
    const double mu_n = sum_n / static_cast<double>(n);
    const double mu_t = sum_t / static_cast<double>(n);

    double ss_n = 0.0, ss_t = 0.0, ss_nt = 0.0;
    for (const auto& [nn, tt] : points) {
        const double dn = nn - mu_n;
        const double dt = tt - mu_t;
        ss_n += dn * dn;
        ss_t += dt * dt;
        ss_nt += dn * dt;
    }
    const double var_n = ss_n / static_cast<double>(n);
    const double var_t = ss_t / static_cast<double>(n);
    if (var_n <= 0.0) throw DegenerateFitError("all counts identical: zero variance in N");
    if (var_t <= 0.0) throw DegenerateFitError("all temperatures identical: zero variance in T");

    BivariateParams p;
    p.mu_n = mu_n;
    p.mu_t = mu_t;
    p.sigma_n = std::sqrt(var_n);
    p.sigma_t = std::sqrt(var_t);
    p.rho = (ss_nt / static_cast<double>(n)) / (p.sigma_n * p.sigma_t);
    p.n_points = static_cast<int>(n);
    if (std::abs(p.rho) >= 1.0 - kDegeneracyEps) {
        throw DegenerateFitError("counts and temperatures are collinear (|rho| ~ 1)");
    }
    return p;
}

// Conditioning the joint Gaussian on T gives a Gaussian in N whose mean is
// linear in T; these are the closed forms for its coefficients.
inline ConditionalModel conditional_from_bivariate(const BivariateParams& p,
                                                   int month = 0,
                                                   TempUnit unit = TempUnit::fahrenheit) {
    ConditionalModel m;
    m.slope = p.rho * p.sigma_n / p.sigma_t;
    m.intercept = p.mu_n - p.rho * p.mu_t * p.sigma_n / p.sigma_t;
    m.sigma_cond = p.sigma_n * std::sqrt(1.0 - p.rho * p.rho);
    m.month = month;
    m.temp_unit = unit;
    return m;
}

inline double conditional_pdf(const ConditionalModel& m, double n, double t) {
    if (m.sigma_cond <= 0.0) throw DegenerateFitError("conditional model has zero residual spread");
    return gaussian_pdf(n, m.mean_at(t), m.sigma_cond);
}

inline double bivariate_pdf(const BivariateParams& p, double n, double t) {
    const double one_minus_r2 = 1.0 - p.rho * p.rho;
    const double zn = (n - p.mu_n) / p.sigma_n;
    const double zt = (t - p.mu_t) / p.sigma_t;
    const double quad = (zn * zn + zt * zt - 2.0 * p.rho * zn * zt) / (2.0 * one_minus_r2);
    return std::exp(-quad) /
           (2.0 * std::numbers::pi * p.sigma_n * p.sigma_t * std::sqrt(one_minus_r2));
}

// Typical year-to-year spread of the annual total, as the sum of the twelve
// conditional residual scales over the sum of the twelve mean counts.
inline double yearly_sd_fraction(const ModelSet& models) {
    double sd_sum = 0.0;
    double mean_sum = 0.0;
    for (const auto& m : models.months) {
        sd_sum += m.cond.sigma_cond;
        mean_sum += m.joint.mu_n;
    }
    if (mean_sum == 0.0) throw DegenerateFitError("total mean count is zero");
    return sd_sum / mean_sum;
}

struct LinearFit {
    double slope = 0.0;     // events per degree (input unit)
    double intercept = 0.0;
    double percent_per_degc = 0.0; // 100 * slope / mean(N), expressed per degC
    double residual_sd = 0.0;      // divisor n
    TempUnit temp_unit = TempUnit::fahrenheit;
};

// Ordinary least squares of mean monthly count on yearly mean temperature.
inline LinearFit yearly_linear_fit(std::span<const std::pair<double, double>> yearly,
                                   TempUnit unit) {
    const auto n = yearly.size();
    if (n < 3) throw InsufficientDataError("yearly fit needs at least 3 years");

    double sum_n = 0.0, sum_t = 0.0;
    for (const auto& [nn, tt] : yearly) {
        sum_n += nn;
        sum_t += tt;
    }
    const double mean_n = sum_n / static_cast<double>(n);
    const double mean_t = sum_t / static_cast<double>(n);

    double ss_t = 0.0, ss_nt = 0.0;
    for (const auto& [nn, tt] : yearly) {
        ss_t += (tt - mean_t) * (tt - mean_t);
        ss_nt += (nn - mean_n) * (tt - mean_t);
    }
    if (ss_t <= 0.0) throw DegenerateFitError("all yearly temperatures identical");

    LinearFit fit;
    fit.temp_unit = unit;
    fit.slope = ss_nt / ss_t;
    fit.intercept = mean_n - fit.slope * mean_t;

    double ss_resid = 0.0;
    for (const auto& [nn, tt] : yearly) {
        const double r = nn - (fit.intercept + fit.slope * tt);
        ss_resid += r * r;
    }
    fit.residual_sd = std::sqrt(ss_resid / static_cast<double>(n));
    if (mean_n != 0.0) {
        fit.percent_per_degc = convert_rate(100.0 * fit.slope / mean_n, unit, TempUnit::celsius);
    }
    return fit;
}

// How much the sum of per-month conditional means exceeds twelve evaluations
// of the month-averaged model at the mean temperature. Nonzero exactly when
// the per-month slopes covary with the temperatures they are evaluated at.
inline double jensen_gap(const ModelSet& models, std::span<const double> temps_for_year) {
    if (temps_for_year.size() != 12) {
        throw UsageError("jensen_gap needs exactly 12 monthly temperatures");
    }
    double per_month_sum = 0.0;
    double mean_a = 0.0, mean_b = 0.0, mean_t = 0.0;
    for (std::size_t i = 0; i < 12; ++i) {
        const auto& c = models.months[i].cond;
        per_month_sum += c.mean_at(temps_for_year[i]);
        mean_a += c.intercept;
        mean_b += c.slope;
        mean_t += temps_for_year[i];
    }
    mean_a /= 12.0;
    mean_b /= 12.0;
    mean_t /= 12.0;
    return per_month_sum - 12.0 * (mean_a + mean_b * mean_t);
}

struct YearlyPoint {
    int year = 0;
    double mean_monthly_count = 0.0;
    double mean_temp = 0.0;
};

struct OutlierYear {
    int year = 0;
    double standardized_residual = 0.0;
};

// Flags years whose residual from the yearly straight-line fit exceeds
// threshold * residual SD. A deliberately plain residual test.
inline std::vector<OutlierYear> regime_outlier_scan(std::span<const YearlyPoint> yearly,
                                                    double threshold = 2.0,
                                                    TempUnit unit = TempUnit::fahrenheit) {
    if (yearly.size() < 5) throw InsufficientDataError("outlier scan needs at least 5 years");
    if (threshold <= 0.0) throw UsageError("outlier threshold must be positive");

    std::vector<std::pair<double, double>> pts;
    pts.reserve(yearly.size());
    for (const auto& y : yearly) pts.emplace_back(y.mean_monthly_count, y.mean_temp);
    const auto fit = yearly_linear_fit(pts, unit);

    std::vector<OutlierYear> flagged;
    if (fit.residual_sd <= 0.0) return flagged; // perfect line: nothing to flag
    for (const auto& y : yearly) {
        const double r = y.mean_monthly_count - (fit.intercept + fit.slope * y.mean_temp);
        const double z = r / fit.residual_sd;
        if (std::abs(z) > threshold) flagged.push_back({y.year, z});
    }
    return flagged;
}

struct FitDiagnostics {
    double yearly_sd_fraction = 0.0;
    double jensen_gap = 0.0; // events per year, at the window-mean monthly temperatures
    LinearFit yearly_fit;
    std::vector<OutlierYear> outlier_years;
    double outlier_threshold = 2.0;
};

// Groups an aligned series by calendar month and fits all twelve models.
inline ModelSet fit_model_set(std::span<const MonthlyObservation> series) {
    if (series.empty()) throw InsufficientDataError("empty observation series");
    const TempUnit unit = series.front().mean_temp.unit;

    std::array<std::vector<std::pair<double, double>>, 12> by_month;
    for (const auto& obs : series) {
        require_same_unit(obs.mean_temp.unit, unit, "fit_model_set");
        by_month[static_cast<std::size_t>(obs.month - 1)].emplace_back(
            static_cast<double>(obs.count), obs.mean_temp.value);
    }

    ModelSet set;
    set.temp_unit = unit;
    for (int m = 1; m <= 12; ++m) {
        const auto& pts = by_month[static_cast<std::size_t>(m - 1)];
        try {
            MonthModel mm;
            mm.joint = fit_bivariate(pts);
            mm.cond = conditional_from_bivariate(mm.joint, m, unit);
            set.months[static_cast<std::size_t>(m - 1)] = mm;
        } catch (const Error& e) {
            throw DegenerateFitError("month " + std::to_string(m) + ": " + e.what());
        }
    }
    return set;
}

// Per-year aggregates of an aligned series: mean monthly count and mean
// temperature. The series is aligned, so every year has all twelve months.
inline std::vector<YearlyPoint> yearly_aggregates(std::span<const MonthlyObservation> series) {
    std::map<int, std::pair<double, double>> sums; // year -> (count sum, temp sum)
    std::map<int, int> months;
    for (const auto& obs : series) {
        sums[obs.year].first += static_cast<double>(obs.count);
        sums[obs.year].second += obs.mean_temp.value;
        months[obs.year] += 1;
    }
    std::vector<YearlyPoint> out;
    out.reserve(sums.size());
    for (const auto& [year, s] : sums) {
        const double k = static_cast<double>(months.at(year));
        out.push_back({year, s.first / k, s.second / k});
    }
    return out;
}

inline FitDiagnostics compute_diagnostics(const ModelSet& models,
                                          std::span<const MonthlyObservation> series,
                                          double outlier_threshold = 2.0) {
    FitDiagnostics d;
    d.yearly_sd_fraction = yearly_sd_fraction(models);
    d.outlier_threshold = outlier_threshold;

    std::array<double, 12> mean_temps{};
    for (std::size_t i = 0; i < 12; ++i) mean_temps[i] = models.months[i].joint.mu_t;
    d.jensen_gap = jensen_gap(models, mean_temps);

    const auto yearly = yearly_aggregates(series);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(yearly.size());
    for (const auto& y : yearly) pts.emplace_back(y.mean_monthly_count, y.mean_temp);
    d.yearly_fit = yearly_linear_fit(pts, models.temp_unit);
    if (yearly.size() >= 5) {
        d.outlier_years = regime_outlier_scan(yearly, outlier_threshold, models.temp_unit);
    }
    return d;
}

} // namespace climattr
