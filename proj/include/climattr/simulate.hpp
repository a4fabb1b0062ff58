#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "climattr/attribution.hpp"
#include "climattr/errors.hpp"
#include "climattr/ingest.hpp"
#include "climattr/rng.hpp"
#include "climattr/stats.hpp"
#include "climattr/units.hpp"

namespace climattr {

// Replace the per-month parameters from a given calendar year onward.
struct RegimeShift {
    int start_year = 0;
    std::array<BivariateParams, 12> months{};
};

// A known-truth climate: per-month joint parameters, a linear temperature
// drift, and a seed. Unlike fitted parameters, scenario parameters may be
// degenerate (zero spread) so noise-free limits can be exercised.
struct SyntheticScenario {
    std::array<BivariateParams, 12> months{};
    TempUnit temp_unit = TempUnit::fahrenheit;
    double drift_per_decade = 0.0; // in temp_unit degrees
    int n_years = 1;
    int start_year = 2000;
    std::uint64_t seed = 0;
    std::optional<RegimeShift> regime_shift;
};

namespace detail {

inline void validate_scenario_month(const BivariateParams& p, int month) {
    const std::string tag = "scenario month " + std::to_string(month) + ": ";
    if (p.sigma_n < 0.0 || p.sigma_t < 0.0) throw SchemaError(tag + "negative spread");
    if (std::abs(p.rho) > 1.0) throw SchemaError(tag + "|rho| exceeds 1");
    if (p.sigma_t == 0.0 && p.rho != 0.0) {
        throw SchemaError(tag + "correlation is undefined when sigma_T is zero");
    }
}

// Conditional coefficients with the degenerate cases pinned down: constant
// temperature means no usable slope, and |rho| = 1 collapses the residual.
inline ConditionalModel scenario_conditional(const BivariateParams& p, int month, TempUnit unit) {
    ConditionalModel m;
    m.month = month;
    m.temp_unit = unit;
    if (p.sigma_t == 0.0) {
        m.intercept = p.mu_n;
        m.slope = 0.0;
        m.sigma_cond = p.sigma_n;
        return m;
    }
    m.slope = p.rho * p.sigma_n / p.sigma_t;
    m.intercept = p.mu_n - p.rho * p.mu_t * p.sigma_n / p.sigma_t;
    m.sigma_cond = p.sigma_n * std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho));
    return m;
}

} // namespace detail

inline void validate_scenario(const SyntheticScenario& s) {
    if (s.n_years < 1) throw SchemaError("scenario needs at least one year");
    for (int m = 1; m <= 12; ++m) {
        detail::validate_scenario_month(s.months[static_cast<std::size_t>(m - 1)], m);
        if (s.regime_shift) {
            detail::validate_scenario_month(s.regime_shift->months[static_cast<std::size_t>(m - 1)], m);
        }
    }
}

// True per-month conditional models implied by the scenario parameters;
// what an ideal fit of infinitely much generated data would recover.
inline ModelSet scenario_model_set(const SyntheticScenario& s) {
    ModelSet set;
    set.temp_unit = s.temp_unit;
    for (int m = 1; m <= 12; ++m) {
        MonthModel mm;
        mm.joint = s.months[static_cast<std::size_t>(m - 1)];
        mm.cond = detail::scenario_conditional(mm.joint, m, s.temp_unit);
        set.months[static_cast<std::size_t>(m - 1)] = mm;
    }
    return set;
}

// Baseline at the scenario's undrifted monthly means.
inline MonthlyBaseline scenario_baseline(const SyntheticScenario& s) {
    MonthlyBaseline b;
    b.unit = s.temp_unit;
    for (int m = 1; m <= 12; ++m) b.t0[static_cast<std::size_t>(m - 1)] = s.months[static_cast<std::size_t>(m - 1)].mu_t;
    return b;
}

// Draws the synthetic series. Each (year, month) cell has its own RNG
// stream, so output is independent of evaluation order. Temperatures drift
// by drift_per_decade per ten elapsed years; counts are rounded to
// nonnegative integers. Zero-spread months bypass the sampler.
inline std::vector<MonthlyObservation> generate_series(const SyntheticScenario& s) {
    validate_scenario(s);
    std::vector<MonthlyObservation> out;
    out.reserve(static_cast<std::size_t>(s.n_years) * 12);

    for (int y = 0; y < s.n_years; ++y) {
        const int calendar_year = s.start_year + y;
        const bool shifted = s.regime_shift && calendar_year >= s.regime_shift->start_year;
        const auto& months = shifted ? s.regime_shift->months : s.months;
        const double drift = s.drift_per_decade * static_cast<double>(y) / 10.0;

        for (int m = 1; m <= 12; ++m) {
            const auto& p = months[static_cast<std::size_t>(m - 1)];
            const auto cond = detail::scenario_conditional(p, m, s.temp_unit);
            auto eng = rng::stream_for(s.seed, static_cast<std::uint64_t>(y) * 12 + static_cast<std::uint64_t>(m - 1));

            const double t_mean = p.mu_t + drift;
            const double t = p.sigma_t > 0.0 ? rng::normal(eng, t_mean, p.sigma_t) : t_mean;
            const double n_mean = cond.mean_at(t);
            const double n_cont = cond.sigma_cond > 0.0 ? rng::normal(eng, n_mean, cond.sigma_cond) : n_mean;

            MonthlyObservation obs;
            obs.year = calendar_year;
            obs.month = m;
            obs.count = std::max(0LL, std::llround(n_cont));
            obs.mean_temp = Temperature{t, s.temp_unit};
            obs.total_cost = 0.0;
            out.push_back(obs);
        }
    }
    return out;
}

// Monte Carlo check of the expectation identity behind the scheme B split:
// sampling N from the conditional at T, the mean of N*(1-alpha) must match
// slope*(T-T0). invert_alpha flips the density ratio to demonstrate that the
// chosen orientation, not the inverse one, satisfies the identity.
struct McCheck {
    double mc_mean = 0.0;
    double closed_form = 0.0;
    double std_error = 0.0;
    int n_samples = 0;

    double z() const { return std_error > 0.0 ? (mc_mean - closed_form) / std_error : 0.0; }
};

inline McCheck mc_expectation_check(const ConditionalModel& model,
                                    Temperature t, Temperature t0,
                                    int n_samples, std::uint64_t seed,
                                    bool invert_alpha = false) {
    if (n_samples < 1000) throw UsageError("mc_expectation_check needs at least 1000 samples");
    require_same_unit(t.unit, model.temp_unit, "mc_expectation_check: T");
    require_same_unit(t0.unit, model.temp_unit, "mc_expectation_check: T0");
    if (model.sigma_cond <= 0.0) {
        throw DegenerateFitError("mc_expectation_check: zero residual spread");
    }

    const double mean_at_t = model.mean_at(t.value);
    auto eng = rng::stream_for(seed, 0);

    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const double n = rng::normal(eng, mean_at_t, model.sigma_cond);
        auto alpha = attribution_alpha(model, n, t, t0);
        double a = alpha.value;
        if (invert_alpha) a = std::exp(std::min(-alpha.log_ratio, kAlphaLogSaturation));
        const double x = n * (1.0 - a);
        const double delta = x - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (x - mean);
    }

    McCheck check;
    check.n_samples = n_samples;
    check.mc_mean = mean;
    check.closed_form = model.slope * (t.value - t0.value);
    const double variance = m2 / static_cast<double>(n_samples - 1);
    check.std_error = std::sqrt(variance / static_cast<double>(n_samples));
    return check;
}

// Spread of the annual attributed totals under both schemes across replicate
// synthetic histories. Scheme A varies only with the temperature draws;
// scheme B additionally rides the count noise.
struct VolatilitySummary {
    double mean_a = 0.0;
    double sd_a = 0.0;
    double mean_b = 0.0;
    double sd_b = 0.0;
    int n_replicates = 0;
    int n_annual_samples = 0;

    double se_a() const { return sd_a / std::sqrt(static_cast<double>(n_annual_samples)); }
    double se_b() const { return sd_b / std::sqrt(static_cast<double>(n_annual_samples)); }
    // Standard error of mean_a - mean_b, treating the pools as independent
    // (conservative: the shared temperature draws correlate them).
    double combined_se() const { return std::sqrt(se_a() * se_a() + se_b() * se_b()); }
};

inline VolatilitySummary scheme_volatility(const SyntheticScenario& scenario,
                                           const ModelSet& models,
                                           const MonthlyBaseline& baseline,
                                           int n_replicates, std::uint64_t seed) {
    if (n_replicates < 30) throw UsageError("scheme_volatility needs at least 30 replicates");

    std::vector<double> annual_a, annual_b;
    annual_a.reserve(static_cast<std::size_t>(n_replicates) * static_cast<std::size_t>(scenario.n_years));
    annual_b.reserve(annual_a.capacity());

    std::uint64_t stream = seed;
    for (int rep = 0; rep < n_replicates; ++rep) {
        SyntheticScenario replicate = scenario;
        replicate.seed = rng::splitmix64(stream);
        const auto series = generate_series(replicate);
        const auto result = attribute_series(series, models, baseline, 0.5);
        for (const auto& roll : result.annual) {
            annual_a.push_back(roll.delta_e);
            annual_b.push_back(roll.attributed_b);
        }
    }

    const auto summarize = [](const std::vector<double>& xs, double& mean, double& sd) {
        mean = 0.0;
        for (const double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double ss = 0.0;
        for (const double x : xs) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    };

    VolatilitySummary summary;
    summary.n_replicates = n_replicates;
    summary.n_annual_samples = static_cast<int>(annual_a.size());
    summarize(annual_a, summary.mean_a, summary.sd_a);
    summarize(annual_b, summary.mean_b, summary.sd_b);
    return summary;
}

} // namespace climattr
