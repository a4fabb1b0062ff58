#include <catch2/catch_amalgamated.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <climattr/app.hpp>
#include <climattr/model_io.hpp>
#include <climattr/simulate.hpp>

#include "helpers.hpp"

using namespace climattr;
using testing::TempDir;
using testing::read_file;
using testing::write_file;

namespace {

struct CliResult {
    int rc = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    CliResult result;
    try {
        result.rc = app::run(args);
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    result.out = out.str();
    result.err = err.str();
    return result;
}

// Six years of monthly fixtures with deterministic wiggle so every month has
// nonzero variance in both counts and temperatures.
double fixture_temp(int y, int m) {
    return 30.0 + 4.0 * m + 0.7 * static_cast<double>((y * 7 + m) % 5 - 2);
}

int fixture_count(int y, int m) {
    return 1 + (y + m) % 4 + y % 2;
}

std::string fixture_temps_csv(int degenerate_month = 0) {
    std::string out = "year,month,temp\n";
    for (int y = 2000; y <= 2005; ++y) {
        for (int m = 1; m <= 12; ++m) {
            const double t = m == degenerate_month ? 50.0 : fixture_temp(y, m);
            out += std::to_string(y) + "," + std::to_string(m) + "," + io::format_sig(t) + "\n";
        }
    }
    return out;
}

std::string fixture_events_csv() {
    std::string out = "date,cost,region\n";
    for (int y = 2000; y <= 2005; ++y) {
        for (int m = 1; m <= 12; ++m) {
            const int n = fixture_count(y, m);
            for (int i = 0; i < n; ++i) {
                out += std::to_string(y) + "-" + (m < 10 ? "0" : "") + std::to_string(m) + "-" +
                       (i + 3 < 10 ? "0" : "") + std::to_string(i + 3) + ",$1.5K,north\n";
            }
        }
    }
    return out;
}

std::string fixture_baseline_csv() {
    std::string out = "month,temp\n";
    for (int m = 1; m <= 12; ++m) {
        out += std::to_string(m) + "," + io::format_sig(30.0 + 4.0 * m) + "\n";
    }
    return out;
}

struct Workspace {
    TempDir dir;
    std::string events, temps, baseline, out;

    Workspace() {
        events = (dir.path / "events.csv").string();
        temps = (dir.path / "temps.csv").string();
        baseline = (dir.path / "baseline.csv").string();
        out = (dir.path / "out").string();
        write_file(events, fixture_events_csv());
        write_file(temps, fixture_temps_csv());
        write_file(baseline, fixture_baseline_csv());
    }

    std::vector<std::string> fit_args() const {
        return {"fit", "--events", events, "--temps", temps,
                "--start-year", "2000", "--end-year", "2005", "--out", out};
    }
};

} // namespace

TEST_CASE("fit writes models and diagnostics deterministically", "[cli]") {
    Workspace ws;
    const auto r = run_cli(ws.fit_args());
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("fit:") != std::string::npos);

    const auto models = io::read_json_file(ws.dir.path / "out" / "models.json");
    REQUIRE(models.is_array());
    REQUIRE(models.size() == 12);
    CHECK(models.at(0).at("temp_unit") == "F");
    CHECK(models.at(0).at("n_points").get<int>() == 6);
    const auto diag = io::read_json_file(ws.dir.path / "out" / "diagnostics.json");
    CHECK(diag.contains("yearly_sd_fraction"));
    CHECK(diag.contains("yearly_fit"));

    // a second run into a fresh directory produces identical bytes
    const auto out2 = (ws.dir.path / "out2").string();
    auto args = ws.fit_args();
    args.back() = out2;
    REQUIRE(run_cli(args).rc == 0);
    CHECK(read_file(ws.dir.path / "out" / "models.json") ==
          read_file(ws.dir.path / "out2" / "models.json"));
}

TEST_CASE("fit failures carry machine-readable errors", "[cli]") {
    Workspace ws;

    SECTION("missing temperature file names the path") {
        auto args = ws.fit_args();
        args[4] = (ws.dir.path / "nope.csv").string();
        const auto r = run_cli(args);
        CHECK(r.rc == 2);
        const auto err = io::parse_json(r.err, "stderr");
        CHECK(err.at("error").at("type") == "io");
        CHECK(err.at("error").at("message").get<std::string>().find("nope.csv") != std::string::npos);
        CHECK(err.at("error").at("exit_code").get<int>() == 2);
    }

    SECTION("a month with constant temperature is a degenerate fit") {
        write_file(ws.temps, fixture_temps_csv(/*degenerate_month=*/5));
        const auto r = run_cli(ws.fit_args());
        CHECK(r.rc == 3);
        const auto err = io::parse_json(r.err, "stderr");
        CHECK(err.at("error").at("type") == "degenerate_fit");
        CHECK(err.at("error").at("message").get<std::string>().find("month 5") != std::string::npos);
    }

    SECTION("no inputs at all is a usage error") {
        const auto r = run_cli({"fit"});
        CHECK(r.rc == 64);
        CHECK(io::parse_json(r.err, "stderr").at("error").at("type") == "usage");
    }

    SECTION("unreadable event rows are warned about, not fatal") {
        auto csv = fixture_events_csv();
        csv += "garbage-date,$1K,north\n";
        write_file(ws.events, csv);
        const auto r = run_cli(ws.fit_args());
        CHECK(r.rc == 0);
        CHECK(r.err.find("row_errors") != std::string::npos);
    }

    SECTION("an event file with no usable rows is fatal") {
        write_file(ws.events, "date,cost\njunk,junk\n");
        const auto r = run_cli(ws.fit_args());
        CHECK(r.rc == 2);
        CHECK(io::parse_json(r.err, "stderr").at("error").at("type") == "parse");
    }
}

TEST_CASE("attribute splits the series against a baseline", "[cli]") {
    Workspace ws;
    REQUIRE(run_cli(ws.fit_args()).rc == 0);
    const auto models_path = (ws.dir.path / "out" / "models.json").string();

    const auto r = run_cli({"attribute", "--events", ws.events, "--temps", ws.temps,
                            "--start-year", "2000", "--end-year", "2005",
                            "--models", models_path, "--baseline", ws.baseline,
                            "--out", ws.out});
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);

    const auto monthly = read_file(ws.dir.path / "out" / "attribution_monthly.csv");
    CHECK(monthly.rfind("year,month,N_obs,T_obs,T0,delta_E,alpha,attributed_B,natural_B,blended,"
                        "expected_N,alpha_saturated\n", 0) == 0);
    const auto annual = read_file(ws.dir.path / "out" / "attribution_annual.csv");
    CHECK(annual.rfind("year,N_obs,delta_E,", 0) == 0);
    const auto j = io::read_json_file(ws.dir.path / "out" / "attribution.json");
    CHECK(j.at("scheme_weight").get<double>() == 0.5);
    CHECK(j.at("monthly").size() == 72);
    CHECK(j.at("annual").size() == 6);

    SECTION("weight outside [0,1] is a usage error") {
        const auto bad = run_cli({"attribute", "--events", ws.events, "--temps", ws.temps,
                                  "--start-year", "2000", "--end-year", "2005",
                                  "--models", models_path, "--baseline", ws.baseline,
                                  "--weight", "1.5", "--out", ws.out});
        CHECK(bad.rc == 64);
    }

    SECTION("baseline can come from early series years instead of a file") {
        const auto byrs = run_cli({"attribute", "--events", ws.events, "--temps", ws.temps,
                                   "--start-year", "2000", "--end-year", "2005",
                                   "--models", models_path, "--baseline-years", "2000:2002",
                                   "--out", ws.out});
        CHECK(byrs.rc == 0);
    }

    SECTION("asking for both baseline sources is refused") {
        const auto both = run_cli({"attribute", "--events", ws.events, "--temps", ws.temps,
                                   "--start-year", "2000", "--end-year", "2005",
                                   "--models", models_path, "--baseline", ws.baseline,
                                   "--baseline-years", "2000:2002", "--out", ws.out});
        CHECK(both.rc == 64);
    }

    SECTION("attribute without models is a usage error") {
        const auto r2 = run_cli({"attribute", "--events", ws.events, "--temps", ws.temps,
                                 "--start-year", "2000", "--end-year", "2005",
                                 "--baseline", ws.baseline, "--out", ws.out});
        CHECK(r2.rc == 64);
    }
}

TEST_CASE("attribute at baseline temperatures writes all-zero split columns", "[cli]") {
    Workspace ws;
    REQUIRE(run_cli(ws.fit_args()).rc == 0);
    const auto models_path = (ws.dir.path / "out" / "models.json").string();

    // a series whose temperatures equal the baseline month for month
    std::vector<MonthlyObservation> series;
    for (int y = 2010; y <= 2011; ++y) {
        for (int m = 1; m <= 12; ++m) {
            MonthlyObservation obs;
            obs.year = y;
            obs.month = m;
            obs.count = 3 + m;
            obs.mean_temp = {30.0 + 4.0 * m, TempUnit::fahrenheit};
            series.push_back(obs);
        }
    }
    const auto series_path = (ws.dir.path / "flat_series.json").string();
    io::write_json_file(series_path, io::series_to_json(series));

    const auto r = run_cli({"attribute", "--series", series_path, "--models", models_path,
                            "--baseline", ws.baseline, "--out", ws.out});
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);

    std::istringstream monthly(read_file(ws.dir.path / "out" / "attribution_monthly.csv"));
    std::string line;
    std::getline(monthly, line); // header
    int rows = 0;
    while (std::getline(monthly, line)) {
        const auto fields = csv::split_record(line, ',');
        REQUIRE(fields.size() == 12);
        CHECK(fields[5] == "0"); // delta_E
        CHECK(fields[6] == "1"); // alpha
        CHECK(fields[7] == "0"); // attributed_B
        CHECK(fields[9] == "0"); // blended
        rows += 1;
    }
    CHECK(rows == 24);
}

TEST_CASE("project computes the cost chain from explicit inputs", "[cli]") {
    TempDir dir;
    const auto out = (dir.path / "out").string();
    const std::vector<std::string> base{
        "project", "--counterfactual-annual", "758", "--percent-per-degc", "5.6",
        "--delta-t", "0.67", "--avg-cost", "57800", "--warming-rate", "0.19",
        "--horizon", "10", "--out", out};

    const auto r = run_cli(base);
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("project:") != std::string::npos);

    const auto proj = io::read_json_file(dir.path / "out" / "projection.json");
    const double current = proj.at("current_attributed_cost_per_year").get<double>();
    const double projected = proj.at("projected_attributed_cost_per_year").get<double>();
    CHECK(current > 1.5e6);
    CHECK(current < 1.7e6);
    CHECK(projected > 2.0e6);
    CHECK(projected < 2.2e6);

    SECTION("zero warming rate projects no growth") {
        auto args = base;
        args[10] = "0.0"; // --warming-rate value
        REQUIRE(run_cli(args).rc == 0);
        const auto flat = io::read_json_file(dir.path / "out" / "projection.json");
        CHECK(flat.at("projected_attributed_cost_per_year").get<double>() ==
              flat.at("current_attributed_cost_per_year").get<double>());
    }

    SECTION("negative horizon is a usage error") {
        auto args = base;
        args[12] = "-1"; // --horizon value
        const auto bad = run_cli(args);
        CHECK(bad.rc == 64);
        CHECK(io::parse_json(bad.err, "stderr").at("error").at("type") == "usage");
    }

    SECTION("average cost is required") {
        const auto bad = run_cli({"project", "--counterfactual-annual", "758",
                                  "--percent-per-degc", "5.6", "--delta-t", "0.67", "--out", out});
        CHECK(bad.rc == 64);
        CHECK(bad.err.find("avg-cost") != std::string::npos);
    }

    SECTION("warming to date is required on the explicit path") {
        const auto bad = run_cli({"project", "--counterfactual-annual", "758",
                                  "--percent-per-degc", "5.6", "--avg-cost", "57800", "--out", out});
        CHECK(bad.rc == 64);
    }
}

TEST_CASE("project can derive sensitivity from models and a series", "[cli]") {
    Workspace ws;
    REQUIRE(run_cli(ws.fit_args()).rc == 0);
    const auto models_path = (ws.dir.path / "out" / "models.json").string();

    const auto r = run_cli({"project", "--events", ws.events, "--temps", ws.temps,
                            "--start-year", "2000", "--end-year", "2005",
                            "--models", models_path, "--baseline", ws.baseline,
                            "--avg-cost", "45000", "--warming-rate", "0.19",
                            "--horizon", "10", "--out", ws.out});
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);
    const auto sens = io::read_json_file(ws.dir.path / "out" / "sensitivity.json");
    CHECK(sens.at("mode") == "mean-of-monthly");
    CHECK(sens.at("counterfactual_annual").is_number());
    const auto proj = io::read_json_file(ws.dir.path / "out" / "projection.json");
    CHECK(proj.at("horizon_years").get<int>() == 10);
}

namespace {

std::string write_small_scenario(const TempDir& dir, int n_years = 4) {
    SyntheticScenario s;
    s.temp_unit = TempUnit::fahrenheit;
    s.n_years = n_years;
    s.start_year = 2000;
    s.seed = 11;
    s.drift_per_decade = 0.5;
    for (int m = 1; m <= 12; ++m) {
        auto& p = s.months[static_cast<std::size_t>(m - 1)];
        p.mu_n = 80.0 + 10.0 * m;
        p.mu_t = 30.0 + 4.0 * m;
        p.sigma_n = 15.0;
        p.sigma_t = 2.0;
        p.rho = 0.6;
    }
    const auto path = (dir.path / "scenario.json").string();
    io::write_json_file(path, io::scenario_to_json(s));
    return path;
}

} // namespace

TEST_CASE("simulate generates, self-checks and reports", "[cli]") {
    TempDir dir;
    const auto scenario = write_small_scenario(dir);
    const auto out = (dir.path / "out").string();

    const auto r = run_cli({"simulate", "--scenario", scenario, "--replicates", "0",
                            "--mc-samples", "20000", "--out", out});
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("12 expectation checks passed") != std::string::npos);

    const auto series = io::read_json_file(dir.path / "out" / "series.json");
    CHECK(series.size() == 48);
    const auto truth = io::read_json_file(dir.path / "out" / "truth_models.json");
    CHECK(truth.size() == 12);
    const auto report = io::read_json_file(dir.path / "out" / "simulate_report.json");
    CHECK(report.at("all_checks_passed").get<bool>());
    CHECK(report.at("expectation_checks").size() == 12);
    CHECK_FALSE(report.contains("scheme_volatility")); // replicates 0 skips it
}

TEST_CASE("simulate seeds pin the output bytes", "[cli]") {
    TempDir dir;
    const auto scenario = write_small_scenario(dir);

    const auto out_a = (dir.path / "a").string();
    const auto out_b = (dir.path / "b").string();
    const auto out_c = (dir.path / "c").string();
    REQUIRE(run_cli({"simulate", "--scenario", scenario, "--seed", "42", "--replicates", "0",
                     "--mc-samples", "20000", "--out", out_a}).rc == 0);
    REQUIRE(run_cli({"simulate", "--scenario", scenario, "--seed", "42", "--replicates", "0",
                     "--mc-samples", "20000", "--out", out_b}).rc == 0);
    REQUIRE(run_cli({"simulate", "--scenario", scenario, "--seed", "43", "--replicates", "0",
                     "--mc-samples", "20000", "--out", out_c}).rc == 0);

    CHECK(read_file(dir.path / "a" / "series.json") == read_file(dir.path / "b" / "series.json"));
    CHECK(read_file(dir.path / "a" / "simulate_report.json") ==
          read_file(dir.path / "b" / "simulate_report.json"));
    CHECK(read_file(dir.path / "a" / "series.json") != read_file(dir.path / "c" / "series.json"));
}

TEST_CASE("simulate with an inverted ratio fails loudly", "[cli]") {
    TempDir dir;
    const auto scenario = write_small_scenario(dir);
    const auto out = (dir.path / "out").string();

    const auto r = run_cli({"simulate", "--scenario", scenario, "--invert-alpha",
                            "--replicates", "0", "--mc-samples", "20000", "--out", out});
    CHECK(r.rc == 1);
    const auto err = io::parse_json(r.err, "stderr");
    CHECK(err.at("error").at("type") == "check_failed");
    CHECK(err.at("error").at("exit_code").get<int>() == 1);

    // the report is still written, with the failures recorded
    const auto report = io::read_json_file(dir.path / "out" / "simulate_report.json");
    CHECK(report.at("inverted_alpha").get<bool>());
    CHECK_FALSE(report.at("all_checks_passed").get<bool>());
}

TEST_CASE("simulate validates its knobs", "[cli]") {
    TempDir dir;
    const auto scenario = write_small_scenario(dir);
    const auto out = (dir.path / "out").string();

    CHECK(run_cli({"simulate", "--out", out}).rc == 64);

    const auto few = run_cli({"simulate", "--scenario", scenario, "--replicates", "10", "--out", out});
    CHECK(few.rc == 64);

    write_file(dir.path / "broken.json", "{broken");
    const auto bad = run_cli({"simulate", "--scenario", (dir.path / "broken.json").string(),
                              "--out", out});
    CHECK(bad.rc == 2);

    const auto vol = run_cli({"simulate", "--scenario", scenario, "--replicates", "30",
                              "--mc-samples", "20000", "--out", out});
    REQUIRE(vol.rc == 0);
    const auto report = io::read_json_file(dir.path / "out" / "simulate_report.json");
    REQUIRE(report.contains("scheme_volatility"));
    CHECK(report.at("scheme_volatility").at("n_annual_samples").get<int>() == 120);
}

TEST_CASE("report runs the whole pipeline in one pass", "[cli]") {
    Workspace ws;
    const auto r = run_cli({"report", "--events", ws.events, "--temps", ws.temps,
                            "--start-year", "2000", "--end-year", "2005",
                            "--baseline", ws.baseline, "--avg-cost", "45000",
                            "--warming-rate", "0.19", "--horizon", "10", "--out", ws.out});
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("report:") != std::string::npos);

    const auto summary = io::read_json_file(ws.dir.path / "out" / "report.json");
    CHECK(summary.at("temp_unit") == "F");
    CHECK(summary.at("window").at("start_year").get<int>() == 2000);
    CHECK(summary.at("window").at("end_year").get<int>() == 2005);
    CHECK(summary.at("observed_annual_mean").is_number());
    CHECK(summary.at("counterfactual_annual").is_number());
    CHECK(summary.at("mean_annual_attributed").contains("share_split"));
    CHECK(summary.at("diagnostics").contains("yearly_fit"));
    CHECK(summary.contains("projection"));

    for (const char* name : {"models.json", "diagnostics.json", "attribution_monthly.csv",
                             "attribution_annual.csv", "attribution.json", "sensitivity.json",
                             "projection.json", "report.json"}) {
        CHECK(std::filesystem::exists(ws.dir.path / "out" / name));
    }

    SECTION("without a cost the projection is simply absent") {
        const auto out2 = (ws.dir.path / "out2").string();
        const auto r2 = run_cli({"report", "--events", ws.events, "--temps", ws.temps,
                                 "--start-year", "2000", "--end-year", "2005",
                                 "--baseline", ws.baseline, "--out", out2});
        REQUIRE(r2.rc == 0);
        const auto s2 = io::read_json_file(ws.dir.path / "out2" / "report.json");
        CHECK_FALSE(s2.contains("projection"));
        CHECK_FALSE(std::filesystem::exists(ws.dir.path / "out2" / "projection.json"));
    }
}

TEST_CASE("config files feed the flags and flags win", "[cli]") {
    Workspace ws;
    io::json cfg;
    cfg["events_csv"] = ws.events;
    cfg["temps_csv"] = ws.temps;
    cfg["start_year"] = 2000;
    cfg["end_year"] = 2005;
    cfg["output_dir"] = (ws.dir.path / "from_config").string();
    const auto cfg_path = (ws.dir.path / "config.json").string();
    io::write_json_file(cfg_path, cfg);

    const auto r = run_cli({"fit", "--config", cfg_path});
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);
    CHECK(std::filesystem::exists(ws.dir.path / "from_config" / "models.json"));

    // an explicit flag overrides the config value
    const auto r2 = run_cli({"fit", "--config", cfg_path, "--out", (ws.dir.path / "from_flag").string()});
    REQUIRE(r2.rc == 0);
    CHECK(std::filesystem::exists(ws.dir.path / "from_flag" / "models.json"));

    SECTION("unknown config keys are rejected") {
        cfg["no_such_knob"] = 1;
        io::write_json_file(cfg_path, cfg);
        const auto bad = run_cli({"fit", "--config", cfg_path});
        CHECK(bad.rc == 2);
        const auto err = io::parse_json(bad.err, "stderr");
        CHECK(err.at("error").at("type") == "schema");
        CHECK(err.at("error").at("message").get<std::string>().find("no_such_knob") !=
              std::string::npos);
    }

    SECTION("missing config file is an io error") {
        const auto bad = run_cli({"fit", "--config", (ws.dir.path / "ghost.json").string()});
        CHECK(bad.rc == 2);
        CHECK(io::parse_json(bad.err, "stderr").at("error").at("type") == "io");
    }
}

TEST_CASE("top-level invocations behave like a well-mannered tool", "[cli]") {
    const auto none = run_cli({});
    CHECK(none.rc == 64);
    CHECK(io::parse_json(none.err, "stderr").at("error").at("type") == "usage");

    const auto help = run_cli({"--help"});
    CHECK(help.rc == 0);
    CHECK(help.out.find("fit") != std::string::npos);
    CHECK(help.out.find("simulate") != std::string::npos);

    const auto version = run_cli({"--version"});
    CHECK(version.rc == 0);
    CHECK(version.out.find("climattr") != std::string::npos);

    const auto unknown = run_cli({"fit", "--no-such-flag"});
    CHECK(unknown.rc == 64);

    const auto sub_help = run_cli({"project", "--help"});
    CHECK(sub_help.rc == 0);
    CHECK(sub_help.out.find("--avg-cost") != std::string::npos);
}
