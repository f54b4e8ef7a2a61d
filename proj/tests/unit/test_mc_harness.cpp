#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#include "elport/mc_harness.hpp"

using Catch::Approx;
using namespace elport;

namespace {

ExperimentConfig small_grid() {
    ExperimentConfig cfg;
    cfg.arma.phi = {0.3};
    cfg.arma.psi = {0.4};
    cfg.garch.omega = 0.2;
    cfg.garch.a = {0.1};
    cfg.garch.b = {0.15};
    cfg.ns = {200};
    cfg.cs = {0.0, 15.0};
    cfg.reps = 100;
    cfg.levels = {0.1, 0.05};
    cfg.methods = {Method::EL, Method::WeL, Method::LB};
    cfg.root_seed = 2026;
    return cfg;
}

}  // namespace

TEST_CASE("method names round trip", "[mc_harness]") {
    for (auto m : {Method::RW, Method::EL, Method::WeL, Method::BP, Method::LB}) CHECK(parse_method(method_name(m)) == m);
    CHECK(method_name(Method::WeL) == "wel");
    CHECK_THROWS(parse_method("xyz"));
}

TEST_CASE("twelve significant digits", "[mc_harness]") {
    CHECK(fmt12(0.1) == "0.1");
    CHECK(fmt12(1.0 / 3.0) == "0.333333333333");
    CHECK(round12(1.0 / 3.0) == 0.333333333333);
    CHECK(fmt12(400) == "400");
}

TEST_CASE("experiment config validation", "[mc_harness]") {
    auto cfg = small_grid();
    CHECK_NOTHROW(cfg.validate());
    cfg.reps = 99;
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("reps"));
    CHECK_THROWS(run_experiment(cfg, 1));
    cfg = small_grid();
    cfg.ns = {49};
    CHECK_THROWS(cfg.validate());
    cfg = small_grid();
    cfg.levels = {1.0};
    CHECK_THROWS(cfg.validate());
    cfg = small_grid();
    cfg.methods.clear();
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("experiment config JSON round trip", "[mc_harness]") {
    const auto cfg = small_grid();
    const nlohmann::json j = cfg;
    const auto back = parse_experiment_config(j.dump());
    CHECK(nlohmann::json(back) == j);
    CHECK(back.methods == cfg.methods);
    CHECK(back.cs == cfg.cs);
    CHECK_THROWS(parse_experiment_config(R"({"reps": 10})"));
}

TEST_CASE("worker count comes from the environment", "[mc_harness]") {
    ::setenv("ELPORT_WORKERS", "3", 1);
    CHECK(default_workers() == 3);
    ::unsetenv("ELPORT_WORKERS");
    CHECK(default_workers() >= 1);
}

TEST_CASE("small grid: layout, determinism across workers, level monotonicity", "[mc_harness]") {
    const auto cfg = small_grid();
    const auto one = run_experiment_detailed(cfg, 1);
    const auto three = run_experiment_detailed(cfg, 3);

    REQUIRE(one.rows.size() == cfg.cell_count() * cfg.methods.size() * cfg.levels.size());
    CHECK(rows_to_csv(one.rows) == rows_to_csv(three.rows));
    CHECK(one.rows == three.rows);
    CHECK(one.cells.at(0).p_values.at("el") == three.cells.at(0).p_values.at("el"));

    for (std::size_t i = 0; i + 1 < one.rows.size(); i += 2) {
        const auto& lo = one.rows[i];      // level 0.1
        const auto& hi = one.rows[i + 1];  // level 0.05
        REQUIRE(lo.level == 0.1);
        REQUIRE(hi.level == 0.05);
        CHECK(lo.method == hi.method);
        CHECK(lo.rejections >= hi.rejections);
        CHECK(lo.reps_completed <= cfg.reps);
        CHECK(lo.rejection_rate() >= 0.0);
        CHECK(lo.rejection_rate() <= 1.0);
    }
    // Rejections recomputed from the stored p-values.
    const auto& cell = one.cells.at(1);
    std::size_t count = 0;
    for (double p : cell.p_values.at("lb")) count += p <= 0.05 ? 1 : 0;
    const auto it = std::find_if(one.rows.begin(), one.rows.end(), [](const ExperimentRow& r) {
        return r.c == 15.0 && r.method == "lb" && r.level == 0.05;
    });
    REQUIRE(it != one.rows.end());
    CHECK(it->rejections == count);

    // The alternative is rejected more often than the null.
    auto rate = [&](double c, const std::string& m) {
        for (const auto& r : one.rows)
            if (r.c == c && r.method == m && r.level == 0.1) return r.rejection_rate();
        return -1.0;
    };
    CHECK(rate(15.0, "el") > rate(0.0, "el"));
    CHECK(rate(15.0, "lb") > rate(0.0, "lb"));

    auto other = cfg;
    other.root_seed = 2027;
    CHECK(rows_to_csv(run_experiment(other, 1)) != rows_to_csv(one.rows));
}

TEST_CASE("rows survive CSV and JSON round trips", "[mc_harness]") {
    std::vector<ExperimentRow> rows{
        {0.0, 400, 0.0, "el", 0.1, 103, 1000, 0},
        {0.5, 400, 10.0, "wel", 0.05, 1, 3, 0},
        {0.0, 1200, 15.0, "rw", 0.05, 977, 997, 3},
    };
    const auto csv = rows_to_csv(rows);
    CHECK(csv.rfind(std::string(kRowsCsvHeader) + "\n", 0) == 0);
    CHECK(rows_from_csv(csv) == rows);
    CHECK(rows_from_json(rows_to_json_value(rows).dump()) == rows);
    CHECK(rows[1].rejection_rate() == Approx(1.0 / 3.0));
    CHECK(csv.find("0.333333333333") != std::string::npos);
}

TEST_CASE("failure flag threshold", "[mc_harness]") {
    ExperimentRow r{0.0, 400, 0.0, "el", 0.05, 50, 1000, 49};
    CHECK_FALSE(r.flagged());
    r.failures = 50;
    CHECK(r.flagged());
}

TEST_CASE("summarize a single row", "[mc_harness]") {
    const std::vector<ExperimentRow> rows{{0.0, 400, 0.0, "el", 0.05, 52, 1000, 0}};
    const auto cfg = small_grid();
    const auto t = summarize(rows, &cfg);
    CHECK(t.text.find("0.052") != std::string::npos);
    CHECK(t.text.find("el@0.05") != std::string::npos);
    CHECK(t.text.find("GARCH(a=0.1; b=0.15)") != std::string::npos);
    CHECK(rows_from_csv(t.csv) == rows);
    const auto j = nlohmann::json::parse(t.json);
    CHECK(j.at("rows").size() == 1);
    CHECK(j.at("config").at("reps") == 100);
    CHECK_THROWS(summarize({}));

    const std::vector<ExperimentRow> bad{{0.0, 400, 0.0, "el", 0.05, 52, 900, 100}};
    CHECK(summarize(bad).text.find('!') != std::string::npos);
}
