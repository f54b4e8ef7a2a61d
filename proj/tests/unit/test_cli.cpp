#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "elport/cli.hpp"

using Catch::Approx;
using namespace elport;
namespace fs = std::filesystem;

namespace {

const std::string kData = ELPORT_TEST_DATA_DIR;
const std::string kCli = ELPORT_CLI_PATH;

struct Run {
    int code = -1;
    std::string out;
};

Run run_cli(const std::string& args) {
    Run r;
    FILE* pipe = ::popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path write_temp(const std::string& name, const std::string& body) {
    const auto p = fs::temp_directory_path() / ("elport_cli_" + name);
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST_CASE("log returns", "[cli]") {
    const auto r = log_returns({1.0, std::numbers::e, std::numbers::e});
    REQUIRE(r.size() == 2);
    CHECK(r[0] == Approx(1.0).margin(1e-15));
    CHECK(r[1] == 0.0);
    CHECK_THROWS_WITH(log_returns({1.0, 0.0, 2.0}), Catch::Matchers::ContainsSubstring("row 2"));
    CHECK_THROWS_WITH(log_returns({1.0, 2.0, -1.0}, {5, 6, 7}), Catch::Matchers::ContainsSubstring("row 7"));
}

TEST_CASE("CSV ingestion with header and column selection", "[cli]") {
    const auto p = write_temp("prices.csv", "date,price\n2020-01-01,1\n2020-01-02,2.718281828459045\n2020-01-03,2.718281828459045\n");
    const auto x = ingest_csv(p.string(), "price", Transform::log_return, 1);
    REQUIRE(x.size() == 2);
    CHECK(x[0] == Approx(1.0).margin(1e-12));
    CHECK(x[1] == Approx(0.0).margin(1e-15));
    CHECK(ingest_csv(p.string(), "2", Transform::none, 1).size() == 3);
    CHECK(ingest_csv(p.string(), "", Transform::none, 1)[1] == Approx(std::numbers::e));
    CHECK_THROWS(ingest_csv(p.string(), "volume", Transform::none, 1));
    CHECK_THROWS(ingest_csv(p.string(), "price", Transform::none, 30));

    const auto fixture = ingest_csv(kData + "/null_arma11.csv", "value");
    CHECK(fixture.size() == 400);
    CHECK(ingest_csv(kData + "/prices.csv", "price", Transform::log_return).size() == 400);
}

TEST_CASE("CSV ingestion errors name the row", "[cli]") {
    // Rows are file line numbers, header included.
    const auto bad = write_temp("bad.csv", "v\n1\n2\nabc\n4\n");
    CHECK_THROWS_WITH(ingest_csv(bad.string(), "v", Transform::none, 1), Catch::Matchers::ContainsSubstring("row 4"));
    const auto zero = write_temp("zero.csv", "v\n1\n2\n0\n4\n");
    CHECK_THROWS_WITH(ingest_csv(zero.string(), "v", Transform::log_return, 1), Catch::Matchers::ContainsSubstring("row 4"));
    CHECK_THROWS(ingest_csv("/nonexistent/file.csv"));
}

TEST_CASE("significance stars", "[cli]") {
    CHECK(stars(0.2) == "");
    CHECK(stars(0.1) == "");
    CHECK(stars(0.07) == "*");
    CHECK(stars(0.03) == "**");
    CHECK(stars(0.001) == "***");
}

TEST_CASE("run_tests on the null fixture", "[cli]") {
    RunConfig cfg;
    cfg.tests = {Method::BP, Method::LB, Method::RW, Method::EL, Method::WeL};
    const auto x = ingest_csv(kData + "/null_arma11.csv", "value");
    const auto b = run_tests(cfg, x);
    CHECK(b.converged);
    REQUIRE(b.tests.size() == 5);
    for (const auto& t : b.tests) {
        INFO(t.name);
        CHECK_FALSE(t.failed());
        REQUIRE(t.p_value.has_value());
        CHECK(*t.p_value > 0.05);
    }
    CHECK(b.tests[0].name == "bp");
    CHECK(b.tests[2].name == "rw");

    RunConfig none = cfg;
    none.tests.clear();
    CHECK_THROWS(run_tests(none, x));
    const TimeSeries flat(std::vector<double>(100, 1.5));
    CHECK_THROWS_AS(run_tests(cfg, flat), FitFailure);
}

TEST_CASE("CLI exit codes", "[cli]") {
    const std::string input = "--input " + kData + "/null_arma11.csv";
    CHECK(run_cli("test " + input + " --tests lb").code == 0);
    CHECK(run_cli("test " + input + " --tests ''").code == 1);
    CHECK(run_cli("test " + input + " --tests xyz").code == 1);
    CHECK(run_cli("test --input /nonexistent.csv").code == 1);
    CHECK(run_cli("test").code == 1);

    std::string flat = "v\n";
    for (int i = 0; i < 60; ++i) flat += "1.5\n";
    const auto p = write_temp("flat.csv", flat);
    CHECK(run_cli("test --input " + p.string() + " --tests lb").code == 2);
}

TEST_CASE("CLI JSON output is reproducible and well formed", "[cli]") {
    const std::string args = "test --input " + kData + "/null_arma11.csv --tests bp,lb,rw,el,wel --seed 7 --rw-B 200 --format json";
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);

    const auto j = nlohmann::json::parse(a.out);
    CHECK(j.at("series").at("n") == 400);
    CHECK(j.at("series").at("transform") == "none");
    CHECK(j.at("fit").at("p") == 1);
    CHECK(j.at("fit").at("q") == 1);
    CHECK(j.at("fit").at("converged") == true);
    CHECK(j.at("fit").at("theta").at("phi").size() == 1);
    REQUIRE(j.at("tests").size() == 5);
    for (const auto& t : j.at("tests")) {
        CHECK(t.at("status") == "ok");
        CHECK(t.at("m") == 2);
        CHECK(t.at("p_value").get<double>() > 0.05);
        CHECK(t.at("reject").size() == 3);
        CHECK(t.at("stars") == "");
    }

    const auto other = run_cli("test --input " + kData + "/null_arma11.csv --tests rw --seed 8 --rw-B 200 --format json");
    const auto j8 = nlohmann::json::parse(other.out);
    CHECK(j8.at("tests").at(0).at("p_value") != j.at("tests").at(2).at("p_value"));
}

TEST_CASE("text, JSON and CSV report the same numbers", "[cli]") {
    const std::string base = "test --input " + kData + "/null_arma11.csv --tests lb,el ";
    const auto js = nlohmann::json::parse(run_cli(base + "--format json").out);
    const auto csv = run_cli(base + "--format csv").out;
    const auto text = run_cli(base + "--format text").out;

    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "name,m,stat,p_value,stars,status");
    for (const auto& t : js.at("tests")) {
        REQUIRE(std::getline(in, line));
        const std::string stat = fmt12(t.at("stat").get<double>());
        const std::string p = fmt12(t.at("p_value").get<double>());
        CHECK(line.rfind(t.at("name").get<std::string>() + ",2," + stat + "," + p + ",", 0) == 0);
        CHECK(text.find(stat) != std::string::npos);
        CHECK(text.find(p) != std::string::npos);
    }
}

TEST_CASE("CLI diagnose and simulate-study", "[cli]") {
    const auto d = run_cli("diagnose --input " + kData + "/null_arma11.csv --lyapunov 0.1,0.15 --lyapunov-T 1000 --lyapunov-reps 10 --format json");
    REQUIRE(d.code == 0);
    const auto j = nlohmann::json::parse(d.out);
    CHECK(j.at("arch_lm").at("p_value").get<double>() > 0.05);
    CHECK(j.at("lyapunov").at("nu_star_hat").get<double>() < 0.0);
    CHECK(run_cli("diagnose --input " + kData + "/null_arma11.csv --lyapunov 0.1").code == 1);

    const auto cfg_path = write_temp("study.json", R"({"arma":{"mu":0,"phi":[0.3],"psi":[0.4]},"garch":{"omega":0.2,"a":[0.1],"b":[0.15]},
        "ns":[100],"cs":[0],"reps":100,"methods":["lb"],"root_seed":3})");
    const auto out = fs::temp_directory_path() / "elport_cli_study";
    fs::remove_all(out);
    const auto s = run_cli("simulate-study --config " + cfg_path.string() + " --out " + out.string());
    REQUIRE(s.code == 0);
    CHECK(fs::exists(out / "rows.csv"));
    CHECK(fs::exists(out / "summary.json"));
    CHECK(fs::exists(out / "table.txt"));
    std::ifstream rows(out / "rows.csv");
    std::stringstream body;
    body << rows.rdbuf();
    CHECK(rows_from_csv(body.str()).size() == 2);
    CHECK(run_cli("simulate-study --config " + cfg_path.string() + " --reps 10").code == 1);
}
