// elport: command-line front end for the portmanteau tests, diagnostics and simulation studies.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "elport/cli.hpp"
#include "elport/diagnostics.hpp"
#include "elport/mc_harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFitFailure = 2;

std::vector<elport::Method> parse_tests(const std::string& list) {
    std::vector<elport::Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = elport::detail::trim(item);
        if (item.empty()) continue;
        const auto m = elport::parse_method(item);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
}

std::vector<double> parse_pair(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.size() != 2) throw std::invalid_argument("--lyapunov expects a,b");
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

struct TestArgs {
    elport::RunConfig cfg;
    std::string tests = "el,wel,lb";
    std::string transform = "none";
    std::string format = "text";
};

int run_test(const TestArgs& a) {
    elport::RunConfig cfg = a.cfg;
    cfg.tests = parse_tests(a.tests);
    cfg.transform = elport::parse_transform(a.transform);
    cfg.format = elport::parse_format(a.format);
    cfg.validate();
    const auto x = elport::ingest_csv(cfg.input, cfg.column, cfg.transform);
    const auto bundle = elport::run_tests(cfg, x);
    std::cout << elport::render(bundle, cfg.format);
    return kOk;
}

struct StudyArgs {
    std::string config;
    std::string out;
    std::size_t reps = 0;
    std::optional<std::uint64_t> seed;
};

int run_study(const StudyArgs& a) {
    nlohmann::json j = nlohmann::json::parse(read_file(a.config));
    auto cfg = j.get<elport::ExperimentConfig>();
    if (a.reps > 0) cfg.reps = a.reps;
    if (a.seed) cfg.root_seed = *a.seed;
    cfg.validate();
    const auto rows = elport::run_experiment(cfg, elport::default_workers());
    const auto art = elport::summarize(rows, &cfg);
    if (!a.out.empty()) {
        std::filesystem::create_directories(a.out);
        write_file(std::filesystem::path(a.out) / "rows.csv", art.csv);
        write_file(std::filesystem::path(a.out) / "summary.json", art.json);
        write_file(std::filesystem::path(a.out) / "table.txt", art.text);
    }
    std::cout << art.text;
    return kOk;
}

struct DiagnoseArgs {
    std::string input;
    std::string column;
    std::string transform = "none";
    std::size_t p = 1;
    std::size_t q = 1;
    std::string lyapunov;
    std::size_t arch_lags = 4;
    std::size_t lyap_T = 10000;
    std::size_t lyap_reps = 20;
    std::uint64_t seed = 1;
    double rho = 0.95;
    std::string format = "text";
};

int run_diagnose(const DiagnoseArgs& a) {
    using elport::fmt12;
    const auto format = elport::parse_format(a.format);
    if (a.input.empty() && a.lyapunov.empty()) throw std::invalid_argument("diagnose needs --input and/or --lyapunov");
    nlohmann::json doc = nlohmann::json::object();
    std::ostringstream text;

    if (!a.input.empty()) {
        const auto transform = elport::parse_transform(a.transform);
        const auto x = elport::ingest_csv(a.input, a.column, transform);
        const auto w = elport::self_weights(x);
        const auto wm = elport::weight_moment_report(x, w, a.rho);
        doc["series"] = {{"n", x.size()}, {"transform", elport::transform_name(transform)}};
        doc["weight_moment"] = {{"rho", a.rho},
                                {"value", elport::round12(wm.value)},
                                {"last_half", elport::round12(wm.last_half)},
                                {"stable", wm.stable}};
        text << "series: n=" << x.size() << " transform=" << elport::transform_name(transform) << '\n';
        text << "weight moment (rho=" << fmt12(a.rho) << "): " << fmt12(wm.value) << " last-half " << fmt12(wm.last_half)
             << (wm.stable ? " stable" : " UNSTABLE") << '\n';

        elport::FitResult fit;
        try {
            fit = elport::ls_fit(x, a.p, a.q);
        } catch (const std::exception& e) {
            throw elport::FitFailure(std::string("ARMA fit failed: ") + e.what());
        }
        if (!fit.converged) throw elport::FitFailure("ARMA fit did not converge");
        const auto resid = elport::fitted_residuals(x, fit.theta_hat);
        const auto lm = elport::arch_lm(resid, a.arch_lags);
        doc["arch_lm"] = {{"lags", a.arch_lags}, {"stat", elport::round12(lm.stat)}, {"p_value", elport::round12(lm.p_value)}};
        text << "ARCH-LM(" << a.arch_lags << ") on ARMA(" << a.p << "," << a.q << ") residuals: stat=" << fmt12(lm.stat)
             << " p=" << fmt12(lm.p_value) << elport::stars(lm.p_value) << '\n';
    }
    if (!a.lyapunov.empty()) {
        const auto ab = parse_pair(a.lyapunov);
        elport::GarchSpec g;
        g.omega = 1.0;
        g.a = {ab[0]};
        g.b = {ab[1]};
        const auto est = elport::lyapunov_exponent(g, a.lyap_T, a.lyap_reps, a.seed);
        doc["lyapunov"] = {{"a", ab[0]},
                           {"b", ab[1]},
                           {"nu_star_hat", elport::round12(est.nu_star_hat)},
                           {"std_err", elport::round12(est.std_err)},
                           {"T", est.T},
                           {"reps", est.reps}};
        text << "Lyapunov exponent (a=" << fmt12(ab[0]) << ", b=" << fmt12(ab[1]) << "): " << fmt12(est.nu_star_hat)
             << " (se " << fmt12(est.std_err) << ", T=" << est.T << ", reps=" << est.reps << ")"
             << (est.nu_star_hat < 0 ? " strictly stationary" : " not strictly stationary") << '\n';
    }
    if (format == elport::OutputFormat::json) {
        std::cout << doc.dump(2) << '\n';
    } else {
        std::cout << text.str();
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Empirical-likelihood portmanteau tests for ARMA models with GARCH errors"};
    app.require_subcommand(1);

    TestArgs targs;
    auto* test = app.add_subcommand("test", "Fit ARMA(p,q) to a CSV column and run portmanteau tests");
    test->add_option("--input", targs.cfg.input, "CSV file")->required();
    test->add_option("--column", targs.cfg.column, "Column name or 1-based index (default: last column)");
    test->add_option("--transform", targs.transform, "none | log_return");
    test->add_option("--p", targs.cfg.p, "AR order");
    test->add_option("--q", targs.cfg.q, "MA order");
    test->add_option("--m", targs.cfg.m, "Number of autocorrelation lags");
    test->add_option("--tests", targs.tests, "Comma list from bp,lb,rw,el,wel");
    test->add_option("--seed", targs.cfg.seed, "Seed for the bootstrap");
    test->add_option("--format", targs.format, "text | json | csv");
    test->add_option("--rw-B", targs.cfg.rw_B, "Bootstrap replicates");

    StudyArgs sargs;
    auto* study = app.add_subcommand("simulate-study", "Run a size/power grid (workers: ELPORT_WORKERS)");
    study->add_option("--config", sargs.config, "Experiment JSON")->required();
    study->add_option("--out", sargs.out, "Directory for rows.csv, summary.json and table.txt");
    study->add_option("--reps", sargs.reps, "Override replications");
    study->add_option("--seed", sargs.seed, "Override root seed");

    DiagnoseArgs dargs;
    auto* diag = app.add_subcommand("diagnose", "Weight-moment, ARCH-LM and Lyapunov diagnostics");
    diag->add_option("--input", dargs.input, "CSV file");
    diag->add_option("--column", dargs.column, "Column name or 1-based index");
    diag->add_option("--transform", dargs.transform, "none | log_return");
    diag->add_option("--p", dargs.p, "AR order for the residuals");
    diag->add_option("--q", dargs.q, "MA order for the residuals");
    diag->add_option("--arch-lags", dargs.arch_lags, "ARCH-LM lags");
    diag->add_option("--rho", dargs.rho, "Decay in the weight-moment proxy");
    diag->add_option("--lyapunov", dargs.lyapunov, "GARCH(1,1) coefficients a,b");
    diag->add_option("--lyapunov-T", dargs.lyap_T, "Path length");
    diag->add_option("--lyapunov-reps", dargs.lyap_reps, "Independent paths");
    diag->add_option("--seed", dargs.seed, "Seed");
    diag->add_option("--format", dargs.format, "text | json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*test) return run_test(targs);
        if (*study) return run_study(sargs);
        if (*diag) return run_diagnose(dargs);
    } catch (const elport::FitFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
