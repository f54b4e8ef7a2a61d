#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "elport/classic_tests.hpp"
#include "elport/el_engine.hpp"
#include "elport/estimation.hpp"
#include "elport/mc_harness.hpp"
#include "elport/model_core.hpp"

namespace elport {

enum class Transform { none, log_return };

[[nodiscard]] inline std::string transform_name(Transform t) { return t == Transform::none ? "none" : "log_return"; }

[[nodiscard]] inline Transform parse_transform(const std::string& s) {
    if (s == "none" || s.empty()) return Transform::none;
    if (s == "log_return" || s == "log-return" || s == "logret") return Transform::log_return;
    throw std::invalid_argument("unknown transform '" + s + "' (expected none or log_return)");
}

/// ln(P_t / P_{t-1}); the result is one shorter. `rows` names the source row of each price for errors.
[[nodiscard]] inline std::vector<double> log_returns(const std::vector<double>& prices,
                                                     const std::vector<std::size_t>& rows = {}) {
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!(prices[i] > 0.0)) {
            const std::size_t row = rows.empty() ? i + 1 : rows[i];
            throw std::invalid_argument("row " + std::to_string(row) + ": nonpositive price " + fmt12(prices[i]) +
                                        " under log_return");
        }
    }
    std::vector<double> out;
    if (prices.size() < 2) return out;
    out.reserve(prices.size() - 1);
    for (std::size_t i = 1; i < prices.size(); ++i) out.push_back(std::log(prices[i] / prices[i - 1]));
    return out;
}

namespace detail {

inline std::string trim(std::string s) {
    auto blank = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), blank));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), blank).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') quoted = !quoted;
        if (ch == ',' && !quoted) {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    out.push_back(trim(cell));
    return out;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace detail

/**
 * @brief Read one numeric column from a CSV file.
 *
 * The first non-blank line is a header when the selected cell does not parse as
 * a number. `column` is a header name, a 1-based column index, or empty (the
 * only column, else the last one). Errors name the 1-based file line.
 */
[[nodiscard]] inline TimeSeries ingest_csv(const std::string& path, const std::string& column = "",
                                           Transform transform = Transform::none, std::size_t min_rows = 30) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open input file '" + path + "'");

    std::vector<std::pair<std::size_t, std::vector<std::string>>> lines;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        lines.emplace_back(lineno, detail::split_csv_line(line));
    }
    if (lines.empty()) throw std::invalid_argument("input file '" + path + "' has no data");

    const auto& first = lines.front().second;
    std::optional<std::size_t> col;
    bool header = false;
    if (!column.empty() && !detail::all_digits(column)) {
        const auto it = std::find(first.begin(), first.end(), column);
        if (it == first.end()) throw std::invalid_argument("column '" + column + "' not found in header");
        col = static_cast<std::size_t>(it - first.begin());
        header = true;
    } else if (!column.empty()) {
        const std::size_t idx = std::stoull(column);
        if (idx < 1) throw std::invalid_argument("column index is 1-based");
        col = idx - 1;
    } else {
        col = first.size() - 1;
    }
    if (*col >= first.size()) throw std::invalid_argument("column " + column + " not present");
    if (!header && !detail::parse_number(first[*col])) header = true;

    std::vector<double> values;
    std::vector<std::size_t> rows;
    for (std::size_t i = header ? 1 : 0; i < lines.size(); ++i) {
        const auto& [ln, cells] = lines[i];
        if (*col >= cells.size()) {
            throw std::invalid_argument("row " + std::to_string(ln) + ": missing column");
        }
        const auto v = detail::parse_number(cells[*col]);
        if (!v) {
            throw std::invalid_argument("row " + std::to_string(ln) + ": non-numeric value '" + cells[*col] + "'");
        }
        values.push_back(*v);
        rows.push_back(ln);
    }
    if (transform == Transform::log_return) values = log_returns(values, rows);
    if (values.size() < min_rows) {
        throw std::invalid_argument("need at least " + std::to_string(min_rows) + " observations after transform, got " +
                                    std::to_string(values.size()));
    }
    return TimeSeries(std::move(values));
}

// ---------------------------------------------------------------------------
// Test runner
// ---------------------------------------------------------------------------

enum class OutputFormat { text, json, csv };

[[nodiscard]] inline OutputFormat parse_format(const std::string& s) {
    if (s == "text") return OutputFormat::text;
    if (s == "json") return OutputFormat::json;
    if (s == "csv") return OutputFormat::csv;
    throw std::invalid_argument("unknown format '" + s + "' (expected text, json or csv)");
}

struct RunConfig {
    std::string input;
    std::string column;
    Transform transform = Transform::none;
    std::size_t p = 1;
    std::size_t q = 1;
    std::size_t m = 2;
    std::vector<Method> tests{Method::EL, Method::WeL, Method::LB};
    std::vector<double> levels{0.1, 0.05, 0.01};
    std::uint64_t seed = 1;
    std::size_t rw_B = 500;
    OutputFormat format = OutputFormat::text;

    void validate() const {
        if (tests.empty()) throw std::invalid_argument("select at least one test");
        if (m < 1) throw std::invalid_argument("m must be at least 1");
        for (double l : levels) {
            if (!(l > 0.0 && l < 1.0)) throw std::invalid_argument("levels must lie in (0, 1)");
        }
    }
};

class FitFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// * p < 0.1, ** p < 0.05, *** p < 0.01.
[[nodiscard]] inline std::string stars(double p) {
    if (!(p < 0.1)) return "";
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    return "*";
}

struct TestEntry {
    std::string name;
    std::size_t m = 0;
    std::optional<double> stat;
    std::optional<double> p_value;
    std::string error;

    [[nodiscard]] bool failed() const noexcept { return !error.empty(); }
};

struct ReportBundle {
    std::size_t n = 0;
    Transform transform = Transform::none;
    ArmaSpec theta;
    bool converged = false;
    std::vector<TestEntry> tests;
    std::vector<double> levels;
};

/// Fits ARMA(p, q) once and evaluates each selected test on that fit.
[[nodiscard]] inline ReportBundle run_tests(const RunConfig& cfg, const TimeSeries& x) {
    cfg.validate();
    ReportBundle out;
    out.n = x.size();
    out.transform = cfg.transform;
    out.levels = cfg.levels;
    FitResult fit;
    try {
        fit = ls_fit(x, cfg.p, cfg.q);
    } catch (const std::exception& e) {
        throw FitFailure(std::string("ARMA fit failed: ") + e.what());
    }
    if (!fit.converged) {
        throw FitFailure("ARMA fit did not converge (score norm " + fmt12(fit.score_norm) + ")");
    }
    out.theta = fit.theta_hat;
    out.converged = fit.converged;

    for (Method method : cfg.tests) {
        TestEntry e;
        e.name = method_name(method);
        e.m = cfg.m;
        try {
            switch (method) {
                case Method::BP:
                case Method::LB: {
                    const auto acf = residual_acf(fitted_residuals(x, fit.theta_hat), cfg.m);
                    const auto r = portmanteau(acf, method == Method::BP ? PortmanteauKind::BoxPierce : PortmanteauKind::LjungBox);
                    e.stat = r.stat;
                    e.p_value = r.p_value;
                    break;
                }
                case Method::RW: {
                    const auto r = rw_bootstrap_test(x, fit, cfg.m, cfg.rw_B, cfg.seed);
                    e.stat = r.report.stat;
                    e.p_value = r.report.p_value;
                    break;
                }
                case Method::EL:
                case Method::WeL: {
                    const auto r = profile_el_test(x, cfg.p, cfg.q, cfg.m, method == Method::EL ? ElMode::EL : ElMode::WeL, fit);
                    e.stat = r.stat;
                    e.p_value = r.p_value;
                    break;
                }
            }
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        out.tests.push_back(std::move(e));
    }
    return out;
}

[[nodiscard]] inline std::string render_json(const ReportBundle& b) {
    using nlohmann::json;
    auto num = [](const std::optional<double>& v) -> json {
        if (!v || !std::isfinite(*v)) return nullptr;
        return round12(*v);
    };
    std::vector<double> phi, psi;
    for (double v : b.theta.phi) phi.push_back(round12(v));
    for (double v : b.theta.psi) psi.push_back(round12(v));
    json tests = json::array();
    for (const auto& t : b.tests) {
        json entry = {{"name", t.name}, {"m", t.m}, {"stat", num(t.stat)}, {"p_value", num(t.p_value)}};
        entry["stars"] = t.p_value ? stars(*t.p_value) : "";
        entry["status"] = t.failed() ? "failed" : "ok";
        if (t.failed()) entry["error"] = t.error;
        json rejects = json::object();
        for (double l : b.levels) rejects[fmt12(l)] = t.p_value ? json(*t.p_value <= l) : json(nullptr);
        entry["reject"] = rejects;
        tests.push_back(entry);
    }
    json doc = {{"series", {{"n", b.n}, {"transform", transform_name(b.transform)}}},
                {"fit",
                 {{"theta", {{"mu", round12(b.theta.mu)}, {"phi", phi}, {"psi", psi}}},
                  {"p", b.theta.p()},
                  {"q", b.theta.q()},
                  {"converged", b.converged}}},
                {"tests", tests}};
    return doc.dump(2) + "\n";
}

[[nodiscard]] inline std::string render_csv(const ReportBundle& b) {
    std::ostringstream os;
    os << "name,m,stat,p_value,stars,status\n";
    for (const auto& t : b.tests) {
        os << t.name << ',' << t.m << ',' << (t.stat ? fmt12(*t.stat) : "") << ',' << (t.p_value ? fmt12(*t.p_value) : "")
           << ',' << (t.p_value ? stars(*t.p_value) : "") << ',' << (t.failed() ? "failed" : "ok") << '\n';
    }
    return os.str();
}

[[nodiscard]] inline std::string render_text(const ReportBundle& b) {
    std::ostringstream os;
    os << "series: n=" << b.n << " transform=" << transform_name(b.transform) << '\n';
    os << "fit: ARMA(" << b.theta.p() << "," << b.theta.q() << ") mu=" << fmt12(b.theta.mu);
    for (std::size_t i = 0; i < b.theta.p(); ++i) os << " phi" << i + 1 << "=" << fmt12(b.theta.phi[i]);
    for (std::size_t j = 0; j < b.theta.q(); ++j) os << " psi" << j + 1 << "=" << fmt12(b.theta.psi[j]);
    os << " converged=" << (b.converged ? "yes" : "no") << '\n';
    os << std::left << std::setw(6) << "test" << std::setw(4) << "m" << std::setw(20) << "stat" << std::setw(20) << "p_value"
       << "sig\n";
    for (const auto& t : b.tests) {
        os << std::setw(6) << t.name << std::setw(4) << t.m;
        if (t.failed()) {
            os << "failed: " << t.error << '\n';
            continue;
        }
        os << std::setw(20) << fmt12(*t.stat) << std::setw(20) << fmt12(*t.p_value) << stars(*t.p_value) << '\n';
    }
    os << "significance: * p<0.1, ** p<0.05, *** p<0.01\n";
    return os.str();
}

[[nodiscard]] inline std::string render(const ReportBundle& b, OutputFormat f) {
    switch (f) {
        case OutputFormat::json: return render_json(b);
        case OutputFormat::csv: return render_csv(b);
        case OutputFormat::text: return render_text(b);
    }
    return {};
}

}  // namespace elport
