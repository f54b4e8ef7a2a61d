#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "elport/classic_tests.hpp"
#include "elport/el_engine.hpp"
#include "elport/estimation.hpp"
#include "elport/model_core.hpp"
#include "elport/stats_util.hpp"

namespace elport {

enum class Method { RW, EL, WeL, BP, LB };

[[nodiscard]] inline std::string method_name(Method m) {
    switch (m) {
        case Method::RW: return "rw";
        case Method::EL: return "el";
        case Method::WeL: return "wel";
        case Method::BP: return "bp";
        case Method::LB: return "lb";
    }
    return "?";
}

[[nodiscard]] inline Method parse_method(const std::string& s) {
    std::string k(s);
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (k == "rw") return Method::RW;
    if (k == "el") return Method::EL;
    if (k == "wel") return Method::WeL;
    if (k == "bp") return Method::BP;
    if (k == "lb") return Method::LB;
    throw std::invalid_argument("unknown method '" + s + "' (expected rw, el, wel, bp or lb)");
}

/// 12 significant digits, the precision used in every CSV/JSON artifact.
[[nodiscard]] inline std::string fmt12(double v) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

[[nodiscard]] inline double round12(double v) {
    return std::isfinite(v) ? std::stod(fmt12(v)) : v;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    ArmaSpec arma;
    GarchSpec garch;
    std::vector<double> mus{0.0};
    std::vector<std::size_t> ns{400};
    std::vector<double> cs{0.0};
    std::size_t m = 2;
    std::size_t reps = 1000;
    std::vector<double> levels{0.1, 0.05};
    std::vector<Method> methods{Method::EL, Method::WeL};
    std::size_t bootstrap_B = 500;
    std::uint64_t root_seed = 1;
    std::size_t burn_in = 500;

    void validate() const {
        if (reps < 100) throw std::invalid_argument("ExperimentConfig: reps must be at least 100");
        if (m < 1) throw std::invalid_argument("ExperimentConfig: m must be at least 1");
        if (mus.empty() || ns.empty() || cs.empty()) throw std::invalid_argument("ExperimentConfig: empty grid");
        if (levels.empty() || methods.empty()) throw std::invalid_argument("ExperimentConfig: no levels or methods");
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(mus.begin(), mus.end(), finite) || !std::all_of(cs.begin(), cs.end(), finite)) {
            throw std::invalid_argument("ExperimentConfig: grid values must be finite");
        }
        for (double l : levels) {
            if (!(l > 0.0 && l < 1.0)) throw std::invalid_argument("ExperimentConfig: levels must lie in (0, 1)");
        }
        for (std::size_t n : ns) {
            if (n < 50) throw std::invalid_argument("ExperimentConfig: n must be at least 50");
        }
        if (!arma.finite()) throw std::invalid_argument("ExperimentConfig: ARMA parameters must be finite");
        garch.validate();
    }

    [[nodiscard]] std::size_t cell_count() const noexcept { return mus.size() * ns.size() * cs.size(); }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    nlohmann::json methods = nlohmann::json::array();
    for (auto m : c.methods) methods.push_back(method_name(m));
    j = {{"arma", {{"mu", c.arma.mu}, {"phi", c.arma.phi}, {"psi", c.arma.psi}}},
         {"garch", {{"omega", c.garch.omega}, {"a", c.garch.a}, {"b", c.garch.b}}},
         {"mus", c.mus},
         {"ns", c.ns},
         {"cs", c.cs},
         {"m", c.m},
         {"reps", c.reps},
         {"levels", c.levels},
         {"methods", methods},
         {"bootstrap_B", c.bootstrap_B},
         {"root_seed", c.root_seed},
         {"burn_in", c.burn_in}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    if (j.contains("arma")) {
        const auto& a = j.at("arma");
        c.arma.mu = a.value("mu", 0.0);
        c.arma.phi = a.value("phi", std::vector<double>{});
        c.arma.psi = a.value("psi", std::vector<double>{});
    }
    if (j.contains("garch")) {
        const auto& g = j.at("garch");
        c.garch.omega = g.value("omega", 1.0);
        c.garch.a = g.value("a", std::vector<double>{});
        c.garch.b = g.value("b", std::vector<double>{});
    }
    c.mus = j.value("mus", c.mus);
    c.ns = j.value("ns", c.ns);
    c.cs = j.value("cs", c.cs);
    c.m = j.value("m", c.m);
    c.reps = j.value("reps", c.reps);
    c.levels = j.value("levels", c.levels);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& s : j.at("methods")) c.methods.push_back(parse_method(s.get<std::string>()));
    }
    c.bootstrap_B = j.value("bootstrap_B", c.bootstrap_B);
    c.root_seed = j.value("root_seed", c.root_seed);
    c.burn_in = j.value("burn_in", c.burn_in);
}

[[nodiscard]] inline ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig cfg = nlohmann::json::parse(text).get<ExperimentConfig>();
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Rows
// ---------------------------------------------------------------------------

struct ExperimentRow {
    double mu = 0.0;
    std::size_t n = 0;
    double c = 0.0;
    std::string method;
    double level = 0.0;
    std::size_t rejections = 0;
    std::size_t reps_completed = 0;
    std::size_t failures = 0;

    [[nodiscard]] double rejection_rate() const noexcept {
        return reps_completed == 0 ? 0.0 : static_cast<double>(rejections) / static_cast<double>(reps_completed);
    }
    /// Failures reach 5% of the replications that entered the row.
    [[nodiscard]] bool flagged() const noexcept { return 20 * failures >= std::max<std::size_t>(reps_completed, 1); }

    bool operator==(const ExperimentRow&) const = default;
};

/// Per grid cell: the test statistics of completed replications, in replication order.
struct CellSamples {
    double mu = 0.0;
    std::size_t n = 0;
    double c = 0.0;
    std::map<std::string, std::vector<double>> stats;
    std::map<std::string, std::vector<double>> p_values;
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    std::vector<CellSamples> cells;
};

/// Worker count: ELPORT_WORKERS if set to a positive integer, else the hardware concurrency.
[[nodiscard]] inline unsigned default_workers() {
    if (const char* env = std::getenv("ELPORT_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

namespace detail {

enum class Outcome : std::uint8_t { ok, infeasible, failed };

struct MethodOutcome {
    Outcome status = Outcome::failed;
    double stat = 0.0;
    double p_value = 1.0;
};

struct ReplicationOutcome {
    bool fit_failed = false;
    std::vector<MethodOutcome> methods;
};

inline ReplicationOutcome run_replication(const ExperimentConfig& cfg, double mu, std::size_t n, double c,
                                          std::uint64_t cell, std::uint64_t rep) {
    ReplicationOutcome out;
    out.methods.resize(cfg.methods.size());
    DgpConfig dgp;
    dgp.arma = cfg.arma;
    dgp.arma.mu = mu;
    dgp.garch = cfg.garch;
    dgp.c = c;
    dgp.n = n;
    dgp.burn_in = cfg.burn_in;
    dgp.seed = derive_seed(cfg.root_seed, {cell, rep, 0});

    std::optional<TimeSeries> x;
    std::optional<FitResult> fit;
    try {
        x = simulate(dgp);
        fit = ls_fit(*x, cfg.arma.p(), cfg.arma.q());
    } catch (const std::exception&) {
        out.fit_failed = true;
        return out;
    }
    if (!fit->converged) {
        out.fit_failed = true;
        return out;
    }

    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
        auto& mo = out.methods[k];
        try {
            switch (cfg.methods[k]) {
                case Method::EL:
                case Method::WeL: {
                    const auto mode = cfg.methods[k] == Method::EL ? ElMode::EL : ElMode::WeL;
                    const auto r = profile_el_test(*x, cfg.arma.p(), cfg.arma.q(), cfg.m, mode, fit);
                    mo = {Outcome::ok, r.stat, r.p_value};
                    break;
                }
                case Method::RW: {
                    const auto r = rw_bootstrap_test(*x, *fit, cfg.m, cfg.bootstrap_B, derive_seed(cfg.root_seed, {cell, rep, 1}));
                    mo = {Outcome::ok, r.report.stat, r.report.p_value};
                    break;
                }
                case Method::BP:
                case Method::LB: {
                    const auto acf = residual_acf(fitted_residuals(*x, fit->theta_hat), cfg.m);
                    const auto r = portmanteau(acf, cfg.methods[k] == Method::BP ? PortmanteauKind::BoxPierce
                                                                                   : PortmanteauKind::LjungBox);
                    mo = {Outcome::ok, r.stat, r.p_value};
                    break;
                }
            }
        } catch (const ElInfeasible&) {
            mo.status = Outcome::infeasible;
        } catch (const std::exception&) {
            mo.status = Outcome::failed;
        }
    }
    return out;
}

}  // namespace detail

/**
 * @brief Size/power grid. Replication r of cell k simulates with seed
 * derive_seed(root, {k, r, 0}); the bootstrap uses {k, r, 1}. Results are
 * reduced in (cell, replication) order, so the output does not depend on the
 * worker count.
 *
 * Failure policy: simulation or fit failures leave the denominator; an
 * infeasible EL replication counts as a non-rejection; any other method error
 * leaves that method's denominator. All three are tallied in `failures`.
 */
[[nodiscard]] inline ExperimentResult run_experiment_detailed(const ExperimentConfig& cfg, unsigned workers = 0) {
    cfg.validate();
    if (workers == 0) workers = default_workers();

    struct Cell {
        double mu;
        std::size_t n;
        double c;
    };
    std::vector<Cell> cells;
    for (double mu : cfg.mus)
        for (std::size_t n : cfg.ns)
            for (double c : cfg.cs) cells.push_back({mu, n, c});

    const std::size_t jobs = cells.size() * cfg.reps;
    std::vector<detail::ReplicationOutcome> outcomes(jobs);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t j = next.fetch_add(1); j < jobs; j = next.fetch_add(1)) {
            const std::size_t k = j / cfg.reps, r = j % cfg.reps;
            outcomes[j] = detail::run_replication(cfg, cells[k].mu, cells[k].n, cells[k].c, k, r);
        }
    };
    const unsigned used = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(jobs, 1)));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < used; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    ExperimentResult res;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        CellSamples samples{cells[k].mu, cells[k].n, cells[k].c, {}, {}};
        std::size_t fit_failures = 0;
        for (std::size_t r = 0; r < cfg.reps; ++r) fit_failures += outcomes[k * cfg.reps + r].fit_failed ? 1 : 0;
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            const std::string name = method_name(cfg.methods[mi]);
            auto& stats = samples.stats[name];
            auto& pvals = samples.p_values[name];
            std::size_t completed = 0, failures = fit_failures;
            std::vector<std::size_t> rejections(cfg.levels.size(), 0);
            for (std::size_t r = 0; r < cfg.reps; ++r) {
                const auto& o = outcomes[k * cfg.reps + r];
                if (o.fit_failed) continue;
                const auto& mo = o.methods[mi];
                if (mo.status == detail::Outcome::failed) {
                    ++failures;
                    continue;
                }
                ++completed;
                if (mo.status == detail::Outcome::infeasible) {
                    ++failures;
                    continue;
                }
                stats.push_back(mo.stat);
                pvals.push_back(mo.p_value);
                for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
                    if (mo.p_value <= cfg.levels[li]) ++rejections[li];
                }
            }
            for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
                res.rows.push_back({cells[k].mu, cells[k].n, cells[k].c, name, cfg.levels[li], rejections[li], completed, failures});
            }
        }
        res.cells.push_back(std::move(samples));
    }
    return res;
}

[[nodiscard]] inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg, unsigned workers = 0) {
    return run_experiment_detailed(cfg, workers).rows;
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

struct TableArtifact {
    std::string text;
    std::string csv;
    std::string json;
};

inline constexpr const char* kRowsCsvHeader = "mu,n,c,method,level,rate,reps,failures";

[[nodiscard]] inline std::string rows_to_csv(const std::vector<ExperimentRow>& rows) {
    std::ostringstream os;
    os << kRowsCsvHeader << '\n';
    for (const auto& r : rows) {
        os << fmt12(r.mu) << ',' << r.n << ',' << fmt12(r.c) << ',' << r.method << ',' << fmt12(r.level) << ','
           << fmt12(r.rejection_rate()) << ',' << r.reps_completed << ',' << r.failures << '\n';
    }
    return os.str();
}

namespace detail {

inline std::size_t count_from_rate(double rate, std::size_t reps) {
    return static_cast<std::size_t>(std::llround(rate * static_cast<double>(reps)));
}

}  // namespace detail

[[nodiscard]] inline std::vector<ExperimentRow> rows_from_csv(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line) || line != kRowsCsvHeader) {
        throw std::invalid_argument("rows_from_csv: unexpected header");
    }
    std::vector<ExperimentRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 8) throw std::invalid_argument("rows_from_csv: wrong field count on line " + std::to_string(lineno));
        ExperimentRow r;
        r.mu = std::stod(f[0]);
        r.n = std::stoull(f[1]);
        r.c = std::stod(f[2]);
        r.method = f[3];
        r.level = std::stod(f[4]);
        r.reps_completed = std::stoull(f[6]);
        r.failures = std::stoull(f[7]);
        r.rejections = detail::count_from_rate(std::stod(f[5]), r.reps_completed);
        rows.push_back(std::move(r));
    }
    return rows;
}

[[nodiscard]] inline nlohmann::json rows_to_json_value(const std::vector<ExperimentRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"mu", round12(r.mu)},
                       {"n", r.n},
                       {"c", round12(r.c)},
                       {"method", r.method},
                       {"level", round12(r.level)},
                       {"rate", round12(r.rejection_rate())},
                       {"rejections", r.rejections},
                       {"reps", r.reps_completed},
                       {"failures", r.failures},
                       {"flagged", r.flagged()}});
    }
    return arr;
}

[[nodiscard]] inline std::vector<ExperimentRow> rows_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const auto& arr = j.is_array() ? j : j.at("rows");
    std::vector<ExperimentRow> rows;
    for (const auto& e : arr) {
        ExperimentRow r;
        r.mu = e.at("mu").get<double>();
        r.n = e.at("n").get<std::size_t>();
        r.c = e.at("c").get<double>();
        r.method = e.at("method").get<std::string>();
        r.level = e.at("level").get<double>();
        r.reps_completed = e.at("reps").get<std::size_t>();
        r.failures = e.at("failures").get<std::size_t>();
        r.rejections = e.contains("rejections") ? e.at("rejections").get<std::size_t>()
                                                : detail::count_from_rate(e.at("rate").get<double>(), r.reps_completed);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace detail {

// Rows (mu, n, c) in first-seen order; columns level x method, levels descending as in the published tables.
inline std::string text_table(const std::vector<ExperimentRow>& rows, const std::string& title) {
    std::vector<double> levels;
    std::vector<std::string> methods;
    std::vector<std::tuple<double, std::size_t, double>> keys;
    for (const auto& r : rows) {
        if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) levels.push_back(r.level);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        const auto key = std::make_tuple(r.mu, r.n, r.c);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    std::sort(levels.begin(), levels.end(), std::greater<>());

    std::ostringstream os;
    if (!title.empty()) os << title << '\n';
    os << std::setw(8) << "mu" << std::setw(7) << "n" << std::setw(6) << "c";
    for (double l : levels) {
        os << " |";
        for (const auto& m : methods) os << std::setw(9) << (m + "@" + fmt12(l));
    }
    os << '\n';
    bool any_flag = false;
    for (const auto& [mu, n, c] : keys) {
        os << std::setw(8) << fmt12(mu) << std::setw(7) << n << std::setw(6) << fmt12(c);
        for (double l : levels) {
            os << " |";
            for (const auto& m : methods) {
                auto it = std::find_if(rows.begin(), rows.end(), [&](const ExperimentRow& r) {
                    return r.mu == mu && r.n == n && r.c == c && r.method == m && r.level == l;
                });
                if (it == rows.end()) {
                    os << std::setw(9) << "-";
                    continue;
                }
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(3) << it->rejection_rate() << (it->flagged() ? "!" : "");
                any_flag = any_flag || it->flagged();
                os << std::setw(9) << cell.str();
            }
        }
        os << '\n';
    }
    if (any_flag) os << "! failures reached 5% of the replications in this cell\n";
    return os.str();
}

}  // namespace detail

/// Text table, CSV and JSON summary for one (GARCH, m) block of rows.
[[nodiscard]] inline TableArtifact summarize(const std::vector<ExperimentRow>& rows,
                                             const ExperimentConfig* cfg = nullptr) {
    if (rows.empty()) throw std::invalid_argument("summarize: no rows");
    std::string title;
    nlohmann::json summary;
    if (cfg) {
        std::ostringstream t;
        t << "GARCH(a=";
        for (std::size_t i = 0; i < cfg->garch.a.size(); ++i) t << (i ? "," : "") << fmt12(cfg->garch.a[i]);
        t << "; b=";
        for (std::size_t i = 0; i < cfg->garch.b.size(); ++i) t << (i ? "," : "") << fmt12(cfg->garch.b[i]);
        t << ")  m=" << cfg->m << "  reps=" << cfg->reps;
        title = t.str();
        summary["config"] = *cfg;
    }
    summary["rows"] = rows_to_json_value(rows);
    return {detail::text_table(rows, title), rows_to_csv(rows), summary.dump(2) + "\n"};
}

}  // namespace elport
