#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elport/classic_tests.hpp"
#include "elport/el_engine.hpp"
#include "elport/model_core.hpp"
#include "elport/rng.hpp"
#include "elport/stats_util.hpp"

namespace elport {

// ---------------------------------------------------------------------------
// Lyapunov exponent of the GARCH companion product
// ---------------------------------------------------------------------------

struct LyapunovEstimate {
    double nu_star_hat = 0.0;
    double std_err = 0.0;
    std::size_t T = 0;
    std::size_t reps = 0;
    /// Per-path estimates (1/T) ln |A_T ... A_1 e_1|.
    std::vector<double> paths;
};

class LyapunovOverflow : public std::runtime_error {
public:
    LyapunovOverflow(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

namespace detail {

/**
 * Companion matrix of dimension r + s - 1 acting on
 * (sigma^2_t, ..., sigma^2_{t-s+1}, eps^2_{t-1}, ..., eps^2_{t-r+1}).
 * First row: (a_1 eta^2 + b_1, b_2..b_s, a_2..a_r); sub-diagonal shift inside the
 * sigma block; eta^2 feeds the first slot of the eps block; shift inside that block.
 * Empty a or b is padded with a single zero.
 */
class GarchCompanion {
public:
    explicit GarchCompanion(const GarchSpec& g) : a_(g.a), b_(g.b) {
        if (a_.empty() && b_.empty()) {
            throw std::invalid_argument("lyapunov_exponent: GARCH spec has no ARCH or GARCH terms");
        }
        if (a_.empty()) a_.assign(1, 0.0);
        if (b_.empty()) b_.assign(1, 0.0);
        r_ = a_.size();
        s_ = b_.size();
        dim_ = static_cast<Eigen::Index>(r_ + s_ - 1);
        base_ = Eigen::MatrixXd::Zero(dim_, dim_);
        for (std::size_t j = 1; j < s_; ++j) base_(0, static_cast<Eigen::Index>(j)) = b_[j];
        for (std::size_t i = 1; i < r_; ++i) base_(0, static_cast<Eigen::Index>(s_ - 1 + i)) = a_[i];
        for (std::size_t j = 1; j < s_; ++j) base_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1)) = 1.0;
        for (std::size_t i = 2; i < r_; ++i) {
            base_(static_cast<Eigen::Index>(s_ - 1 + i), static_cast<Eigen::Index>(s_ - 2 + i)) = 1.0;
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
    [[nodiscard]] double lead(double eta2) const noexcept { return a_[0] * eta2 + b_[0]; }

    [[nodiscard]] Eigen::MatrixXd at(double eta2) const {
        Eigen::MatrixXd m = base_;
        m(0, 0) = lead(eta2);
        if (r_ > 1) m(static_cast<Eigen::Index>(s_), 0) = eta2;
        return m;
    }

private:
    std::vector<double> a_, b_;
    std::size_t r_ = 0, s_ = 0;
    Eigen::Index dim_ = 0;
    Eigen::MatrixXd base_;
};

// One path: log |A_T ... A_1 e_1| / T, with a QR renormalization every `period` steps.
// Sum of log |R_11| over the blocks equals log |P e_1| exactly, so the result does
// not depend on the period beyond rounding.
inline double lyapunov_path(const GarchCompanion& comp, std::size_t T, std::uint64_t seed, std::size_t period) {
    Rng rng(seed);
    const Eigen::Index d = comp.dim();
    if (d == 1) {
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double eta = rng.normal();
            const double v = comp.lead(eta * eta);
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw LyapunovOverflow("lyapunov_exponent: degenerate factor at step " + std::to_string(t + 1), t + 1);
            }
            acc += std::log(v);
        }
        return acc / static_cast<double>(T);
    }
    Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(d, d);
    double acc = 0.0;
    std::size_t since = 0;
    auto renormalize = [&](std::size_t step) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(frame);
        const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
        const double lead = std::abs(r(0, 0));
        if (!(lead > 0.0) || !std::isfinite(lead)) {
            throw LyapunovOverflow("lyapunov_exponent: overflow at step " + std::to_string(step), step);
        }
        acc += std::log(lead);
        // Keep the orthonormal factor with signs fixed so the first column tracks P e_1.
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            if (r(i, i) < 0.0) q.col(i) = -q.col(i);
        }
        frame = q;
        since = 0;
    };
    for (std::size_t t = 0; t < T; ++t) {
        const double eta = rng.normal();
        frame = comp.at(eta * eta) * frame;
        if (!frame.allFinite()) {
            throw LyapunovOverflow("lyapunov_exponent: overflow at step " + std::to_string(t + 1), t + 1);
        }
        if (++since >= period) renormalize(t + 1);
    }
    if (since > 0) renormalize(T);
    return acc / static_cast<double>(T);
}

}  // namespace detail

/**
 * @brief Monte Carlo top Lyapunov exponent of the GARCH companion matrices A_t
 * with eta_t i.i.d. N(0,1). Path k uses seed derive_seed(seed, {k}).
 *
 * std_err is the standard deviation of the path estimates over sqrt(reps); it
 * is exactly 0 when the coefficients make A_t deterministic.
 */
[[nodiscard]] inline LyapunovEstimate lyapunov_exponent(const GarchSpec& garch, std::size_t T, std::size_t reps,
                                                        std::uint64_t seed, std::size_t renorm_period = 50) {
    garch.validate();
    if (T < 1000) throw std::invalid_argument("lyapunov_exponent: need T >= 1000");
    if (reps < 10) throw std::invalid_argument("lyapunov_exponent: need reps >= 10");
    if (renorm_period < 1) throw std::invalid_argument("lyapunov_exponent: renormalization period must be positive");
    const detail::GarchCompanion comp(garch);

    LyapunovEstimate out;
    out.T = T;
    out.reps = reps;
    out.paths.resize(reps);
    for (std::size_t k = 0; k < reps; ++k) {
        out.paths[k] = detail::lyapunov_path(comp, T, derive_seed(seed, {static_cast<std::uint64_t>(k)}), renorm_period);
    }
    double mean = 0.0;
    for (double v : out.paths) mean += v;
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (double v : out.paths) ss += (v - mean) * (v - mean);
    out.nu_star_hat = mean;
    out.std_err = std::sqrt(ss / static_cast<double>(reps - 1)) / std::sqrt(static_cast<double>(reps));
    return out;
}

// ---------------------------------------------------------------------------
// Weight-moment proxy
// ---------------------------------------------------------------------------

struct XiSeries {
    /// xi_{rho,t} for t = 1..n (index 0 holds t = 1).
    std::vector<double> xi;
    double rho = 0.95;
};

/// xi_{rho,t} = 1 + sum_{i=1}^{t-1} rho^i |X_{t-i}|, truncated at the available history.
[[nodiscard]] inline XiSeries xi_series(const TimeSeries& x, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("xi_series: rho must lie in (0, 1)");
    XiSeries out;
    out.rho = rho;
    out.xi.resize(x.size());
    double tail = 0.0;  // sum_{i>=1} rho^i |X_{t-i}|
    for (std::size_t t = 0; t < x.size(); ++t) {
        out.xi[t] = 1.0 + tail;
        tail = rho * (std::abs(x[t]) + tail);
    }
    return out;
}

namespace detail {

inline std::vector<double> weight_moment_terms(const TimeSeries& x, const SelfWeights& w, double rho, double delta) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("weight_moment_check: rho must lie in (0, 1)");
    if (!(delta > 0.0)) throw std::invalid_argument("weight_moment_check: delta must be positive");
    if (w.size() != x.size()) throw std::invalid_argument("weight_moment_check: weights do not match the series");
    if (x.empty()) throw std::invalid_argument("weight_moment_check: empty series");
    const auto xi = xi_series(x, rho);
    std::vector<double> terms(x.size());
    for (std::size_t s = 0; s < x.size(); ++s) {
        const double ws = w.w[s];
        if (!(ws > 0.0)) throw std::invalid_argument("weight_moment_check: nonpositive weight");
        terms[s] = std::pow(xi.xi[s], 4.0 + delta) / std::pow(ws, 4.0);
    }
    return terms;
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double e : v) s += e;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Sample mean of w_s^{-4} xi_{rho,s}^{4+delta} over s = 1..n (the lagged terms of the moment condition).
[[nodiscard]] inline double weight_moment_check(const TimeSeries& x, const SelfWeights& w, double rho = 0.95,
                                                double delta = 0.05) {
    return detail::mean_of(detail::weight_moment_terms(x, w, rho, delta));
}

struct WeightMomentReport {
    double value = 0.0;
    double last_half = 0.0;
    /// |last_half - value| <= 0.2 * value.
    bool stable = true;
};

[[nodiscard]] inline WeightMomentReport weight_moment_report(const TimeSeries& x, const SelfWeights& w,
                                                             double rho = 0.95, double delta = 0.05) {
    const auto terms = detail::weight_moment_terms(x, w, rho, delta);
    WeightMomentReport r;
    r.value = detail::mean_of(terms);
    const std::size_t half = terms.size() / 2;
    r.last_half = detail::mean_of(std::span<const double>(terms).subspan(half));
    r.stable = std::abs(r.last_half - r.value) <= 0.2 * std::abs(r.value);
    return r;
}

// ---------------------------------------------------------------------------
// ARCH-LM
// ---------------------------------------------------------------------------

/// Regress eps_t^2 on (1, eps_{t-1}^2..eps_{t-L}^2); stat = N * R^2 with N regression rows, chi2(L).
[[nodiscard]] inline TestReport arch_lm(std::span<const double> eps, std::size_t lags) {
    if (lags < 1) throw std::invalid_argument("arch_lm: lags must be at least 1");
    if (eps.size() <= 10 * lags) throw std::invalid_argument("arch_lm: need more than 10 * lags observations");
    const auto rows = static_cast<Eigen::Index>(eps.size() - lags);
    const auto k = static_cast<Eigen::Index>(lags + 1);
    Eigen::MatrixXd design(rows, k);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = lags + static_cast<std::size_t>(r);
        y(r) = eps[t] * eps[t];
        design(r, 0) = 1.0;
        for (std::size_t l = 1; l <= lags; ++l) design(r, static_cast<Eigen::Index>(l)) = eps[t - l] * eps[t - l];
    }
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).square().sum();
    if (!(sst > 1e-300) || !(sst > 1e-24 * y.squaredNorm())) {
        throw std::invalid_argument("arch_lm: zero-variance regressand");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < k) throw std::invalid_argument("arch_lm: collinear design");
    const Eigen::VectorXd coef = qr.solve(y);
    const double ssr = (y - design * coef).squaredNorm();
    const double r2 = std::max(0.0, 1.0 - ssr / sst);
    const double stat = static_cast<double>(rows) * r2;
    return TestReport::make("arch_lm", lags, stat, chi2_sf(stat, static_cast<int>(lags)));
}

}  // namespace elport
