#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elport/estimation.hpp"
#include "elport/model_core.hpp"
#include "elport/nelder_mead.hpp"
#include "elport/stats_util.hpp"

namespace elport {

// ---------------------------------------------------------------------------
// Self-weights
// ---------------------------------------------------------------------------

/**
 * @brief Causal weights w_t = max{M_X, sum_{i=0}^{t-1} exp(-ln^2(i+1)) |X_{t-i}|}, t = 1..n,
 * where M_X is a sample quantile of |X|.
 *
 * w holds w_1..w_n; at(0) returns M_X, the value used for lags that reach
 * before the sample.
 */
struct SelfWeights {
    std::vector<double> w;
    double m_x = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return w.size(); }
    /// 1-based access with w_0 = M_X.
    [[nodiscard]] double at(std::size_t t) const { return t == 0 ? m_x : w[t - 1]; }

    [[nodiscard]] static SelfWeights unit(std::size_t n) {
        SelfWeights s;
        s.w.assign(n, 1.0);
        s.m_x = 1.0;
        return s;
    }
};

[[nodiscard]] inline SelfWeights self_weights(const TimeSeries& x, double quantile_level = 0.9) {
    if (x.empty()) {
        throw std::invalid_argument("self_weights: empty series");
    }
    if (!(quantile_level > 0.0 && quantile_level < 1.0)) {
        throw std::invalid_argument("self_weights: quantile level must lie in (0, 1)");
    }
    const std::size_t n = x.size();
    std::vector<double> abs_x(n);
    std::transform(x.values().begin(), x.values().end(), abs_x.begin(), [](double v) { return std::abs(v); });

    SelfWeights out;
    out.m_x = empirical_quantile(abs_x, quantile_level);
    if (!(out.m_x > 0.0)) {
        throw std::invalid_argument("self_weights: degenerate series: M_X = 0 violates inf w_t > 0");
    }
    std::vector<double> kernel(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = std::log(static_cast<double>(i + 1));
        kernel[i] = std::exp(-l * l);
    }
    out.w.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        for (std::size_t i = 0; i <= t; ++i) s += kernel[i] * abs_x[t - i];
        out.w[t] = std::max(out.m_x, s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Moment vectors
// ---------------------------------------------------------------------------

enum class MomentMode { unweighted, weighted };

/**
 * @brief Auxiliary vectors evaluated at gamma = 0, one row per t = m+1..n:
 *   (eps_t d eps_t/d theta^T, eps_t eps_{t-1}, ..., eps_t eps_{t-m}).
 *
 * In weighted mode the score block carries w_{t-1}^{-2} and the lag-l product
 * w_{t-1}^{-1} w_{t-1-l}^{-1}.
 */
struct MomentMatrix {
    RowMatrix rows;
    MomentMode mode = MomentMode::unweighted;
    std::size_t m = 0;

    [[nodiscard]] std::size_t count() const noexcept { return static_cast<std::size_t>(rows.rows()); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(rows.cols()); }
};

[[nodiscard]] inline MomentMatrix moment_vectors(const ResidualPack& pack, std::size_t m,
                                                 const SelfWeights* weights = nullptr) {
    const std::size_t n = pack.size();
    const std::size_t k = pack.dim();
    if (m < 1) {
        throw std::invalid_argument("moment_vectors: m must be at least 1");
    }
    const std::size_t d = k + m;
    if (n <= m || n - m <= d) {
        throw std::invalid_argument("moment_vectors: insufficient sample for m lags");
    }
    if (weights && weights->size() != n) {
        throw std::invalid_argument("moment_vectors: weights length does not match the residuals");
    }
    MomentMatrix out;
    out.m = m;
    out.mode = weights ? MomentMode::weighted : MomentMode::unweighted;
    out.rows.resize(static_cast<Eigen::Index>(n - m), static_cast<Eigen::Index>(d));

    const double* eps = pack.eps.data();
    const double* g = pack.grad.data();
    for (std::size_t t = m; t < n; ++t) {
        double* row = out.rows.data() + (t - m) * d;
        const double* gt = g + t * k;
        // 1-based time is t + 1, so w_{t-1} in 1-based terms is at(t).
        const double w_prev = weights ? weights->at(t) : 1.0;
        const double score_factor = weights ? 1.0 / (w_prev * w_prev) : 1.0;
        for (std::size_t c = 0; c < k; ++c) row[c] = score_factor * eps[t] * gt[c];
        for (std::size_t l = 1; l <= m; ++l) {
            const double factor = weights ? 1.0 / (w_prev * weights->at(t - l)) : 1.0;
            row[k + l - 1] = factor * eps[t] * eps[t - l];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inner dual problem
// ---------------------------------------------------------------------------

struct DualOptions {
    int max_iterations = 100;
    double gradient_tol = 1e-9;
    double min_step = 1e-14;
    double armijo_c = 1e-4;
    /// Growth of 1 + lambda'Z beyond this level is taken as divergence (0 outside the hull).
    double divergence_level = 1e12;
};

struct DualResult {
    Eigen::VectorXd lambda;
    double neg2log = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity();
    bool feasible = false;
    int iterations = 0;
};

class DualNonConvergence : public std::runtime_error {
public:
    explicit DualNonConvergence(double residual)
        : std::runtime_error("dual_solve: no convergence, residual " + std::to_string(residual)), residual_(residual) {}
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

namespace detail {

// Logarithm continued below `floor` by its second-order Taylor expansion, so the
// dual objective is concave and finite on all of R^d.
struct PseudoLog {
    double floor;
    double log_floor;

    explicit PseudoLog(double f) : floor(f), log_floor(std::log(f)) {}

    [[nodiscard]] double value(double a) const noexcept {
        if (a >= floor) return std::log(a);
        const double r = a / floor;
        return log_floor - 1.5 + 2.0 * r - 0.5 * r * r;
    }
    [[nodiscard]] double d1(double a) const noexcept { return a >= floor ? 1.0 / a : (2.0 - a / floor) / floor; }
    [[nodiscard]] double d2(double a) const noexcept { return a >= floor ? -1.0 / (a * a) : -1.0 / (floor * floor); }
};

}  // namespace detail

/**
 * @brief Maximizes sum_t log(1 + lambda'Z_t) by damped Newton from lambda = 0.
 *
 * Newton iterations run on the pseudo-logarithm (log continued quadratically below
 * 1/N), which has the same maximizer whenever 0 is interior to the convex hull of
 * the rows; the returned lambda then satisfies 1 + lambda'Z_t >= 1/N for every row.
 * Otherwise the objective is unbounded, or its maximizer leaves the 1/N floor, and
 * the result is feasible = false with neg2log = +inf.
 */
template <class Derived>
[[nodiscard]] DualResult dual_solve(const Eigen::MatrixBase<Derived>& z, const DualOptions& opts = {}) {
    const auto n_rows = z.rows();
    const auto d = z.cols();
    if (n_rows == 0 || d == 0) {
        throw std::invalid_argument("dual_solve: empty moment matrix");
    }
    if (!z.allFinite()) {
        throw std::invalid_argument("dual_solve: non-finite moment matrix");
    }
    const detail::PseudoLog plog(1.0 / static_cast<double>(n_rows));

    DualResult res;
    res.lambda = Eigen::VectorXd::Zero(d);
    auto infeasible = [&](double residual, int iterations) {
        DualResult r;
        r.lambda = res.lambda;
        r.residual = residual;
        r.iterations = iterations;
        return r;
    };

    // A column of one strict sign puts 0 outside the hull.
    for (Eigen::Index j = 0; j < d; ++j) {
        const auto col = z.col(j);
        if (col.minCoeff() > 0.0 || col.maxCoeff() < 0.0) {
            return infeasible(std::numeric_limits<double>::infinity(), 0);
        }
    }

    Eigen::VectorXd arg = Eigen::VectorXd::Ones(n_rows);
    Eigen::VectorXd first(n_rows), curvature(n_rows), trial_arg(n_rows);
    Eigen::VectorXd grad(d);
    Eigen::MatrixXd info(d, d);
    double value = 0.0;

    auto objective = [&](const Eigen::VectorXd& a) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < n_rows; ++t) s += plog.value(a(t));
        return s;
    };
    auto refresh_gradient = [&]() {
        for (Eigen::Index t = 0; t < n_rows; ++t) first(t) = plog.d1(arg(t));
        grad.noalias() = z.transpose() * first;
    };
    // Sum of |Z_tj| / a_t: the rounding scale of the gradient sum.
    auto gradient_scale = [&]() {
        double s = 0.0;
        for (Eigen::Index t = 0; t < n_rows; ++t) s += z.row(t).cwiseAbs().maxCoeff() * std::abs(first(t));
        return s;
    };
    auto finish = [&](double gnorm, int iterations) {
        if (arg.minCoeff() < plog.floor) {
            return infeasible(gnorm, iterations);
        }
        // Implied weights 1/(N a_t) sum to one at a genuine solution; a run-away
        // lambda (origin outside the hull) flattens the gradient without that.
        const double mass = arg.cwiseInverse().sum() / static_cast<double>(n_rows);
        if (!(std::abs(mass - 1.0) <= 1e-6)) {
            return infeasible(gnorm, iterations);
        }
        res.residual = gnorm;
        res.feasible = true;
        res.iterations = iterations;
        res.neg2log = std::max(0.0, 2.0 * arg.array().log().sum());
        return res;
    };

    refresh_gradient();
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const double gnorm = grad.lpNorm<Eigen::Infinity>();
        if (gnorm < opts.gradient_tol) {
            return finish(gnorm, iter);
        }

        for (Eigen::Index t = 0; t < n_rows; ++t) curvature(t) = std::sqrt(-plog.d2(arg(t)));
        const Eigen::MatrixXd scaled = curvature.asDiagonal() * z;
        info.setZero();
        info.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
        info = info.selfadjointView<Eigen::Lower>();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd dir = ldlt.solve(grad);
        if (ldlt.info() != Eigen::Success || !dir.allFinite() || grad.dot(dir) <= 0.0) {
            dir = grad;
        }

        const double slope = grad.dot(dir);
        const double gain_floor = 64.0 * std::numeric_limits<double>::epsilon() *
                                  (static_cast<double>(n_rows) + std::abs(value));
        if (0.5 * slope < gain_floor) {
            // The objective can no longer resolve the predicted gain; judge the full
            // Newton step by the gradient norm instead.
            const Eigen::VectorXd trial = res.lambda + dir;
            trial_arg.noalias() = z * trial;
            trial_arg.array() += 1.0;
            Eigen::VectorXd trial_first(n_rows);
            for (Eigen::Index t = 0; t < n_rows; ++t) trial_first(t) = plog.d1(trial_arg(t));
            const Eigen::VectorXd trial_grad = z.transpose() * trial_first;
            if (trial_grad.lpNorm<Eigen::Infinity>() < gnorm) {
                res.lambda = trial;
                arg = trial_arg;
                value = objective(arg);
                refresh_gradient();
                continue;
            }
            return finish(gnorm, iter);
        }
        double step = 1.0;
        bool accepted = false;
        while (step >= opts.min_step) {
            const Eigen::VectorXd trial = res.lambda + step * dir;
            trial_arg.noalias() = z * trial;
            trial_arg.array() += 1.0;
            const double trial_value = objective(trial_arg);
            if (std::isfinite(trial_value) && trial_value >= value + opts.armijo_c * step * slope) {
                res.lambda = trial;
                arg = trial_arg;
                value = trial_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (arg.maxCoeff() > opts.divergence_level) {
            return infeasible(std::numeric_limits<double>::infinity(), iter + 1);
        }
        refresh_gradient();
        if (!accepted) {
            // No ascent possible: either rounding level was reached or the problem is degenerate.
            const double g = grad.lpNorm<Eigen::Infinity>();
            if (g <= std::max(opts.gradient_tol, 1e-12 * gradient_scale())) {
                return finish(g, iter + 1);
            }
            if (g >= gnorm) {
                return infeasible(g, iter + 1);
            }
        }
    }
    const double g = grad.lpNorm<Eigen::Infinity>();
    if (g <= std::max(opts.gradient_tol, 1e-12 * gradient_scale())) {
        return finish(g, opts.max_iterations);
    }
    throw DualNonConvergence(g);
}

[[nodiscard]] inline DualResult dual_solve(const MomentMatrix& z, const DualOptions& opts = {}) {
    return dual_solve(z.rows, opts);
}

// ---------------------------------------------------------------------------
// Profile test
// ---------------------------------------------------------------------------

enum class ElMode { EL, WeL };

struct ElOptions {
    double quantile_level = 0.9;
    /// Replaces the self-weights in WeL mode (e.g. unit weights).
    std::optional<SelfWeights> weights_override;
    DualOptions dual;
    NelderMeadOptions outer;
    /// Initial simplex edge is simplex_scale / sqrt(n), times sd(X) for the intercept.
    double simplex_scale = 0.5;
};

struct ElOutcome {
    double stat = std::numeric_limits<double>::infinity();
    Eigen::VectorXd lambda;
    ArmaSpec theta_hat_el;
    double p_value = 0.0;
    bool converged = false;
    double inner_residual = std::numeric_limits<double>::infinity();
    int outer_iterations = 0;
    double start_stat = std::numeric_limits<double>::infinity();
    std::size_t m = 0;

    [[nodiscard]] bool rejects(double level) const noexcept { return p_value <= level; }
};

class ElInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// -2 log EL ratio at a fixed theta (gamma = 0). Infeasible or non-convergent inner solves give +inf.
[[nodiscard]] inline DualResult el_ratio_at(const TimeSeries& x, const ArmaSpec& theta, std::size_t m,
                                            const SelfWeights* weights, const DualOptions& opts = {}) {
    if (!theta.finite() || !check_stationarity(theta).ok) {
        DualResult r;
        r.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.dim() + m));
        return r;
    }
    const auto pack = residuals_and_gradient(theta, x);
    const auto z = moment_vectors(pack, m, weights);
    try {
        return dual_solve(z, opts);
    } catch (const DualNonConvergence& e) {
        DualResult r;
        r.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(z.dim()));
        r.residual = e.residual();
        return r;
    }
}

/**
 * @brief Profile (weighted) empirical likelihood portmanteau test of no serial
 * correlation at lags 1..m in the ARMA(p, q) errors.
 *
 * stat = min_theta of the inner -2 log ratio, searched by Nelder-Mead from the
 * least-squares fit. Asymptotically chi-squared with m degrees of freedom under
 * the null; reject at level a iff p_value <= a.
 */
[[nodiscard]] inline ElOutcome profile_el_test(const TimeSeries& x, std::size_t p, std::size_t q, std::size_t m,
                                               ElMode mode, const std::optional<FitResult>& fit = std::nullopt,
                                               const ElOptions& opts = {}) {
    if (m < 1) {
        throw std::invalid_argument("profile_el_test: m must be at least 1");
    }
    const FitResult ls = fit ? *fit : ls_fit(x, p, q);
    if (ls.theta_hat.p() != p || ls.theta_hat.q() != q) {
        throw std::invalid_argument("profile_el_test: fit orders do not match (p, q)");
    }

    std::optional<SelfWeights> weights;
    if (mode == ElMode::WeL) {
        weights = opts.weights_override ? *opts.weights_override : self_weights(x, opts.quantile_level);
    }
    const SelfWeights* wp = weights ? &*weights : nullptr;

    auto objective = [&](const Eigen::VectorXd& v) {
        return el_ratio_at(x, ArmaSpec::from_vector(v, p, q), m, wp, opts.dual).neg2log;
    };

    const double n = static_cast<double>(x.size());
    const auto xs = x.view();
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : xs) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);

    const Eigen::VectorXd start = ls.theta_hat.to_vector();
    Eigen::VectorXd steps = Eigen::VectorXd::Constant(start.size(), opts.simplex_scale / std::sqrt(n));
    steps(0) *= sd > 0.0 ? sd : 1.0;

    const auto nm = nelder_mead(objective, start, steps, opts.outer);
    if (!std::isfinite(nm.value)) {
        throw ElInfeasible("profile_el_test: EL infeasible at every trial point");
    }

    ElOutcome out;
    out.m = m;
    out.theta_hat_el = ArmaSpec::from_vector(nm.x, p, q);
    const auto at_best = el_ratio_at(x, out.theta_hat_el, m, wp, opts.dual);
    out.stat = at_best.neg2log;
    out.lambda = at_best.lambda;
    out.inner_residual = at_best.residual;
    out.outer_iterations = nm.evaluations;
    out.converged = nm.converged && at_best.feasible && at_best.residual < 1e-8;
    out.start_stat = objective(start);
    out.p_value = chi2_sf(out.stat, static_cast<int>(m));
    return out;
}

}  // namespace elport
