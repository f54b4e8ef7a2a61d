#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "elport/model_core.hpp"

namespace elport {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/**
 * @brief Conditional residuals eps_t(theta) and their gradient d eps_t / d theta.
 *
 * grad has one row per time point and columns ordered (mu, phi_1..phi_p, psi_1..psi_q).
 */
struct ResidualPack {
    std::vector<double> eps;
    RowMatrix grad;
    std::size_t p = 0;
    std::size_t q = 0;

    [[nodiscard]] std::size_t size() const noexcept { return eps.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return 1 + p + q; }
};

/**
 * Residual recursion with zero presample values for X, eps and the gradient:
 *   eps_t  = X_t - mu - sum_i phi_i X_{t-i} - sum_j psi_j eps_{t-j}
 *   deps_t = -(1, X_{t-1..t-p}, eps_{t-1..t-q}) - sum_j psi_j deps_{t-j}
 */
[[nodiscard]] inline ResidualPack residuals_and_gradient(const ArmaSpec& theta, const TimeSeries& x) {
    const std::size_t n = x.size(), p = theta.p(), q = theta.q(), k = theta.dim();
    if (n <= p + q) {
        throw std::invalid_argument("residuals_and_gradient: series shorter than p + q + 1");
    }
    ResidualPack pack;
    pack.p = p;
    pack.q = q;
    pack.eps.assign(n, 0.0);
    pack.grad = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));

    const double* xs = x.view().data();
    double* eps = pack.eps.data();
    double* g = pack.grad.data();

    for (std::size_t t = 0; t < n; ++t) {
        double e = xs[t] - theta.mu;
        double* gt = g + t * k;
        gt[0] = -1.0;
        for (std::size_t i = 0; i < p; ++i) {
            const double lag = t > i ? xs[t - 1 - i] : 0.0;
            e -= theta.phi[i] * lag;
            gt[1 + i] = -lag;
        }
        for (std::size_t j = 0; j < q; ++j) {
            const double lag = t > j ? eps[t - 1 - j] : 0.0;
            e -= theta.psi[j] * lag;
            gt[1 + p + j] = -lag;
        }
        for (std::size_t j = 0; j < q && j < t; ++j) {
            const double w = theta.psi[j];
            const double* gl = g + (t - 1 - j) * k;
            for (std::size_t c = 0; c < k; ++c) gt[c] -= w * gl[c];
        }
        eps[t] = e;
    }
    return pack;
}

struct FitResult {
    ArmaSpec theta_hat;
    double score_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    double sse = std::numeric_limits<double>::infinity();
};

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;
    double armijo_c = 1e-4;
};

namespace detail {

// Sum of squares and score over t >= p (the first p observations only serve as AR lags).
struct LsEval {
    double sse = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd normal;
};

inline LsEval ls_evaluate(const ArmaSpec& theta, const TimeSeries& x, bool with_normal) {
    const auto pack = residuals_and_gradient(theta, x);
    const auto k = static_cast<Eigen::Index>(theta.dim());
    const auto start = static_cast<Eigen::Index>(theta.p());
    const auto rows = static_cast<Eigen::Index>(x.size()) - start;
    Eigen::Map<const Eigen::VectorXd> eps(pack.eps.data() + start, rows);
    const auto jac = pack.grad.bottomRows(rows);
    LsEval out;
    out.sse = eps.squaredNorm();
    out.score = jac.transpose() * eps;
    if (with_normal) {
        out.normal = Eigen::MatrixXd::Zero(k, k);
        out.normal.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
        out.normal = out.normal.selfadjointView<Eigen::Lower>();
    }
    return out;
}

inline double ls_sse(const ArmaSpec& theta, const TimeSeries& x) {
    const auto pack = residuals_and_gradient(theta, x);
    double s = 0.0;
    for (std::size_t t = theta.p(); t < pack.eps.size(); ++t) s += pack.eps[t] * pack.eps[t];
    return s;
}

// Ordinary least squares via column-pivoted QR. Returns nullopt on rank deficiency.
inline std::optional<Eigen::VectorXd> ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols()) return std::nullopt;
    return Eigen::VectorXd(qr.solve(y));
}

}  // namespace detail

/**
 * @brief Hannan-Rissanen style starting value: long autoregression for an
 * innovation proxy, then one linear regression on lagged X and lagged proxies.
 * An estimate outside the stationary/invertible region is shrunk toward zero;
 * a singular regression falls back to the sample mean with (near-)zero coefficients.
 */
[[nodiscard]] inline ArmaSpec hannan_rissanen_start(const TimeSeries& x, std::size_t p, std::size_t q) {
    const std::size_t n = x.size();
    const auto xs = x.view();
    ArmaSpec fallback;
    fallback.mu = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    fallback.phi.assign(p, 0.0);
    fallback.psi.assign(q, 0.0);
    // phi = psi = 0 makes the AR and MA gradient columns identical; offset the first MA term.
    if (p > 0 && q > 0) fallback.psi[0] = 0.1;
    if (p + q == 0) return fallback;

    std::vector<double> proxy(n, 0.0);
    std::size_t long_order = 0;
    if (q > 0) {
        const auto by_log = static_cast<std::size_t>(std::ceil(10.0 * std::log10(static_cast<double>(n))));
        long_order = std::max(p + q, std::min(by_log, n / 4));
        const auto rows = static_cast<Eigen::Index>(n - long_order);
        if (rows <= static_cast<Eigen::Index>(long_order + 1)) return fallback;
        Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(long_order + 1));
        Eigen::VectorXd y(rows);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const std::size_t t = long_order + static_cast<std::size_t>(r);
            y(r) = xs[t];
            design(r, 0) = 1.0;
            for (std::size_t i = 0; i < long_order; ++i) design(r, static_cast<Eigen::Index>(1 + i)) = xs[t - 1 - i];
        }
        const auto coef = detail::ols(design, y);
        if (!coef) return fallback;
        const Eigen::VectorXd resid = y - design * *coef;
        for (Eigen::Index r = 0; r < rows; ++r) proxy[long_order + static_cast<std::size_t>(r)] = resid(r);
    }

    const std::size_t first = std::max(p, long_order + q);
    if (n <= first + 1 + p + q) return fallback;
    const auto rows = static_cast<Eigen::Index>(n - first);
    const auto k = static_cast<Eigen::Index>(1 + p + q);
    Eigen::MatrixXd design(rows, k);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = first + static_cast<std::size_t>(r);
        y(r) = xs[t];
        design(r, 0) = 1.0;
        for (std::size_t i = 0; i < p; ++i) design(r, static_cast<Eigen::Index>(1 + i)) = xs[t - 1 - i];
        for (std::size_t j = 0; j < q; ++j) design(r, static_cast<Eigen::Index>(1 + p + j)) = proxy[t - 1 - j];
    }
    const auto coef = detail::ols(design, y);
    if (!coef) return fallback;
    auto start = ArmaSpec::from_vector(*coef, p, q);
    if (!start.finite()) return fallback;
    // Pull an inadmissible estimate radially toward the interior, keeping a small root margin.
    for (int k = 0; k < 60; ++k) {
        const auto rep = check_stationarity(start);
        if (rep.ok && rep.min_root_modulus_ar >= 1.02 && rep.min_root_modulus_ma >= 1.02) return start;
        for (auto& v : start.phi) v *= 0.95;
        for (auto& v : start.psi) v *= 0.95;
    }
    return fallback;
}

/**
 * @brief Conditional least-squares ARMA(p, q) fit.
 *
 * Minimizes sum_{t > p} eps_t(theta)^2 by Gauss-Newton with Armijo backtracking.
 * Trial points outside the stationary/invertible region are rejected by halving
 * the step. A singular Gauss-Newton normal matrix throws ("degenerate design");
 * running out of iterations returns the best iterate with converged = false.
 */
[[nodiscard]] inline FitResult ls_fit(const TimeSeries& x, std::size_t p, std::size_t q,
                                      const std::optional<ArmaSpec>& init = std::nullopt,
                                      const FitOptions& opts = {}) {
    const std::size_t n = x.size();
    if (n < 10 * (p + q + 1)) {
        throw std::invalid_argument("ls_fit: need at least 10 * (p + q + 1) observations");
    }
    ArmaSpec theta = init ? *init : hannan_rissanen_start(x, p, q);
    if (theta.p() != p || theta.q() != q) {
        throw std::invalid_argument("ls_fit: initial value has the wrong orders");
    }
    if (!check_stationarity(theta).ok) {
        throw std::invalid_argument("ls_fit: initial value violates stationarity/invertibility");
    }

    const double score_tol = 1e-6 * static_cast<double>(n);
    FitResult res;
    auto eval = detail::ls_evaluate(theta, x, true);
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(eval.normal);
        const double scale = eval.normal.diagonal().cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || !(scale > 0.0) ||
            ldlt.vectorD().minCoeff() <= 1e-14 * scale) {
            throw std::runtime_error("ls_fit: degenerate design");
        }
        const Eigen::VectorXd step = -ldlt.solve(eval.score);
        if (!step.allFinite()) {
            throw std::runtime_error("ls_fit: degenerate design");
        }
        if (step.lpNorm<Eigen::Infinity>() < opts.step_tolerance) break;

        const Eigen::VectorXd current = theta.to_vector();
        const double slope = 2.0 * eval.score.dot(step);
        double s = 1.0;
        bool accepted = false;
        while (s * step.lpNorm<Eigen::Infinity>() >= opts.step_tolerance * 1e-3) {
            const auto trial = ArmaSpec::from_vector(current + s * step, p, q);
            if (trial.finite() && check_stationarity(trial).ok) {
                const double sse = detail::ls_sse(trial, x);
                if (std::isfinite(sse) && sse <= eval.sse + opts.armijo_c * s * slope) {
                    theta = trial;
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if (!accepted) break;
        eval = detail::ls_evaluate(theta, x, true);
        if ((s * step).lpNorm<Eigen::Infinity>() < opts.step_tolerance) {
            ++iter;
            break;
        }
    }

    res.theta_hat = theta;
    res.sse = eval.sse;
    res.score_norm = eval.score.lpNorm<Eigen::Infinity>();
    res.iterations = iter;
    res.converged = res.score_norm < score_tol;
    return res;
}

}  // namespace elport
