#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elport/rng.hpp"

namespace elport {

/// Observed (or simulated) series X_1..X_n. Values are finite; the length is fixed at construction.
class TimeSeries {
public:
    TimeSeries() = default;
    explicit TimeSeries(std::vector<double> values) : values_(std::move(values)) {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw std::invalid_argument("TimeSeries: non-finite value at index " + std::to_string(i));
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] std::span<const double> view() const noexcept { return values_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    [[nodiscard]] TimeSeries scaled(double k) const {
        std::vector<double> out(values_);
        for (auto& v : out) v *= k;
        return TimeSeries(std::move(out));
    }

private:
    std::vector<double> values_;
};

/**
 * @brief ARMA(p, q) mean equation:
 *   X_t = mu + sum_i phi_i X_{t-i} + sum_j psi_j eps_{t-j} + eps_t.
 *
 * Parameter vector order is (mu, phi_1..phi_p, psi_1..psi_q) everywhere in the library.
 */
struct ArmaSpec {
    double mu = 0.0;
    std::vector<double> phi;
    std::vector<double> psi;

    [[nodiscard]] std::size_t p() const noexcept { return phi.size(); }
    [[nodiscard]] std::size_t q() const noexcept { return psi.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return 1 + phi.size() + psi.size(); }

    [[nodiscard]] bool finite() const noexcept {
        auto ok = [](double v) { return std::isfinite(v); };
        return std::isfinite(mu) && std::all_of(phi.begin(), phi.end(), ok) && std::all_of(psi.begin(), psi.end(), ok);
    }

    [[nodiscard]] Eigen::VectorXd to_vector() const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(dim()));
        v(0) = mu;
        for (std::size_t i = 0; i < p(); ++i) v(static_cast<Eigen::Index>(1 + i)) = phi[i];
        for (std::size_t j = 0; j < q(); ++j) v(static_cast<Eigen::Index>(1 + p() + j)) = psi[j];
        return v;
    }

    [[nodiscard]] static ArmaSpec from_vector(const Eigen::VectorXd& v, std::size_t p, std::size_t q) {
        if (static_cast<std::size_t>(v.size()) != 1 + p + q) {
            throw std::invalid_argument("ArmaSpec::from_vector: size does not match orders");
        }
        ArmaSpec s;
        s.mu = v(0);
        s.phi.resize(p);
        s.psi.resize(q);
        for (std::size_t i = 0; i < p; ++i) s.phi[i] = v(static_cast<Eigen::Index>(1 + i));
        for (std::size_t j = 0; j < q; ++j) s.psi[j] = v(static_cast<Eigen::Index>(1 + p + j));
        return s;
    }

    /// phi(1) = 1 - sum phi_i; a level shift delta in X moves mu by delta * phi(1).
    [[nodiscard]] double ar_at_one() const noexcept {
        return 1.0 - std::accumulate(phi.begin(), phi.end(), 0.0);
    }
};

/**
 * @brief GARCH(r, s) volatility:
 *   eps_t = eta_t sigma_t,  sigma_t^2 = omega + sum_i a_i eps_{t-i}^2 + sum_j b_j sigma_{t-j}^2.
 *
 * omega must be positive and the a_i, b_j nonnegative; strictly_positive()
 * reports whether every coefficient is strictly positive.
 */
struct GarchSpec {
    double omega = 1.0;
    std::vector<double> a;
    std::vector<double> b;

    void validate() const {
        if (!(std::isfinite(omega) && omega > 0.0)) {
            throw std::invalid_argument("GarchSpec: omega must be positive");
        }
        for (double v : a) {
            if (!(std::isfinite(v) && v >= 0.0)) throw std::invalid_argument("GarchSpec: ARCH coefficients must be nonnegative");
        }
        for (double v : b) {
            if (!(std::isfinite(v) && v >= 0.0)) throw std::invalid_argument("GarchSpec: GARCH coefficients must be nonnegative");
        }
    }

    [[nodiscard]] bool strictly_positive() const noexcept {
        auto pos = [](double v) { return v > 0.0; };
        return omega > 0.0 && std::all_of(a.begin(), a.end(), pos) && std::all_of(b.begin(), b.end(), pos);
    }

    [[nodiscard]] double persistence() const noexcept {
        return std::accumulate(a.begin(), a.end(), 0.0) + std::accumulate(b.begin(), b.end(), 0.0);
    }
};

// ---------------------------------------------------------------------------
// Stationarity / invertibility
// ---------------------------------------------------------------------------

inline constexpr double kRootMargin = 1e-8;

struct StationarityReport {
    bool ok = true;
    double min_root_modulus_ar = std::numeric_limits<double>::infinity();
    double min_root_modulus_ma = std::numeric_limits<double>::infinity();
    bool common_root = false;
};

namespace detail {

// Roots of 1 + c_1 z + ... + c_k z^k. Trailing zero coefficients are dropped.
// The reciprocal polynomial z^k + c_1 z^{k-1} + ... + c_k has roots 1/z, which are the
// eigenvalues of its companion matrix; inverting them gives the roots.
inline std::vector<std::complex<double>> unit_constant_poly_roots(std::span<const double> coeffs) {
    std::size_t k = coeffs.size();
    while (k > 0 && coeffs[k - 1] == 0.0) --k;
    std::vector<std::complex<double>> roots;
    if (k == 0) return roots;
    if (k == 1) {
        roots.emplace_back(-1.0 / coeffs[0], 0.0);
        return roots;
    }
    const auto dim = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) companion(0, j) = -coeffs[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 1; i < dim; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("polynomial root finding failed");
    }
    roots.reserve(k);
    for (Eigen::Index i = 0; i < dim; ++i) {
        roots.push_back(1.0 / solver.eigenvalues()(i));
    }
    return roots;
}

inline double min_modulus(const std::vector<std::complex<double>>& roots) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : roots) m = std::min(m, std::abs(r));
    return m;
}

}  // namespace detail

/// AR polynomial 1 - sum phi_i z^i and MA polynomial 1 + sum psi_j z^j: root moduli and common roots.
[[nodiscard]] inline StationarityReport check_stationarity(const ArmaSpec& spec) {
    if (!spec.finite()) {
        throw std::invalid_argument("check_stationarity: non-finite coefficient");
    }
    std::vector<double> ar(spec.phi.size());
    std::transform(spec.phi.begin(), spec.phi.end(), ar.begin(), [](double v) { return -v; });
    const auto ar_roots = detail::unit_constant_poly_roots(ar);
    const auto ma_roots = detail::unit_constant_poly_roots(spec.psi);

    StationarityReport rep;
    rep.min_root_modulus_ar = detail::min_modulus(ar_roots);
    rep.min_root_modulus_ma = detail::min_modulus(ma_roots);
    for (const auto& za : ar_roots) {
        for (const auto& zm : ma_roots) {
            if (std::abs(za - zm) <= kRootMargin) rep.common_root = true;
        }
    }
    rep.ok = rep.min_root_modulus_ar > 1.0 + kRootMargin && rep.min_root_modulus_ma > 1.0 + kRootMargin && !rep.common_root;
    return rep;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/**
 * @brief Data-generating process: ARMA mean, GARCH errors and a local
 * alternative of size c/sqrt(n) injected into the innovations.
 */
struct DgpConfig {
    ArmaSpec arma;
    GarchSpec garch;
    double c = 0.0;
    std::size_t n = 400;
    std::size_t burn_in = 500;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 50) throw std::invalid_argument("DgpConfig: n must be at least 50");
        if (!std::isfinite(c)) throw std::invalid_argument("DgpConfig: c must be finite");
        if (!arma.finite()) throw std::invalid_argument("DgpConfig: ARMA coefficients must be finite");
        garch.validate();
    }
};

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, std::size_t index) : std::runtime_error(what), index_(index) {}
    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/**
 * Unit-variance innovations eta_t = (k e_{t-1} + e_t) / sqrt(1 + k^2), k = c / sqrt(n),
 * with e_t i.i.d. N(0, 1). The first call consumes e_0 and e_1.
 */
class LocalAlternativeNoise {
public:
    LocalAlternativeNoise(Rng& rng, double c, std::size_t n)
        : rng_(rng), kappa_(c / std::sqrt(static_cast<double>(n))), norm_(std::sqrt(1.0 + kappa_ * kappa_)) {}

    [[nodiscard]] double next() {
        if (!primed_) {
            previous_ = rng_.normal();
            primed_ = true;
        }
        const double e = rng_.normal();
        const double eta = (kappa_ * previous_ + e) / norm_;
        previous_ = e;
        return eta;
    }

private:
    Rng& rng_;
    double kappa_;
    double norm_;
    double previous_ = 0.0;
    bool primed_ = false;
};

/// Stationary starting value for sigma^2 (omega itself when the process has no finite variance).
[[nodiscard]] inline double initial_variance(const GarchSpec& g) noexcept {
    const double persistence = g.persistence();
    return persistence < 1.0 ? g.omega / (1.0 - persistence) : g.omega;
}

[[nodiscard]] inline TimeSeries simulate(const DgpConfig& cfg) {
    cfg.validate();
    if (!check_stationarity(cfg.arma).ok) {
        throw std::invalid_argument("simulate: ARMA parameters violate stationarity/invertibility");
    }
    const auto& arma = cfg.arma;
    const auto& garch = cfg.garch;
    const std::size_t total = cfg.burn_in + cfg.n;
    const std::size_t p = arma.p(), q = arma.q(), r = garch.a.size(), s = garch.b.size();

    Rng rng(cfg.seed);
    LocalAlternativeNoise noise(rng, cfg.c, cfg.n);

    const double sigma2_start = initial_variance(garch);
    std::vector<double> x(total, 0.0), eps(total, 0.0), sigma2(total, 0.0);
    auto lagged = [](const std::vector<double>& v, std::size_t t, std::size_t lag, double presample) {
        return t >= lag ? v[t - lag] : presample;
    };

    for (std::size_t t = 0; t < total; ++t) {
        const double eta = noise.next();
        double var = garch.omega;
        for (std::size_t i = 0; i < r; ++i) {
            const double e = lagged(eps, t, i + 1, 0.0);
            var += garch.a[i] * e * e;
        }
        for (std::size_t j = 0; j < s; ++j) var += garch.b[j] * lagged(sigma2, t, j + 1, sigma2_start);
        sigma2[t] = var;
        eps[t] = eta * std::sqrt(var);

        double xt = arma.mu + eps[t];
        for (std::size_t i = 0; i < p; ++i) xt += arma.phi[i] * lagged(x, t, i + 1, 0.0);
        for (std::size_t j = 0; j < q; ++j) xt += arma.psi[j] * lagged(eps, t, j + 1, 0.0);
        x[t] = xt;

        if (!std::isfinite(var) || !std::isfinite(xt)) {
            throw SimulationError("simulate: non-finite value at step " + std::to_string(t) +
                                      " (GARCH recursion exploded)",
                                  t);
        }
    }
    return TimeSeries(std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(cfg.burn_in), x.end()));
}

}  // namespace elport
