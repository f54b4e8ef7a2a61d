#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace elport {

/**
 * @brief Upper-tail probability of the chi-squared distribution.
 *
 * Evaluated as the regularized upper incomplete gamma function Q(df/2, x/2).
 *
 * @throws std::domain_error if x < 0 or df < 1
 */
[[nodiscard]] inline double chi2_sf(double x, int df) {
    if (!(x >= 0.0)) {
        throw std::domain_error("chi2_sf: x must be nonnegative");
    }
    if (df < 1) {
        throw std::domain_error("chi2_sf: df must be at least 1");
    }
    if (x == 0.0) {
        return 1.0;
    }
    if (std::isinf(x)) {
        return 0.0;
    }
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// Lower-tail quantile: the x with P(chi2_df <= x) = p.
[[nodiscard]] inline double chi2_quantile(double p, int df) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("chi2_quantile: p must lie in (0, 1)");
    }
    if (df < 1) {
        throw std::domain_error("chi2_quantile: df must be at least 1");
    }
    return 2.0 * boost::math::gamma_p_inv(0.5 * df, p);
}

/// Chi-squared density, used by the calibration checks.
[[nodiscard]] inline double chi2_pdf(double x, int df) {
    if (x < 0.0) {
        return 0.0;
    }
    return 0.5 * boost::math::gamma_p_derivative(0.5 * df, 0.5 * x);
}

/**
 * @brief Nearest-rank sample quantile: the ceil(level * n)-th order statistic.
 *
 * A small guard absorbs floating-point noise in level * n so that e.g.
 * 0.9 * 10 selects the 9th order statistic.
 */
[[nodiscard]] inline double empirical_quantile(std::span<const double> xs, double level) {
    if (xs.empty()) {
        throw std::invalid_argument("empirical_quantile: empty sample");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("empirical_quantile: level must lie in (0, 1)");
    }
    const auto n = xs.size();
    const double scaled = level * static_cast<double>(n);
    auto rank = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::vector<double> sorted(xs.begin(), xs.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    return sorted[rank - 1];
}

/// Kolmogorov-Smirnov distance between a sample and the chi-squared(df) CDF.
[[nodiscard]] inline double ks_distance_chi2(std::span<const double> sample, int df) {
    if (sample.empty()) {
        throw std::invalid_argument("ks_distance_chi2: empty sample");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double x = std::max(0.0, sorted[i]);
        const double cdf = 1.0 - chi2_sf(x, df);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
    }
    return d;
}

// ---------------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------------

/// One round of the splitmix64 finalizer.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * @brief A root seed plus a path of integer coordinates (experiment, cell,
 * replication, purpose, ...) identifying one independent random stream.
 */
struct SeedPath {
    std::uint64_t root = 0;
    std::vector<std::uint64_t> path;

    SeedPath() = default;
    SeedPath(std::uint64_t root_seed, std::initializer_list<std::uint64_t> coords)
        : root(root_seed), path(coords) {}
    SeedPath(std::uint64_t root_seed, std::vector<std::uint64_t> coords)
        : root(root_seed), path(std::move(coords)) {}

    [[nodiscard]] SeedPath child(std::uint64_t coord) const {
        SeedPath out = *this;
        out.path.push_back(coord);
        return out;
    }

    /// Child seed: splitmix-chained hash of the root, each coordinate and the path length.
    [[nodiscard]] std::uint64_t derive() const noexcept {
        std::uint64_t h = splitmix64(root ^ 0x6a09e667f3bcc909ULL);
        for (const auto c : path) {
            h = splitmix64(h ^ splitmix64(c + 0x3c6ef372fe94f82bULL));
        }
        return splitmix64(h ^ static_cast<std::uint64_t>(path.size()));
    }
};

[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> coords) {
    return SeedPath(root, coords).derive();
}

}  // namespace elport
