#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "elport/diagnostics.hpp"
#include "elport/rng.hpp"

using Catch::Approx;
using namespace elport;

namespace {

GarchSpec garch(std::vector<double> a, std::vector<double> b) {
    GarchSpec g;
    g.omega = 0.2;
    g.a = std::move(a);
    g.b = std::move(b);
    return g;
}

// E log(a Z^2 + b) for Z ~ N(0,1), composite Simpson on [-12, 12].
double expected_log_factor(double a, double b) {
    const int n = 200000;
    const double lo = -12.0, h = 24.0 / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double z = lo + i * h;
        const double f = std::log(a * z * z + b) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        s += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
    return s * h / 3.0;
}

double sq_corr(const std::vector<double>& u, const std::vector<double>& v) {
    const double n = static_cast<double>(u.size());
    double mu = 0, mv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) mu += u[i], mv += v[i];
    mu /= n;
    mv /= n;
    double suv = 0, suu = 0, svv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        suv += (u[i] - mu) * (v[i] - mv);
        suu += (u[i] - mu) * (u[i] - mu);
        svv += (v[i] - mv) * (v[i] - mv);
    }
    return suv * suv / (suu * svv);
}

}  // namespace

TEST_CASE("scalar Lyapunov exponent replays each path exactly", "[diagnostics]") {
    const auto g = garch({0.1}, {0.15});
    const std::size_t T = 2000, reps = 12;
    const auto est = lyapunov_exponent(g, T, reps, 77);
    REQUIRE(est.paths.size() == reps);
    double mean = 0.0;
    for (std::size_t k = 0; k < reps; ++k) {
        Rng rng(derive_seed(77, {k}));
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double eta = rng.normal();
            acc += std::log(0.1 * eta * eta + 0.15);
        }
        CHECK(est.paths[k] == Approx(acc / T).margin(1e-10));
        mean += acc / T;
    }
    CHECK(est.nu_star_hat == Approx(mean / reps).margin(1e-10));
    CHECK(est.std_err > 0.0);
}

TEST_CASE("Lyapunov exponent agrees with quadrature", "[diagnostics]") {
    for (auto [a, b] : {std::pair{0.1, 0.15}, std::pair{0.33, 0.66}}) {
        const double exact = expected_log_factor(a, b);
        const auto est = lyapunov_exponent(garch({a}, {b}), 10000, 20, 3);
        CHECK(std::abs(est.nu_star_hat - exact) < 4.0 * est.std_err + 1e-4);
    }
    CHECK(expected_log_factor(0.1, 0.15) == Approx(-1.49).margin(0.01));
    // Near the boundary but still strictly stationary.
    const auto near = lyapunov_exponent(garch({0.33}, {0.66}), 10000, 20, 3);
    CHECK(near.nu_star_hat < 0.0);
    CHECK(near.nu_star_hat > -0.1);
}

TEST_CASE("deterministic companion gives the log spectral radius", "[diagnostics]") {
    const auto flat = lyapunov_exponent(garch({0.0}, {0.5}), 1000, 10, 1);
    CHECK(flat.nu_star_hat == Approx(std::log(0.5)).margin(1e-12));
    CHECK(flat.std_err < 1e-12);

    // a = 0: the sigma block is the constant matrix [[0.5, 0.3], [1, 0]], root of l^2 = 0.5 l + 0.3.
    const double radius = (0.5 + std::sqrt(0.25 + 1.2)) / 2.0;
    const auto est = lyapunov_exponent(garch({0.0, 0.0}, {0.5, 0.3}), 10000, 10, 1);
    CHECK(std::abs(est.nu_star_hat - std::log(radius)) < 1e-3);
    // eta^2 still reaches the eps slot, so paths differ by O(1/T) only.
    CHECK(est.std_err < 1e-3);
}

TEST_CASE("zero higher-order terms reduce to the scalar exponent", "[diagnostics]") {
    const auto scalar = lyapunov_exponent(garch({0.2}, {0.5}), 10000, 10, 8);
    const auto padded = lyapunov_exponent(garch({0.2, 0.0}, {0.5, 0.0}), 10000, 10, 8);
    for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs(scalar.paths[k] - padded.paths[k]) < 1e-3);
}

TEST_CASE("renormalization period does not change the estimate", "[diagnostics]") {
    const auto g = garch({0.1, 0.05}, {0.4, 0.2});
    const auto every = lyapunov_exponent(g, 5000, 10, 21, 1);
    const auto sparse = lyapunov_exponent(g, 5000, 10, 21, 50);
    const auto odd = lyapunov_exponent(g, 5000, 10, 21, 37);
    CHECK(every.nu_star_hat == Approx(sparse.nu_star_hat).margin(1e-8));
    CHECK(every.nu_star_hat == Approx(odd.nu_star_hat).margin(1e-8));
}

TEST_CASE("Lyapunov preconditions", "[diagnostics]") {
    const auto g = garch({0.1}, {0.15});
    CHECK_THROWS(lyapunov_exponent(g, 999, 10, 1));
    CHECK_THROWS(lyapunov_exponent(g, 1000, 9, 1));
    CHECK_THROWS(lyapunov_exponent(g, 1000, 10, 1, 0));
    CHECK_THROWS(lyapunov_exponent(garch({}, {}), 1000, 10, 1));
}

TEST_CASE("xi series", "[diagnostics]") {
    Rng rng(4);
    std::vector<double> v(300);
    for (auto& e : v) e = 2.0 * rng.normal();
    const TimeSeries x(v);
    const auto lo = xi_series(x, 0.5), hi = xi_series(x, 0.95);
    CHECK(lo.xi[0] == 1.0);
    for (std::size_t t = 0; t < v.size(); ++t) {
        CHECK(lo.xi[t] >= 1.0);
        CHECK(hi.xi[t] >= lo.xi[t]);
    }

    // Constant |X| = c: xi_t = 1 + c rho (1 - rho^{t-1}) / (1 - rho).
    const double c = 1.7, rho = 0.8;
    const TimeSeries flat(std::vector<double>(50, -c));
    const auto xf = xi_series(flat, rho);
    for (std::size_t t = 1; t <= 50; ++t) {
        CHECK(xf.xi[t - 1] == Approx(1.0 + c * rho * (1.0 - std::pow(rho, t - 1.0)) / (1.0 - rho)).margin(1e-12));
    }

    // Small rho keeps only the first lag.
    const double tiny = 1e-9;
    const auto xs = xi_series(x, tiny);
    for (std::size_t t = 1; t < v.size(); ++t) CHECK((xs.xi[t] - 1.0) / tiny == Approx(std::abs(v[t - 1])).margin(1e-5));

    CHECK_THROWS(xi_series(x, 0.0));
    CHECK_THROWS(xi_series(x, 1.0));
}

TEST_CASE("weight moment check closed form", "[diagnostics]") {
    const double c = 0.5, rho = 0.9, delta = 0.05;
    const std::size_t n = 40;
    const TimeSeries flat(std::vector<double>(n, c));
    const auto w = SelfWeights::unit(n);
    double mean = 0.0;
    for (std::size_t t = 1; t <= n; ++t) {
        mean += std::pow(1.0 + c * rho * (1.0 - std::pow(rho, t - 1.0)) / (1.0 - rho), 4.0 + delta);
    }
    mean /= n;
    CHECK(weight_moment_check(flat, w, rho, delta) == Approx(mean).epsilon(1e-12));

    // Halving every weight multiplies the statistic by 16.
    auto half = w;
    for (auto& e : half.w) e = 0.5;
    CHECK(weight_moment_check(flat, half, rho, delta) == Approx(16.0 * mean).epsilon(1e-12));

    CHECK_THROWS(weight_moment_check(flat, SelfWeights::unit(n - 1)));
    CHECK_THROWS(weight_moment_check(flat, w, rho, 0.0));
}

TEST_CASE("weight moment statistic grows far slower than the fourth moment", "[diagnostics]") {
    // Near-integrated GARCH: the fourth moment of X does not exist.
    std::vector<double> stat_growth, m4_growth;
    for (std::uint64_t seed = 1; seed <= 9; ++seed) {
        DgpConfig d;
        d.arma.phi = {0.3};
        d.arma.psi = {0.4};
        d.garch = garch({0.33}, {0.66});
        d.n = 16000;
        d.seed = seed;
        const auto x = simulate(d);
        double stat[2], m4[2];
        int k = 0;
        for (std::size_t n : {2000u, 16000u}) {
            const TimeSeries xs(std::vector<double>(x.values().begin(), x.values().begin() + n));
            stat[k] = weight_moment_check(xs, self_weights(xs));
            double s = 0.0;
            for (double e : xs.view()) s += e * e * e * e;
            m4[k] = s / n;
            ++k;
        }
        stat_growth.push_back(stat[1] / stat[0]);
        m4_growth.push_back(m4[1] / m4[0]);
    }
    std::sort(stat_growth.begin(), stat_growth.end());
    std::sort(m4_growth.begin(), m4_growth.end());
    CHECK(stat_growth[4] < 2.0);
    CHECK(m4_growth[4] > 3.0 * stat_growth[4]);
}

TEST_CASE("ARCH-LM with one lag is n times the squared correlation", "[diagnostics]") {
    Rng rng(6);
    std::vector<double> e(500);
    for (auto& v : e) v = rng.normal();
    std::vector<double> y, lag;
    for (std::size_t t = 1; t < e.size(); ++t) {
        y.push_back(e[t] * e[t]);
        lag.push_back(e[t - 1] * e[t - 1]);
    }
    const auto r = arch_lm(e, 1);
    CHECK(r.name == "arch_lm");
    CHECK(r.m == 1);
    CHECK(r.stat == Approx(499.0 * sq_corr(y, lag)).epsilon(1e-10));
    CHECK(r.p_value == Approx(chi2_sf(r.stat, 1)).margin(1e-15));
}

TEST_CASE("ARCH-LM size under i.i.d. noise and power under GARCH", "[diagnostics]") {
    int reject = 0;
    const int reps = 1000;
    for (int rep = 0; rep < reps; ++rep) {
        Rng rng(derive_seed(500, {static_cast<std::uint64_t>(rep)}));
        std::vector<double> e(5000);
        for (auto& v : e) v = rng.normal();
        reject += arch_lm(e, 4).reject_005;
    }
    CHECK(std::abs(reject / static_cast<double>(reps) - 0.05) <= 0.02);

    int power = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        DgpConfig d;
        d.garch = garch({0.1}, {0.15});
        d.n = 5000;
        d.seed = seed;
        const auto x = simulate(d);
        power += arch_lm(x.view(), 4).reject_005;
    }
    CHECK(power >= 45);
}

TEST_CASE("ARCH-LM input errors", "[diagnostics]") {
    CHECK_THROWS_WITH(arch_lm(std::vector<double>(200, 1.3), 4), Catch::Matchers::ContainsSubstring("zero-variance"));
    CHECK_THROWS(arch_lm(std::vector<double>(40, 1.0), 4));
    CHECK_THROWS(arch_lm(std::vector<double>(100, 1.0), 0));
}
