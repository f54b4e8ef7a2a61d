#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace elport {

struct NelderMeadOptions {
    double value_spread_tol = 1e-6;
    int max_evaluations = 500;
    int restarts = 1;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    bool converged = false;
};

/**
 * @brief Derivative-free simplex minimization.
 *
 * The initial simplex is start plus start + steps(i) e_i. Objective values may be
 * +infinity (treated as "worse than anything finite"). Convergence is declared when
 * the spread between the best and worst vertex values drops below value_spread_tol.
 * After the first run a fresh simplex is built around the best vertex `restarts`
 * times, each with its own evaluation budget.
 */
template <class Objective>
[[nodiscard]] NelderMeadResult nelder_mead(Objective&& f, const Eigen::VectorXd& start, const Eigen::VectorXd& steps,
                                           const NelderMeadOptions& opts = {}) {
    const auto dim = start.size();
    if (steps.size() != dim || dim == 0) {
        throw std::invalid_argument("nelder_mead: steps must match the dimension");
    }
    constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;

    NelderMeadResult out;
    out.x = start;
    out.value = f(start);
    out.evaluations = 1;

    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(dim + 1));
    std::vector<double> vals(pts.size());
    std::vector<std::size_t> order(pts.size());

    for (int round = 0; round <= opts.restarts; ++round) {
        int budget = opts.max_evaluations;
        auto eval = [&](const Eigen::VectorXd& x) {
            --budget;
            ++out.evaluations;
            return f(x);
        };
        pts[0] = out.x;
        vals[0] = out.value;
        for (Eigen::Index i = 0; i < dim; ++i) {
            auto& v = pts[static_cast<std::size_t>(i + 1)];
            v = out.x;
            v(i) += steps(i);
            vals[static_cast<std::size_t>(i + 1)] = eval(v);
        }

        bool converged = false;
        while (budget > 0) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
            const std::size_t best = order.front(), worst = order.back(), second_worst = order[order.size() - 2];
            const double spread = vals[worst] - vals[best];
            if (std::isfinite(vals[worst]) && spread < opts.value_spread_tol) {
                converged = true;
                break;
            }

            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
            for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += pts[order[i]];
            centroid /= static_cast<double>(dim);

            const Eigen::VectorXd reflected = centroid + kReflect * (centroid - pts[worst]);
            const double f_reflected = eval(reflected);
            if (f_reflected < vals[best]) {
                const Eigen::VectorXd expanded = centroid + kExpand * (reflected - centroid);
                const double f_expanded = eval(expanded);
                if (f_expanded < f_reflected) {
                    pts[worst] = expanded;
                    vals[worst] = f_expanded;
                } else {
                    pts[worst] = reflected;
                    vals[worst] = f_reflected;
                }
                continue;
            }
            if (f_reflected < vals[second_worst]) {
                pts[worst] = reflected;
                vals[worst] = f_reflected;
                continue;
            }
            bool contracted = false;
            if (f_reflected < vals[worst]) {
                const Eigen::VectorXd outside = centroid + kContract * (reflected - centroid);
                const double f_outside = eval(outside);
                if (f_outside <= f_reflected) {
                    pts[worst] = outside;
                    vals[worst] = f_outside;
                    contracted = true;
                }
            } else {
                const Eigen::VectorXd inside = centroid - kContract * (centroid - pts[worst]);
                const double f_inside = eval(inside);
                if (f_inside < vals[worst]) {
                    pts[worst] = inside;
                    vals[worst] = f_inside;
                    contracted = true;
                }
            }
            if (!contracted) {
                for (std::size_t i = 1; i < order.size(); ++i) {
                    auto& v = pts[order[i]];
                    v = pts[best] + kShrink * (v - pts[best]);
                    vals[order[i]] = eval(v);
                }
            }
        }

        const auto best_it = std::min_element(vals.begin(), vals.end());
        const auto best_idx = static_cast<std::size_t>(best_it - vals.begin());
        if (*best_it <= out.value) {
            out.value = *best_it;
            out.x = pts[best_idx];
        }
        out.converged = converged;
    }
    return out;
}

}  // namespace elport
