#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace elport {

/**
 * @brief Seedable random source with platform-independent output.
 *
 * Bits come from std::mt19937_64, whose sequence is fixed by the standard.
 * The uniform, normal and exponential transforms are implemented here (the
 * standard library distributions are implementation-defined):
 *   - uniform: top 53 bits scaled to [0, 1)
 *   - normal: Box-Muller, both variates of each pair are used in order
 *   - exponential(1): -log(1 - u)
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    [[nodiscard]] std::uint64_t next_u64() { return engine_(); }

    [[nodiscard]] double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on the open interval (0, 1).
    [[nodiscard]] double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    [[nodiscard]] double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Exponential with rate 1 (mean one, variance one).
    [[nodiscard]] double exponential() { return -std::log1p(-uniform()); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace elport
