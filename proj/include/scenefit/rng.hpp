#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "scenefit/geometry.hpp"

namespace scenefit {

// Deterministic random source: mt19937_64 with fixed mappings to doubles, so
// streams are reproducible across platforms and standard-library versions
// (std::uniform_real_distribution and friends make no such guarantee).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // standard normal via Box-Muller
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]: keeps the log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    Vec3 gaussian3() {
        const double a = gaussian(), b = gaussian(), c = gaussian();
        return {a, b, c};
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0;
    bool has_spare_ = false;
};

}  // namespace scenefit
