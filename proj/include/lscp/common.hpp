#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lscp {

// Curve evaluations with a noise level at or below this are treated as
// infeasible (log-likelihood -inf) instead of blowing up in log space.
inline constexpr double kSigmaMin = 1e-8;

// Stability margin used when validating user-supplied process specs.
inline constexpr double kStabilityMargin = 0.005;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

struct TimeSeries {
    std::vector<double> values;  // index 0 holds X_1

    long size() const { return static_cast<long>(values.size()); }
    // 1-based access, matching the series index t = 1..T.
    double at(long t) const { return values[static_cast<size_t>(t - 1)]; }
    double& at(long t) { return values[static_cast<size_t>(t - 1)]; }
};

// SplitMix64, used to derive independent child seeds (one stream per
// simulation / replicate, never shared).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic N(0,1) generator: xoshiro-style splitmix state with
// Box-Muller. Self-contained so that output never depends on the C++
// library's unspecified std::normal_distribution algorithm.
class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed) : state_(seed) {}

    double uniform() {  // (0,1)
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * kPi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Inverse standard normal CDF (Acklam's rational approximation refined by
// one Halley step; relative error far below 1e-9 over (0,1)).
double normal_quantile(double p);

// Round to the nearest even integer (ties away from zero land on even).
long round_even(double x);

}  // namespace lscp
