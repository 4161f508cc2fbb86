#pragma once

#include <vector>

namespace lscp {

// Polynomial curve c(u) = sum_j coeffs[j] * u^j on rescaled time u in [0,1].
struct PolyCurve {
    std::vector<double> coeffs;

    PolyCurve() = default;
    PolyCurve(std::initializer_list<double> c) : coeffs(c) {}
    explicit PolyCurve(std::vector<double> c) : coeffs(std::move(c)) {}

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }

    // Horner evaluation.
    double operator()(double u) const {
        double v = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * u + *it;
        return v;
    }

    double deriv(double u) const {
        double v = 0.0;
        for (int j = degree(); j >= 1; --j) v = v * u + coeffs[static_cast<size_t>(j)] * j;
        return v;
    }
};

}  // namespace lscp
