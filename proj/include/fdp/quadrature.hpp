#pragma once

#include <cmath>
#include <cstddef>

namespace fdp {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {

// Gauss(7)/Kronrod(15) nodes and weights on [-1, 1], QUADPACK constants.
inline constexpr double kKronrodNodes[8] = {
    0.0,
    0.2077849550078985, 0.4058451513773972, 0.5860872354676911,
    0.7415311855993944, 0.8648644233597691, 0.9491079123427585,
    0.9914553711208126};
inline constexpr double kKronrodWeights[8] = {
    0.2094821410847278,
    0.2044329400752989, 0.1903505780647854, 0.1690047266392679,
    0.1406532597155259, 0.1047900103222502, 0.0630920926299786,
    0.0229353220105292};
// Gauss-7 weights for Kronrod nodes 0, 2, 4, 6 (the embedded rule).
inline constexpr double kGaussWeights[4] = {
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
    0.1294849661688697};

template <typename F>
void gauss_kronrod_15(const F& f, double a, double b, double& k15, double& g7) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double f0 = f(c);
    k15 = kKronrodWeights[0] * f0;
    g7 = kGaussWeights[0] * f0;
    for (int i = 1; i < 8; ++i) {
        const double dx = h * kKronrodNodes[i];
        const double s = f(c - dx) + f(c + dx);
        k15 += kKronrodWeights[i] * s;
        if (i % 2 == 0) g7 += kGaussWeights[i / 2] * s;
    }
    k15 *= h;
    g7 *= h;
}

template <typename F>
void adapt(const F& f, double a, double b, double tol, int depth, QuadResult& out) {
    double k15, g7;
    gauss_kronrod_15(f, a, b, k15, g7);
    out.evaluations += 15;
    const double err = std::abs(k15 - g7);
    if (err <= tol || depth >= 48) {
        out.value += k15;
        out.error += err;
        return;
    }
    const double mid = 0.5 * (a + b);
    adapt(f, a, mid, 0.5 * tol, depth + 1, out);
    adapt(f, mid, b, 0.5 * tol, depth + 1, out);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to absolute tolerance abs_tol.
template <typename F>
QuadResult integrate(const F& f, double a, double b, double abs_tol) {
    QuadResult out;
    if (!(a < b)) return out;
    detail::adapt(f, a, b, abs_tol, 0, out);
    return out;
}

}  // namespace fdp
