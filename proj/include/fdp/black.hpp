#pragma once

#include <vector>

#include "fdp/errors.hpp"

namespace fdp {

/// Discounting context: continuously compounded rate per year, year fraction.
struct DiscountContext {
    double rate = 0.0;
    double tau = 0.0;  // T - t, years; must be >= 0
};

/// Quadratic volatility-by-strike fit sigma(K) = a0 + a1 K + a2 K^2,
/// flat-extrapolated outside [k_min, k_max].
struct SmileFit {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    double k_min = 0.0, k_max = 0.0;
    std::vector<double> residuals;

    double vol(double strike) const;
};

/// Black's formula for the forward price of a call: x Phi(d1) - K Phi(d2).
/// K == 0 is the zero-strike call (= x); sigma or tau == 0 collapses to intrinsic.
double black_forward_price(double x, double sigma, double strike, double tau);

/// Vega of the forward price with respect to sigma.
double black_forward_vega(double x, double sigma, double strike, double tau);

/// Forward price of the matching put, K Phi(-d2) - x Phi(-d1).
double black_forward_put(double x, double sigma, double strike, double tau);

double discount_to_spot(double forward_price, const DiscountContext& ctx);

/// Inverts black_forward_price in sigma by bisection on [1e-6, 5] to an
/// absolute price tolerance of 1e-10. Throws NoSolutionError when the target
/// lies outside the open arbitrage interval ((x-K)+, x).
double implied_vol(double forward, double strike, double tau, double target);

/// Forward of the underlying from put-call parity: K + e^{r tau}(C - P).
double forward_from_parity(double call_spot, double put_spot, double strike,
                           const DiscountContext& ctx);

/// Least-squares quadratic through (strike, vol) points; >= 3 distinct strikes.
SmileFit fit_smile(const std::vector<double>& strikes, const std::vector<double>& vols);

/// Breeden-Litzenberger density from a smile: e^{r tau} d^2C/dK^2 with a
/// central difference of relative step 1e-2 K. Negative values are reported as-is.
std::vector<double> implied_density_from_smile(const SmileFit& fit, double forward,
                                               const DiscountContext& ctx,
                                               const std::vector<double>& grid);

}  // namespace fdp
