#include "fdp/black.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fdp/math.hpp"

namespace fdp {

double SmileFit::vol(double strike) const {
    const double k = std::clamp(strike, k_min, k_max);
    return a0 + a1 * k + a2 * k * k;
}

double black_forward_price(double x, double sigma, double strike, double tau) {
    if (x <= 0.0 || strike < 0.0 || sigma < 0.0 || tau < 0.0)
        throw std::domain_error("black_forward_price: negative input");
    if (strike == 0.0) return x;
    const double st = sigma * std::sqrt(tau);
    if (st == 0.0) return std::max(x - strike, 0.0);
    const double d1 = std::log(x / strike) / st + 0.5 * st;
    return x * norm_cdf(d1) - strike * norm_cdf(d1 - st);
}

double black_forward_vega(double x, double sigma, double strike, double tau) {
    if (strike <= 0.0 || sigma <= 0.0 || tau <= 0.0) return 0.0;
    const double st = sigma * std::sqrt(tau);
    const double d1 = std::log(x / strike) / st + 0.5 * st;
    return x * norm_pdf(d1) * std::sqrt(tau);
}

double black_forward_put(double x, double sigma, double strike, double tau) {
    if (x <= 0.0 || strike < 0.0 || sigma < 0.0 || tau < 0.0)
        throw std::domain_error("black_forward_put: negative input");
    if (strike == 0.0) return 0.0;
    const double st = sigma * std::sqrt(tau);
    if (st == 0.0) return std::max(strike - x, 0.0);
    const double d1 = std::log(x / strike) / st + 0.5 * st;
    return strike * norm_cdf(st - d1) - x * norm_cdf(-d1);
}

double discount_to_spot(double forward_price, const DiscountContext& ctx) {
    if (ctx.tau < 0.0) throw std::domain_error("discount_to_spot: tau < 0");
    return forward_price * std::exp(-ctx.rate * ctx.tau);
}

double implied_vol(double forward, double strike, double tau, double target) {
    const double intrinsic = std::max(forward - strike, 0.0);
    if (!(target > intrinsic) || !(target < forward))
        throw NoSolutionError("implied_vol: target outside ((x-K)+, x)");

    double lo = 1e-6, hi = 5.0;
    if (black_forward_price(forward, hi, strike, tau) < target)
        throw NoSolutionError("implied_vol: target above price at sigma=5");
    // price is strictly increasing in sigma, so plain bisection is safe
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double p = black_forward_price(forward, mid, strike, tau);
        if (std::abs(p - target) < 1e-10) return mid;
        (p > target ? hi : lo) = mid;
        if (hi - lo < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

double forward_from_parity(double call_spot, double put_spot, double strike,
                           const DiscountContext& ctx) {
    return strike + std::exp(ctx.rate * ctx.tau) * (call_spot - put_spot);
}

SmileFit fit_smile(const std::vector<double>& strikes, const std::vector<double>& vols) {
    const std::size_t n = strikes.size();
    if (n < 3 || vols.size() != n)
        throw DegenerateDesignError("fit_smile: need >= 3 (strike, vol) points");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (strikes[i] == strikes[j])
                throw DegenerateDesignError("fit_smile: duplicate strikes");

    // fit in a centered/scaled basis, then expand to monomial coefficients
    double mean = 0.0;
    for (double k : strikes) mean += k;
    mean /= static_cast<double>(n);
    double scale = 0.0;
    for (double k : strikes) scale = std::max(scale, std::abs(k - mean));
    if (scale == 0.0) throw DegenerateDesignError("fit_smile: degenerate strike set");

    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (strikes[i] - mean) / scale;
        design(static_cast<Eigen::Index>(i), 0) = 1.0;
        design(static_cast<Eigen::Index>(i), 1) = u;
        design(static_cast<Eigen::Index>(i), 2) = u * u;
        rhs(static_cast<Eigen::Index>(i)) = vols[i];
    }
    Eigen::Vector3d c = design.colPivHouseholderQr().solve(rhs);

    SmileFit fit;
    const double s1 = 1.0 / scale, s2 = s1 * s1;
    fit.a2 = c(2) * s2;
    fit.a1 = c(1) * s1 - 2.0 * c(2) * mean * s2;
    fit.a0 = c(0) - c(1) * mean * s1 + c(2) * mean * mean * s2;
    fit.k_min = *std::min_element(strikes.begin(), strikes.end());
    fit.k_max = *std::max_element(strikes.begin(), strikes.end());
    fit.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        fit.residuals[i] = vols[i] - (fit.a0 + fit.a1 * strikes[i] + fit.a2 * strikes[i] * strikes[i]);

    // the fitted parabola must stay positive over the strike range
    double lowest = std::min(fit.vol(fit.k_min), fit.vol(fit.k_max));
    if (fit.a2 > 0.0) {
        const double vertex = -fit.a1 / (2.0 * fit.a2);
        if (vertex > fit.k_min && vertex < fit.k_max) lowest = std::min(lowest, fit.vol(vertex));
    }
    if (lowest <= 0.0) throw InvalidSmileError("fit_smile: fitted volatility non-positive in range");
    return fit;
}

std::vector<double> implied_density_from_smile(const SmileFit& fit, double forward,
                                               const DiscountContext& ctx,
                                               const std::vector<double>& grid) {
    std::vector<double> density(grid.size());
    const double df = std::exp(-ctx.rate * ctx.tau);
    auto spot_call = [&](double k) {
        return df * black_forward_price(forward, fit.vol(k), k, ctx.tau);
    };
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double k = grid[i];
        const double h = 1e-2 * k;
        const double second = (spot_call(k - h) - 2.0 * spot_call(k) + spot_call(k + h)) / (h * h);
        density[i] = second / df;
    }
    return density;
}

}  // namespace fdp
