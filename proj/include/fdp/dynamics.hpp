#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "fdp/calibration.hpp"
#include "fdp/rng.hpp"

namespace fdp {

/// A point of the (n+1)-dimensional Brownian driver at time t < maturity.
struct DriverState {
    double w1 = 0.0;
    double w2 = 0.0;
    double b = 0.0;
    double t = 0.0;
};

/// Cone {(r, v): r >= 0, v in [phi, phi + theta]}. The closed-form gradient
/// expressions assume theta <= pi/2, so wider cones are evaluated as unions
/// of equal sub-cones.
struct Cone {
    double phi = 0.0;
    double theta = 0.0;
};

struct JacobianMatrix {
    Eigen::Matrix3d matrix;  // rows (h0, h1, h2), columns (w1, w2, b)
    double determinant = 0.0;
    double condition = 0.0;
};

struct WeightsAndGradients {
    std::vector<double> p;                          // p_t^k
    std::vector<std::array<double, 2>> gradients;   // d p_t^k / d(w1, w2)
};

struct DetScan {
    std::vector<double> w1;   // grid axis 1
    std::vector<double> w2;   // grid axis 2
    Eigen::MatrixXd det;      // det(i, j) at (w1[i], w2[j])
    struct Cell {
        std::size_t i = 0, j = 0;  // lower-left corner of a sign-change cell
    };
    std::vector<Cell> sign_changes;
};

/// P(w + sqrt(T-t) Z in cone), Z standard bivariate normal; adaptive
/// quadrature of the one-dimensional boundary integral, abs tolerance 1e-10.
double cone_probability(const std::array<double, 2>& w, double t, double maturity,
                        const Cone& cone);

/// Closed-form gradient of cone_probability with respect to w.
std::array<double, 2> cone_probability_gradient(const std::array<double, 2>& w, double t,
                                                double maturity, const Cone& cone);

/// Monte-Carlo estimate of the same probability; works for any partition
/// dimension in principle but is not gradient-certified. Used as an oracle.
double cone_probability_mc(const std::array<double, 2>& w, double t, double maturity,
                           const Cone& cone, std::size_t samples, RngStream& rng);

/// Mixture weights p_t^k over the spec's cone partition, with gradients.
WeightsAndGradients mixture_weights(const MixtureSpec& spec, const DriverState& state);

/// Monte-Carlo weight evaluator behind the same interface. Works for any
/// partition dimension in principle, but carries sampling error and no
/// gradients: not certified, intended for oracles and n > 2 experiments.
std::vector<double> mixture_weights_mc(const MixtureSpec& spec, const DriverState& state,
                                       std::size_t samples, RngStream& rng);

/// x_t^k = x_k exp(-sigma_k^2 t / 2 + sigma_k b).
std::vector<double> spot_factors(const MixtureSpec& spec, const DriverState& state);

/// h_t(w, b): forward price of the underlying followed by the n option forwards.
Eigen::VectorXd price_map(const MixtureSpec& spec, const DriverState& state);

/// Model forward price of a call at an arbitrary strike.
double price_at_strike(const MixtureSpec& spec, const DriverState& state, double strike);

/// Analytic Jacobian of h_t at the state (n = 2).
JacobianMatrix price_jacobian(const MixtureSpec& spec, const DriverState& state);

/// det h_t' on a rectangular (w1, w2) grid at fixed (t, b), with sign-change cells.
DetScan jacobian_det_scan(const MixtureSpec& spec, double t, double b,
                          const std::vector<double>& w1_grid,
                          const std::vector<double>& w2_grid);

/// Forward density f_t(x) = sum_k p_t^k f_t^k(x) (lognormal components).
double forward_density(const MixtureSpec& spec, const DriverState& state, double x);

/// P(S_T <= x | state), by adaptive quadrature of forward_density.
double forward_cdf(const MixtureSpec& spec, const DriverState& state, double x);

/// Stochastic-exponential volatility of the density: components i = 1..n are
/// the weight-gradient terms, component n+1 the log-moneyness term.
Eigen::VectorXd density_volatility(const MixtureSpec& spec, const DriverState& state, double x);

}  // namespace fdp
