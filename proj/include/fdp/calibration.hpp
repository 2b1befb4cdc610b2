#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fdp/errors.hpp"

namespace fdp {

/// Cleaned market state at one date. Prices are forward prices (undiscounted):
/// `forward` is the forward of the underlying, option_forwards[j] corresponds
/// to strikes[j]. `tau` is the calendar year fraction to maturity (used for
/// discounting and market-side implied vols only; the mixture has its own clock).
struct MarketSnapshot {
    double tau = 0.0;
    double rate = 0.0;
    double forward = 0.0;
    std::vector<double> strikes;          // strictly increasing
    std::vector<double> option_forwards;  // same length as strikes
    std::string date;                     // ISO-8601 provenance
    std::string source;

    MarketSnapshot with_strikes(const std::vector<double>& subset) const;
};

struct ArbitrageCheck {
    struct Condition {
        std::string label;
        double slack = 0.0;  // distance to violation; negative = violated
        bool pass = false;
    };
    std::vector<Condition> conditions;
    bool pass = true;
};

/// Angular partition of the plane into contiguous cones anchored at the origin,
/// starting at the positive x-axis. Widths sum to 2*pi.
struct ConePartition {
    std::vector<double> base_angles;  // phi_k
    std::vector<double> widths;       // theta_k
};

/// Calibrated lognormal-mixture model. All times (maturity, evaluation times,
/// driver time steps) share one clock; sigma are volatilities per sqrt(unit)
/// of that clock. The sample configs use the option-life clock, maturity = 1.
struct MixtureSpec {
    int n = 0;                     // number of option strikes
    std::vector<double> strikes;   // K_1..K_n
    std::vector<double> grid;      // x_1..x_{n+2}, with x_k = K_{k-1} for k=2..n+1
    std::vector<double> sigma;     // sigma_1..sigma_{n+2}
    std::vector<double> p0;        // initial weights, sum to 1
    double maturity = 1.0;         // T on the model clock
    ConePartition cones;           // n = 2 only

    void validate() const;
};

/// Extreme price vectors b_k = A e_k with the probability row dropped.
struct PriceRange {
    Eigen::MatrixXd matrix;                 // full (n+2)x(n+2) system matrix
    std::vector<Eigen::VectorXd> extremes;  // n+2 vectors of length n+1

    /// A candidate (forward, option forwards...) vector is reachable iff the
    /// solution of A p = (1, b) is componentwise >= -1e-10.
    bool contains(const Eigen::VectorXd& prices) const;
};

struct CalibrationResult {
    MixtureSpec spec;
    double condition_number = 0.0;
    bool out_of_range = false;               // some weight < -1e-10
    std::vector<int> negative_components;    // offending indices (0-based)
};

/// Vertical-spread and butterfly conditions on the snapshot prices.
ArbitrageCheck check_static_no_arbitrage(const MarketSnapshot& snap);

/// Right-hand sides of the sharp feasibility bounds on the outer grid points:
/// largest admissible x_1 and smallest admissible x_{n+2}.
/// Throws DivisionDegenerateError when the x_{n+2} bound degenerates
/// (G_{n-1} = G_n, bound at infinity).
std::pair<double, double> grid_bounds(const MarketSnapshot& snap);

/// Closed-form probability vector for the discrete model on the grid
/// (x_1, K_1, ..., K_n, x_top); backward-substitution formulas.
std::vector<double> solve_discrete_probabilities(const MarketSnapshot& snap, double x1,
                                                 double x_top);

/// System matrix of the lognormal-extended model: row 1 all ones, row 2 the
/// zero-strike call (= x_k), row j+2 the Black forward price at strike K_j.
Eigen::MatrixXd build_extended_system(const std::vector<double>& grid,
                                      const std::vector<double>& sigma,
                                      const std::vector<double>& strikes, double maturity);

/// Solves A p = (1, G0, G1..Gn) by partial-pivot LU; reports the condition
/// number and flags OutOfRange when any weight is below -1e-10.
CalibrationResult calibrate_mixture(const MarketSnapshot& snap, const std::vector<double>& grid,
                                    const std::vector<double>& sigma, double maturity = 1.0);

/// Supremum of the uniform sigma keeping the calibrated weights nonnegative,
/// by bisection on [1e-4, 1] to absolute tolerance 1e-5.
double max_uniform_sigma(const MarketSnapshot& snap, const std::vector<double>& grid,
                         double maturity = 1.0);

PriceRange price_range_extremes(const Eigen::MatrixXd& system);

/// Contiguous cones with widths 2*pi*p0_k starting at angle 0 (n = 2 only);
/// makes P(W_T in D_k | W_0 = 0) = p0_k.
ConePartition cone_partition_from_p0(const std::vector<double>& p0);

}  // namespace fdp
