#include "fdp/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fdp/black.hpp"
#include "fdp/math.hpp"

namespace fdp {

namespace {

void require_well_formed(const MarketSnapshot& snap) {
    const std::size_t n = snap.strikes.size();
    if (n == 0 || snap.option_forwards.size() != n)
        throw std::invalid_argument("snapshot: strikes/forwards size mismatch");
    if (snap.forward <= 0.0) throw std::invalid_argument("snapshot: forward must be positive");
    for (std::size_t j = 0; j < n; ++j) {
        if (snap.option_forwards[j] < 0.0)
            throw std::invalid_argument("snapshot: negative option forward");
        if (j > 0 && snap.strikes[j] <= snap.strikes[j - 1])
            throw std::invalid_argument("snapshot: strikes not strictly increasing");
    }
}

}  // namespace

MarketSnapshot MarketSnapshot::with_strikes(const std::vector<double>& subset) const {
    MarketSnapshot out = *this;
    out.strikes.clear();
    out.option_forwards.clear();
    for (double k : subset) {
        auto it = std::find(strikes.begin(), strikes.end(), k);
        if (it == strikes.end())
            throw std::invalid_argument("snapshot: requested strike not present");
        out.strikes.push_back(k);
        out.option_forwards.push_back(option_forwards[static_cast<std::size_t>(it - strikes.begin())]);
    }
    return out;
}

void MixtureSpec::validate() const {
    const std::size_t m = static_cast<std::size_t>(n) + 2;
    if (strikes.size() != static_cast<std::size_t>(n) || grid.size() != m ||
        sigma.size() != m || p0.size() != m)
        throw std::invalid_argument("MixtureSpec: inconsistent sizes");
    if (grid.front() >= strikes.front() || grid.back() <= strikes.back())
        throw std::invalid_argument("MixtureSpec: x_1 < K_1 < ... < K_n < x_{n+2} violated");
    for (int k = 2; k <= n + 1; ++k)
        if (grid[static_cast<std::size_t>(k - 1)] != strikes[static_cast<std::size_t>(k - 2)])
            throw std::invalid_argument("MixtureSpec: interior grid must equal strikes");
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (sigma[k] <= 0.0) throw std::invalid_argument("MixtureSpec: sigma must be positive");
        if (p0[k] < 0.0) throw std::invalid_argument("MixtureSpec: negative weight");
        sum += p0[k];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("MixtureSpec: weights must sum to 1");
    if (!cones.widths.empty()) {
        if (cones.widths.size() != m || cones.base_angles.size() != m)
            throw std::invalid_argument("MixtureSpec: cone partition size mismatch");
        double total = 0.0;
        for (double th : cones.widths) {
            if (th <= 0.0) throw std::invalid_argument("MixtureSpec: cone width must be positive");
            total += th;
        }
        if (std::abs(total - 2.0 * kPi) > 1e-9)
            throw std::invalid_argument("MixtureSpec: cone widths must sum to 2*pi");
    }
}

ArbitrageCheck check_static_no_arbitrage(const MarketSnapshot& snap) {
    require_well_formed(snap);
    const std::size_t n = snap.strikes.size();
    // K_0 = 0, G_0 = forward
    std::vector<double> K(n + 1), G(n + 1);
    K[0] = 0.0;
    G[0] = snap.forward;
    for (std::size_t j = 0; j < n; ++j) {
        K[j + 1] = snap.strikes[j];
        G[j + 1] = snap.option_forwards[j];
    }

    ArbitrageCheck out;
    for (std::size_t j = 1; j <= n; ++j) {
        const double ratio = (G[j - 1] - G[j]) / (K[j] - K[j - 1]);
        ArbitrageCheck::Condition c;
        c.label = "vertical_spread_j" + std::to_string(j);
        c.slack = std::min(ratio, 1.0 - ratio);
        c.pass = c.slack >= 0.0;
        out.pass = out.pass && c.pass;
        out.conditions.push_back(std::move(c));
    }
    for (std::size_t j = 1; j + 1 <= n; ++j) {
        const double value = G[j - 1] - (K[j + 1] - K[j - 1]) / (K[j + 1] - K[j]) * G[j] +
                             (K[j] - K[j - 1]) / (K[j + 1] - K[j]) * G[j + 1];
        ArbitrageCheck::Condition c;
        c.label = "butterfly_j" + std::to_string(j);
        c.slack = value;
        c.pass = value >= 0.0;
        out.pass = out.pass && c.pass;
        out.conditions.push_back(std::move(c));
    }
    return out;
}

std::pair<double, double> grid_bounds(const MarketSnapshot& snap) {
    require_well_formed(snap);
    const std::size_t n = snap.strikes.size();
    if (n < 2) throw std::invalid_argument("grid_bounds: need n >= 2");
    const double G0 = snap.forward;
    const double G1 = snap.option_forwards[0], G2 = snap.option_forwards[1];
    const double K1 = snap.strikes[0], K2 = snap.strikes[1];
    const double den1 = (K2 - K1) - (G1 - G2);
    if (den1 <= 0.0)
        throw DivisionDegenerateError("grid_bounds: x_1 bound degenerate (spread at unit slope)");
    const double x1_max = (G0 * (K2 - K1) + G2 * K1 - G1 * K2) / den1;

    const double Gn1 = snap.option_forwards[n - 2], Gn = snap.option_forwards[n - 1];
    const double Kn1 = snap.strikes[n - 2], Kn = snap.strikes[n - 1];
    if (Gn1 == Gn)
        throw DivisionDegenerateError("grid_bounds: x_top bound at infinity (G_{n-1} = G_n)");
    const double x_top_min = (Gn1 * Kn - Gn * Kn1) / (Gn1 - Gn);
    return {x1_max, x_top_min};
}

std::vector<double> solve_discrete_probabilities(const MarketSnapshot& snap, double x1,
                                                 double x_top) {
    require_well_formed(snap);
    const std::size_t n = snap.strikes.size();
    if (n < 2) throw std::invalid_argument("solve_discrete_probabilities: need n >= 2");
    // 1-based views with K_0 = 0, G_0 = forward
    std::vector<double> K(n + 1), G(n + 1);
    K[0] = 0.0;
    G[0] = snap.forward;
    for (std::size_t j = 0; j < n; ++j) {
        K[j + 1] = snap.strikes[j];
        G[j + 1] = snap.option_forwards[j];
    }

    std::vector<double> p(n + 2);
    p[0] = (K[1] + G[1] - G[0]) / (K[1] - x1);
    p[1] = (x1 * (G[1] - G[2] - (K[2] - K[1])) + G[0] * (K[2] - K[1]) - G[1] * K[2] + G[2] * K[1]) /
           ((K[1] - x1) * (K[2] - K[1]));
    for (std::size_t k = 3; k <= n; ++k) {
        p[k - 1] = G[k - 2] / (K[k - 1] - K[k - 2]) -
                   G[k - 1] * (K[k] - K[k - 2]) / ((K[k - 1] - K[k - 2]) * (K[k] - K[k - 1])) +
                   G[k] / (K[k] - K[k - 1]);
    }
    p[n] = G[n - 1] / (K[n] - K[n - 1]) -
           G[n] * (x_top - K[n - 1]) / ((K[n] - K[n - 1]) * (x_top - K[n]));
    p[n + 1] = G[n] / (x_top - K[n]);

    for (std::size_t k = 0; k < p.size(); ++k)
        if (p[k] < -1e-12)
            throw InfeasiblePricesError("solve_discrete_probabilities: p_" + std::to_string(k + 1) +
                                        " = " + std::to_string(p[k]) + " < 0");
    return p;
}

Eigen::MatrixXd build_extended_system(const std::vector<double>& grid,
                                      const std::vector<double>& sigma,
                                      const std::vector<double>& strikes, double maturity) {
    const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
    if (sigma.size() != grid.size() || strikes.size() + 2 != grid.size())
        throw std::invalid_argument("build_extended_system: size mismatch");
    Eigen::MatrixXd A(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        A(0, k) = 1.0;
        A(1, k) = grid[static_cast<std::size_t>(k)];  // zero-strike call
        for (std::size_t j = 0; j < strikes.size(); ++j)
            A(static_cast<Eigen::Index>(j) + 2, k) =
                black_forward_price(grid[static_cast<std::size_t>(k)],
                                    sigma[static_cast<std::size_t>(k)], strikes[j], maturity);
    }
    return A;
}

namespace {

double condition_number(const Eigen::MatrixXd& A) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    const double smallest = sv(sv.size() - 1);
    if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / smallest;
}

}  // namespace

CalibrationResult calibrate_mixture(const MarketSnapshot& snap, const std::vector<double>& grid,
                                    const std::vector<double>& sigma, double maturity) {
    require_well_formed(snap);
    const std::size_t n = snap.strikes.size();
    if (grid.size() != n + 2) throw std::invalid_argument("calibrate_mixture: grid size != n+2");

    Eigen::MatrixXd A = build_extended_system(grid, sigma, snap.strikes, maturity);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n) + 2);
    b(0) = 1.0;
    b(1) = snap.forward;
    for (std::size_t j = 0; j < n; ++j) b(static_cast<Eigen::Index>(j) + 2) = snap.option_forwards[j];

    CalibrationResult out;
    out.condition_number = condition_number(A);
    if (!std::isfinite(out.condition_number) || out.condition_number > 1e15)
        throw SingularSystemError("calibrate_mixture: system matrix numerically singular");

    const Eigen::VectorXd p = A.partialPivLu().solve(b);

    out.spec.n = static_cast<int>(n);
    out.spec.strikes = snap.strikes;
    out.spec.grid = grid;
    out.spec.sigma = sigma;
    out.spec.maturity = maturity;
    out.spec.p0.resize(n + 2);
    for (std::size_t k = 0; k < n + 2; ++k) {
        out.spec.p0[k] = p(static_cast<Eigen::Index>(k));
        if (p(static_cast<Eigen::Index>(k)) < -1e-10) {
            out.out_of_range = true;
            out.negative_components.push_back(static_cast<int>(k));
        }
    }
    if (!out.out_of_range && n == 2) {
        // clip solver noise so downstream cone widths stay positive
        for (auto& w : out.spec.p0) w = std::max(w, 1e-300);
        out.spec.cones = cone_partition_from_p0(out.spec.p0);
    }
    return out;
}

double max_uniform_sigma(const MarketSnapshot& snap, const std::vector<double>& grid,
                         double maturity) {
    auto feasible = [&](double s) {
        std::vector<double> sig(grid.size(), s);
        try {
            return !calibrate_mixture(snap, grid, sig, maturity).out_of_range;
        } catch (const SingularSystemError&) {
            return false;
        }
    };
    double lo = 1e-4, hi = 1.0;
    if (!feasible(lo))
        throw InfeasibleAtFloorError("max_uniform_sigma: infeasible already at sigma = 1e-4");
    if (feasible(hi)) return hi;
    while (hi - lo > 1e-5) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

bool PriceRange::contains(const Eigen::VectorXd& prices) const {
    if (prices.size() + 1 != matrix.rows())
        throw std::invalid_argument("PriceRange::contains: wrong price dimension");
    Eigen::VectorXd b(matrix.rows());
    b(0) = 1.0;
    b.tail(prices.size()) = prices;
    const Eigen::VectorXd p = matrix.partialPivLu().solve(b);
    return (p.array() >= -1e-10).all();
}

PriceRange price_range_extremes(const Eigen::MatrixXd& system) {
    PriceRange out;
    out.matrix = system;
    for (Eigen::Index k = 0; k < system.cols(); ++k)
        out.extremes.push_back(system.col(k).tail(system.rows() - 1));
    return out;
}

ConePartition cone_partition_from_p0(const std::vector<double>& p0) {
    if (p0.size() != 4)
        throw std::invalid_argument("cone_partition_from_p0: dynamic construction is n = 2 only");
    ConePartition cones;
    double angle = 0.0;
    for (double w : p0) {
        if (w <= 0.0) throw std::invalid_argument("cone_partition_from_p0: weights must be positive");
        cones.base_angles.push_back(angle);
        cones.widths.push_back(2.0 * kPi * w);
        angle += 2.0 * kPi * w;
    }
    return cones;
}

}  // namespace fdp
