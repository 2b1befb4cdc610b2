#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fdp/dynamics.hpp"

namespace fdp {

/// Time series of (n+1)-dimensional forward price vectors, with the driver
/// path attached when the series is simulated.
struct PricePath {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> prices;
    std::vector<Eigen::Vector3d> driver;  // empty for observed data
};

struct StylizedStats {
    std::vector<double> strikes;
    std::vector<std::vector<double>> correlations;  // per strike, per kept path
    std::vector<double> means;
    std::size_t dropped_paths = 0;
    std::vector<double> histogram_edges;            // 50 uniform bins over [-1, 1]
    std::vector<std::vector<std::size_t>> histogram_counts;
};

struct MartingaleCheck {
    struct Row {
        double mc_mean = 0.0;
        double standard_error = 0.0;
        double z_score = 0.0;
    };
    std::vector<Row> contracts;  // G0, G1, ..., Gn
    std::vector<Row> weights;    // p^1..p^{n+2}
};

/// Independent Gaussian random walks, increments N(0, dt I_3); path i is
/// driven by substream (seed, i), so results do not depend on scheduling.
std::vector<std::vector<Eigen::Vector3d>> simulate_driver(std::size_t n_paths,
                                                          std::size_t n_steps, double dt,
                                                          std::uint64_t seed);

/// Applies the price map along each driver path; times are k dt, k = 0..n_steps.
std::vector<PricePath> simulate_prices(const MixtureSpec& spec,
                                       const std::vector<std::vector<Eigen::Vector3d>>& drivers,
                                       double dt);

/// Per-path Pearson correlation between forward log-returns and implied-vol
/// changes, per strike. Paths with an undefined implied vol anywhere are
/// dropped and counted.
StylizedStats stylized_correlations(const MixtureSpec& spec,
                                    const std::vector<PricePath>& paths);

/// Samples the driver at time t and compares mean prices and weights to t = 0.
MartingaleCheck martingale_check(const MixtureSpec& spec, double t, std::size_t n_samples,
                                 std::uint64_t seed);

}  // namespace fdp
