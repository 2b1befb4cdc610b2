#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "fdp/dynamics.hpp"
#include "fdp/simulation.hpp"

namespace fdp {

/// Weighted driver hypotheses at one time step. After resampling the weights
/// are uniform; a cloud carrying explicit weights represents the second-stage
/// (pre-resampling) posterior.
struct ParticleCloud {
    double t = 0.0;
    std::vector<Eigen::Vector3d> particles;
    std::vector<double> weights;  // empty = uniform
    std::uint64_t stream_id = 0;

    Eigen::Vector3d mean() const;
    Eigen::Vector3d sd() const;
    double effective_sample_size() const;
};

struct TrackStep {
    double t = 0.0;
    Eigen::Vector3d estimate = Eigen::Vector3d::Zero();
    Eigen::Vector3d spread = Eigen::Vector3d::Zero();  // posterior sd (filter only)
    Eigen::VectorXd prices;                            // reconstructed price vector
    double condition_number = 0.0;                     // linearization diagnostic
    double ess = 0.0;                                  // filter diagnostic
    bool flagged_singular = false;
};

struct TrackResult {
    std::vector<TrackStep> steps;
    /// Per contract: mean_k |reconstructed - observed| / forward, and the
    /// RMSE analogue; populated when observations are supplied.
    std::vector<double> mean_abs_error_vs_forward;
    std::vector<double> rmse_vs_forward;
};

enum class CovariancePolicy {
    kSimulatedIncrements,  // sample covariance of the supplied (simulated) series increments
    kObservedIncrements,   // same computation on observed market increments
};

struct FilterSettings {
    std::size_t particles = 250;
    CovariancePolicy sigma1_policy = CovariancePolicy::kObservedIncrements;
    std::optional<Eigen::Matrix3d> sigma1_explicit;
    std::optional<Eigen::Matrix3d> sigma2_explicit;  // defaults to sigma1
    std::uint64_t seed = 0;
    bool systematic_resampling = false;  // default is draw-with-replacement
};

/// Iterates the local linear approximation
///   x_{k+1} = x_k + [h'_{t_{k+1}}(x_k)]^{-1} (y_{k+1} - y_k),  x_0 = 0.
/// Steps whose Jacobian condition exceeds 1e12 are flagged and carry the
/// previous estimate forward.
TrackResult linearized_track(const MixtureSpec& spec, const PricePath& series);

/// One auxiliary-particle-filter update from cloud.t to t_next given the
/// observation y_next: first-stage look-ahead weights under sigma1, index
/// resampling, sqrt(dt) diffusion, second-stage reweighting under sigma2,
/// final resampling. Throws WeightCollapseError when every weight underflows.
ParticleCloud apf_step(const MixtureSpec& spec, const ParticleCloud& cloud,
                       const Eigen::VectorXd& y_next, double t_next,
                       const Eigen::Matrix3d& sigma1, const Eigen::Matrix3d& sigma2,
                       RngStream& rng);

struct FilterRun {
    TrackResult track;
    std::vector<ParticleCloud> clouds;       // resampled cloud per step
    std::vector<ParticleCloud> posterior;    // second-stage weighted cloud per step
    Eigen::Matrix3d sigma1 = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d sigma2 = Eigen::Matrix3d::Zero();
};

/// Runs the filter over the whole series (all particles start at the origin).
/// Deterministic for a fixed (seed, particle count, series).
FilterRun apf_run(const MixtureSpec& spec, const PricePath& series,
                  const FilterSettings& settings);

/// Weight-averaged price map over the cloud's particles.
Eigen::VectorXd filtered_prices(const MixtureSpec& spec, const ParticleCloud& cloud);

struct SmilePoint {
    double strike = 0.0;
    double vol = 0.0;      // on the spec's clock
    bool inverted = false;
};

/// Weighted-average model call prices per strike, inverted to implied vols
/// against the filtered forward. Failed inversions are reported per strike.
std::vector<SmilePoint> filtered_smile(const MixtureSpec& spec, const ParticleCloud& cloud,
                                       const std::vector<double>& strike_grid);

/// Sample covariance of the price increments of a series.
Eigen::Matrix3d increment_covariance(const PricePath& series);

}  // namespace fdp
