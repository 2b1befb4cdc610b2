#include "fdp/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fdp/black.hpp"
#include "fdp/math.hpp"
#include "fdp/parallel.hpp"

namespace fdp {

Eigen::Vector3d ParticleCloud::mean() const {
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    if (particles.empty()) return m;
    if (weights.empty()) {
        for (const auto& p : particles) m += p;
        return m / static_cast<double>(particles.size());
    }
    for (std::size_t j = 0; j < particles.size(); ++j) m += weights[j] * particles[j];
    return m;
}

Eigen::Vector3d ParticleCloud::sd() const {
    const Eigen::Vector3d m = mean();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    if (particles.size() < 2) return v;
    if (weights.empty()) {
        for (const auto& p : particles) v += (p - m).cwiseAbs2();
        v /= static_cast<double>(particles.size());
    } else {
        for (std::size_t j = 0; j < particles.size(); ++j)
            v += weights[j] * (particles[j] - m).cwiseAbs2();
    }
    return v.cwiseSqrt();
}

double ParticleCloud::effective_sample_size() const {
    if (weights.empty()) return static_cast<double>(particles.size());
    double s2 = 0.0;
    for (double w : weights) s2 += w * w;
    return 1.0 / s2;
}

namespace {

struct GaussianLogDensity {
    Eigen::Matrix3d inverse;
    double log_norm;  // log((2 pi)^{3/2} sqrt(det))

    explicit GaussianLogDensity(const Eigen::Matrix3d& cov) {
        const Eigen::LLT<Eigen::Matrix3d> llt(cov);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("filter covariance must be symmetric positive definite");
        inverse = llt.solve(Eigen::Matrix3d::Identity());
        const Eigen::Matrix3d L = llt.matrixL();
        log_norm = 1.5 * std::log(2.0 * kPi) + std::log(L(0, 0)) + std::log(L(1, 1)) +
                   std::log(L(2, 2));
    }

    double operator()(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) const {
        const Eigen::Vector3d d = y - mu;
        return -0.5 * d.dot(inverse * d) - log_norm;
    }
};

/// Multinomial draw of n indices from normalized weights (inverse CDF).
std::vector<std::size_t> multinomial(const std::vector<double>& weights, std::size_t n,
                                     RngStream& rng) {
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        acc += weights[j];
        cdf[j] = acc;
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        idx[i] = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (idx[i] >= weights.size()) idx[i] = weights.size() - 1;
    }
    return idx;
}

/// Systematic (stratified single-uniform) resampling; lower variance than
/// multinomial, offered as an option.
std::vector<std::size_t> systematic(const std::vector<double>& weights, std::size_t n,
                                    RngStream& rng) {
    std::vector<std::size_t> idx(n);
    const double step = 1.0 / static_cast<double>(n);
    double u = rng.uniform() * step;
    double acc = weights[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (u > acc && j + 1 < weights.size()) acc += weights[++j];
        idx[i] = j;
        u += step;
    }
    return idx;
}

/// Normalizes log weights in place; throws on total underflow.
void normalize_log_weights(std::vector<double>& logw, const char* stage) {
    double m = -std::numeric_limits<double>::infinity();
    for (double lw : logw) m = std::max(m, lw);
    if (!std::isfinite(m))
        throw WeightCollapseError(std::string("apf_step: all ") + stage +
                                  " weights underflowed (model/price mismatch)");
    double sum = 0.0;
    for (auto& lw : logw) {
        lw = std::exp(lw - m);
        sum += lw;
    }
    for (auto& lw : logw) lw /= sum;
}

struct StepOutput {
    ParticleCloud resampled;
    ParticleCloud posterior;  // tilde particles with second-stage weights
    std::vector<Eigen::VectorXd> posterior_prices;
};

StepOutput apf_step_full(const MixtureSpec& spec, const ParticleCloud& cloud,
                         const Eigen::VectorXd& y_next, double t_next,
                         const GaussianLogDensity& like1, const GaussianLogDensity& like2,
                         RngStream& rng, bool use_systematic = false) {
    const auto resample = [use_systematic](const std::vector<double>& w, std::size_t n,
                                           RngStream& r) {
        return use_systematic ? systematic(w, n, r) : multinomial(w, n, r);
    };
    const std::size_t r = cloud.particles.size();
    if (r == 0) throw std::invalid_argument("apf_step: empty cloud");
    const double dt = t_next - cloud.t;
    if (!(dt > 0.0)) throw std::invalid_argument("apf_step: t_next must exceed cloud time");

    // (2) first-stage look-ahead weights at the propagated-less means h(alpha_j)
    std::vector<double> log_theta(r);
    std::vector<Eigen::VectorXd> h_old(r);
    parallel_for(r, [&](std::size_t j) {
        const auto& a = cloud.particles[j];
        h_old[j] = price_map(spec, {a(0), a(1), a(2), t_next});
        log_theta[j] = like1(y_next, h_old[j]);
        if (!cloud.weights.empty()) log_theta[j] += std::log(cloud.weights[j]);
    });
    std::vector<double> lambda = log_theta;
    normalize_log_weights(lambda, "first-stage");

    // (3) index resampling
    const auto parents = resample(lambda, r, rng);

    // (4) diffusion; per-particle substreams derived from one fresh key so the
    // parallel propagation is schedule-independent
    const std::uint64_t diffusion_key = rng.next_u64();
    std::vector<Eigen::Vector3d> tilde(r);
    parallel_for(r, [&](std::size_t j) {
        RngStream sub(diffusion_key, j + 1);
        tilde[j] = cloud.particles[parents[j]] +
                   std::sqrt(dt) * Eigen::Vector3d(sub.gaussian(), sub.gaussian(), sub.gaussian());
    });

    // (5) second-stage weights: sigma2 likelihood at the moved particle over
    // the parent's sigma1 likelihood
    std::vector<double> log_w(r);
    std::vector<Eigen::VectorXd> h_new(r);
    parallel_for(r, [&](std::size_t j) {
        h_new[j] = price_map(spec, {tilde[j](0), tilde[j](1), tilde[j](2), t_next});
        log_w[j] = like2(y_next, h_new[j]) - like1(y_next, h_old[parents[j]]);
    });
    std::vector<double> pi = log_w;
    normalize_log_weights(pi, "second-stage");

    // (6) final resampling
    const auto idx = resample(pi, r, rng);

    StepOutput out;
    out.posterior.t = t_next;
    out.posterior.stream_id = cloud.stream_id;
    out.posterior.particles = std::move(tilde);
    out.posterior.weights = pi;
    out.posterior_prices = std::move(h_new);
    out.resampled.t = t_next;
    out.resampled.stream_id = cloud.stream_id;
    out.resampled.particles.resize(r);
    for (std::size_t j = 0; j < r; ++j) out.resampled.particles[j] = out.posterior.particles[idx[j]];
    return out;
}

}  // namespace

ParticleCloud apf_step(const MixtureSpec& spec, const ParticleCloud& cloud,
                       const Eigen::VectorXd& y_next, double t_next,
                       const Eigen::Matrix3d& sigma1, const Eigen::Matrix3d& sigma2,
                       RngStream& rng) {
    const GaussianLogDensity like1(sigma1), like2(sigma2);
    return apf_step_full(spec, cloud, y_next, t_next, like1, like2, rng).resampled;
}

Eigen::Matrix3d increment_covariance(const PricePath& series) {
    const std::size_t n = series.prices.size();
    if (n < 3) throw std::invalid_argument("increment_covariance: need >= 3 observations");
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    std::vector<Eigen::Vector3d> incr(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        incr[k] = series.prices[k + 1].head(3) - series.prices[k].head(3);
        mean += incr[k];
    }
    mean /= static_cast<double>(n - 1);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& d : incr) cov += (d - mean) * (d - mean).transpose();
    return cov / static_cast<double>(n - 2);
}

namespace {

void attach_error_stats(TrackResult& result, const PricePath& series) {
    const std::size_t n_contracts = static_cast<std::size_t>(series.prices.front().size());
    result.mean_abs_error_vs_forward.assign(n_contracts, 0.0);
    result.rmse_vs_forward.assign(n_contracts, 0.0);
    const std::size_t steps = result.steps.size();
    for (std::size_t c = 0; c < n_contracts; ++c) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double rel = (result.steps[k].prices(static_cast<Eigen::Index>(c)) -
                                series.prices[k](static_cast<Eigen::Index>(c))) /
                               series.prices[k](0);
            sum += std::abs(rel);
            sum2 += rel * rel;
        }
        result.mean_abs_error_vs_forward[c] = sum / static_cast<double>(steps);
        result.rmse_vs_forward[c] = std::sqrt(sum2 / static_cast<double>(steps));
    }
}

}  // namespace

TrackResult linearized_track(const MixtureSpec& spec, const PricePath& series) {
    if (series.prices.size() < 2) throw std::invalid_argument("linearized_track: short series");
    TrackResult result;
    Eigen::Vector3d estimate = Eigen::Vector3d::Zero();

    TrackStep first;
    first.t = series.times.front();
    first.estimate = estimate;
    first.prices = price_map(spec, {0.0, 0.0, 0.0, series.times.front()});
    result.steps.push_back(first);

    for (std::size_t k = 1; k < series.prices.size(); ++k) {
        const double t = series.times[k];
        TrackStep step;
        step.t = t;
        const JacobianMatrix jac =
            price_jacobian(spec, {estimate(0), estimate(1), estimate(2), t});
        step.condition_number = jac.condition;
        if (!(jac.condition < 1e12)) {
            step.flagged_singular = true;  // singular step: carry the estimate forward
        } else {
            const Eigen::Vector3d dy = series.prices[k].head(3) - series.prices[k - 1].head(3);
            estimate += jac.matrix.partialPivLu().solve(dy);
        }
        step.estimate = estimate;
        step.prices = price_map(spec, {estimate(0), estimate(1), estimate(2), t});
        result.steps.push_back(step);
    }
    attach_error_stats(result, series);
    return result;
}

FilterRun apf_run(const MixtureSpec& spec, const PricePath& series,
                  const FilterSettings& settings) {
    if (series.prices.size() < 2) throw std::invalid_argument("apf_run: short series");
    FilterRun run;
    run.sigma1 = settings.sigma1_explicit ? *settings.sigma1_explicit
                                          : increment_covariance(series);
    run.sigma2 = settings.sigma2_explicit ? *settings.sigma2_explicit : run.sigma1;
    const GaussianLogDensity like1(run.sigma1), like2(run.sigma2);

    ParticleCloud cloud;
    cloud.t = series.times.front();
    cloud.particles.assign(settings.particles, Eigen::Vector3d::Zero());
    cloud.stream_id = settings.seed;
    run.clouds.push_back(cloud);
    run.posterior.push_back(cloud);

    TrackStep first;
    first.t = cloud.t;
    first.estimate = Eigen::Vector3d::Zero();
    first.prices = price_map(spec, {0.0, 0.0, 0.0, cloud.t});
    first.ess = static_cast<double>(settings.particles);
    run.track.steps.push_back(first);

    RngStream resample_rng(settings.seed, 0xA5A5A5A5ULL);
    for (std::size_t k = 1; k < series.prices.size(); ++k) {
        auto out = apf_step_full(spec, cloud, series.prices[k], series.times[k], like1, like2,
                                 resample_rng, settings.systematic_resampling);
        TrackStep step;
        step.t = series.times[k];
        step.estimate = out.posterior.mean();
        step.spread = out.posterior.sd();
        step.ess = out.posterior.effective_sample_size();
        Eigen::VectorXd price = Eigen::VectorXd::Zero(series.prices[k].size());
        for (std::size_t j = 0; j < out.posterior.particles.size(); ++j)
            price += out.posterior.weights[j] * out.posterior_prices[j];
        step.prices = price;
        run.track.steps.push_back(step);

        cloud = out.resampled;
        run.clouds.push_back(cloud);
        run.posterior.push_back(out.posterior);
    }
    attach_error_stats(run.track, series);
    return run;
}

Eigen::VectorXd filtered_prices(const MixtureSpec& spec, const ParticleCloud& cloud) {
    if (cloud.particles.empty()) throw std::invalid_argument("filtered_prices: empty cloud");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec.n + 1);
    for (std::size_t j = 0; j < cloud.particles.size(); ++j) {
        const auto& a = cloud.particles[j];
        const double w =
            cloud.weights.empty() ? 1.0 / static_cast<double>(cloud.particles.size())
                                  : cloud.weights[j];
        acc += w * price_map(spec, {a(0), a(1), a(2), cloud.t});
    }
    return acc;
}

std::vector<SmilePoint> filtered_smile(const MixtureSpec& spec, const ParticleCloud& cloud,
                                       const std::vector<double>& strike_grid) {
    if (!(cloud.t < spec.maturity))
        throw std::domain_error("filtered_smile: cloud time at or past maturity");
    const double tau = spec.maturity - cloud.t;
    const std::size_t r = cloud.particles.size();

    double forward = 0.0;
    std::vector<double> calls(strike_grid.size(), 0.0);
    for (std::size_t j = 0; j < r; ++j) {
        const auto& a = cloud.particles[j];
        const double w = cloud.weights.empty() ? 1.0 / static_cast<double>(r) : cloud.weights[j];
        const DriverState state{a(0), a(1), a(2), cloud.t};
        const auto wg = mixture_weights(spec, state);
        const auto xt = spot_factors(spec, state);
        for (std::size_t k = 0; k < xt.size(); ++k) {
            forward += w * wg.p[k] * xt[k];
            for (std::size_t s = 0; s < strike_grid.size(); ++s)
                calls[s] += w * wg.p[k] *
                            black_forward_price(xt[k], spec.sigma[k], strike_grid[s], tau);
        }
    }

    std::vector<SmilePoint> smile(strike_grid.size());
    for (std::size_t s = 0; s < strike_grid.size(); ++s) {
        smile[s].strike = strike_grid[s];
        try {
            smile[s].vol = implied_vol(forward, strike_grid[s], tau, calls[s]);
            smile[s].inverted = true;
        } catch (const NoSolutionError&) {
            smile[s].vol = std::numeric_limits<double>::quiet_NaN();
            smile[s].inverted = false;
        }
    }
    return smile;
}

}  // namespace fdp
