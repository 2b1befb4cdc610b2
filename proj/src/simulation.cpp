#include "fdp/simulation.hpp"

#include <cmath>

#include "fdp/black.hpp"
#include "fdp/parallel.hpp"

namespace fdp {

std::vector<std::vector<Eigen::Vector3d>> simulate_driver(std::size_t n_paths,
                                                          std::size_t n_steps, double dt,
                                                          std::uint64_t seed) {
    std::vector<std::vector<Eigen::Vector3d>> paths(n_paths);
    const double step_sd = std::sqrt(dt);
    parallel_for(n_paths, [&](std::size_t i) {
        RngStream rng(seed, i);
        auto& path = paths[i];
        path.resize(n_steps + 1);
        path[0].setZero();
        for (std::size_t k = 1; k <= n_steps; ++k)
            path[k] = path[k - 1] + step_sd * Eigen::Vector3d(rng.gaussian(), rng.gaussian(),
                                                              rng.gaussian());
    });
    return paths;
}

std::vector<PricePath> simulate_prices(const MixtureSpec& spec,
                                       const std::vector<std::vector<Eigen::Vector3d>>& drivers,
                                       double dt) {
    std::vector<PricePath> out(drivers.size());
    parallel_for(drivers.size(), [&](std::size_t i) {
        auto& path = out[i];
        path.driver = drivers[i];
        path.times.resize(drivers[i].size());
        path.prices.resize(drivers[i].size());
        for (std::size_t k = 0; k < drivers[i].size(); ++k) {
            const double t = static_cast<double>(k) * dt;
            path.times[k] = t;
            const auto& w = drivers[i][k];
            path.prices[k] = price_map(spec, {w(0), w(1), w(2), t});
        }
    });
    return out;
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da <= 0.0 || db <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num / std::sqrt(da * db);
}

}  // namespace

StylizedStats stylized_correlations(const MixtureSpec& spec,
                                    const std::vector<PricePath>& paths) {
    if (spec.n < 2) throw std::invalid_argument("stylized_correlations: need >= 2 options");
    StylizedStats stats;
    stats.strikes = spec.strikes;
    const std::size_t ns = spec.strikes.size();

    // per-path correlations computed in parallel, then reduced in path order
    std::vector<std::vector<double>> per_path(paths.size());
    std::vector<char> kept(paths.size(), 0);
    parallel_for(paths.size(), [&](std::size_t i) {
        const auto& path = paths[i];
        const std::size_t steps = path.times.size();
        std::vector<std::vector<double>> vols(ns, std::vector<double>(steps));
        for (std::size_t k = 0; k < steps; ++k) {
            const double tau = spec.maturity - path.times[k];
            const double fwd = path.prices[k](0);
            for (std::size_t s = 0; s < ns; ++s) {
                try {
                    vols[s][k] = implied_vol(fwd, spec.strikes[s], tau, path.prices[k](s + 1));
                } catch (const NoSolutionError&) {
                    return;  // path dropped
                }
            }
        }
        std::vector<double> logret(steps - 1);
        for (std::size_t k = 0; k + 1 < steps; ++k)
            logret[k] = std::log(path.prices[k + 1](0) / path.prices[k](0));
        std::vector<double> corr(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            std::vector<double> dvol(steps - 1);
            double moved = 0.0;
            for (std::size_t k = 0; k + 1 < steps; ++k) {
                dvol[k] = vols[s][k + 1] - vols[s][k];
                moved = std::max(moved, std::abs(dvol[k]));
            }
            if (moved < 1e-8) return;  // constant implied vol, undefined correlation
            corr[s] = pearson(logret, dvol);
            if (std::isnan(corr[s])) return;
        }
        per_path[i] = std::move(corr);
        kept[i] = 1;
    });

    stats.correlations.assign(ns, {});
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!kept[i]) {
            ++stats.dropped_paths;
            continue;
        }
        for (std::size_t s = 0; s < ns; ++s) stats.correlations[s].push_back(per_path[i][s]);
    }

    stats.means.assign(ns, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = 0; s < ns; ++s) {
        if (stats.correlations[s].empty()) continue;
        double m = 0.0;
        for (double c : stats.correlations[s]) m += c;
        stats.means[s] = m / static_cast<double>(stats.correlations[s].size());
    }

    constexpr std::size_t kBins = 50;
    stats.histogram_edges.resize(kBins + 1);
    for (std::size_t b = 0; b <= kBins; ++b)
        stats.histogram_edges[b] = -1.0 + 2.0 * static_cast<double>(b) / kBins;
    stats.histogram_counts.assign(ns, std::vector<std::size_t>(kBins, 0));
    for (std::size_t s = 0; s < ns; ++s)
        for (double c : stats.correlations[s]) {
            auto b = static_cast<std::size_t>((c + 1.0) / 2.0 * kBins);
            if (b >= kBins) b = kBins - 1;
            ++stats.histogram_counts[s][b];
        }
    return stats;
}

MartingaleCheck martingale_check(const MixtureSpec& spec, double t, std::size_t n_samples,
                                 std::uint64_t seed) {
    if (!(t > 0.0 && t < spec.maturity))
        throw std::domain_error("martingale_check: need 0 < t < maturity");
    const double sd = std::sqrt(t);
    const std::size_t n_contracts = static_cast<std::size_t>(spec.n) + 1;
    const std::size_t n_weights = spec.p0.size();

    std::vector<Eigen::VectorXd> prices(n_samples);
    std::vector<std::vector<double>> weights(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        RngStream rng(seed, i);
        const DriverState state{sd * rng.gaussian(), sd * rng.gaussian(), sd * rng.gaussian(), t};
        const auto wg = mixture_weights(spec, state);
        weights[i] = wg.p;
        const auto xt = spot_factors(spec, state);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_contracts));
        const double tau = spec.maturity - t;
        for (std::size_t k = 0; k < xt.size(); ++k) {
            g(0) += wg.p[k] * xt[k];
            for (int j = 0; j < spec.n; ++j)
                g(j + 1) += wg.p[k] * black_forward_price(xt[k], spec.sigma[k],
                                                          spec.strikes[static_cast<std::size_t>(j)],
                                                          tau);
        }
        prices[i] = g;
    });

    const Eigen::VectorXd initial = price_map(spec, {0.0, 0.0, 0.0, 0.0});
    MartingaleCheck out;
    for (std::size_t c = 0; c < n_contracts; ++c) {
        double mean = 0.0;
        for (const auto& p : prices) mean += p(static_cast<Eigen::Index>(c));
        mean /= static_cast<double>(n_samples);
        double var = 0.0;
        for (const auto& p : prices) {
            const double d = p(static_cast<Eigen::Index>(c)) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n_samples - 1);
        MartingaleCheck::Row row;
        row.mc_mean = mean;
        row.standard_error = std::sqrt(var / static_cast<double>(n_samples));
        row.z_score = (mean - initial(static_cast<Eigen::Index>(c))) / row.standard_error;
        out.contracts.push_back(row);
    }
    for (std::size_t k = 0; k < n_weights; ++k) {
        double mean = 0.0;
        for (const auto& w : weights) mean += w[k];
        mean /= static_cast<double>(n_samples);
        double var = 0.0;
        for (const auto& w : weights) {
            const double d = w[k] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n_samples - 1);
        MartingaleCheck::Row row;
        row.mc_mean = mean;
        row.standard_error = std::sqrt(var / static_cast<double>(n_samples));
        row.z_score = (mean - spec.p0[k]) / row.standard_error;
        out.weights.push_back(row);
    }
    return out;
}

}  // namespace fdp
