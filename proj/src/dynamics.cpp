#include "fdp/dynamics.hpp"

#include <cmath>
#include <limits>

#include "fdp/black.hpp"
#include "fdp/math.hpp"
#include "fdp/quadrature.hpp"

namespace fdp {

namespace {

constexpr double kQuadTol = 1e-10;
constexpr double kTailCut = 8.5;  // Phi(-8.5) ~ 9.5e-18, below tolerance

void require_before_maturity(const MixtureSpec& spec, const DriverState& state) {
    if (!(state.t < spec.maturity))
        throw std::domain_error("dynamics: evaluation requires t < maturity");
    if (spec.cones.widths.empty())
        throw std::invalid_argument("dynamics: spec carries no cone partition (n != 2?)");
}

struct SubCone {
    std::size_t parent;
    double phi;
    double theta;
};

std::vector<SubCone> split(const Cone& cone, std::size_t parent = 0) {
    std::vector<SubCone> out;
    const int pieces = static_cast<int>(std::ceil(cone.theta / (0.5 * kPi) - 1e-12));
    const double theta = cone.theta / std::max(pieces, 1);
    for (int i = 0; i < pieces; ++i)
        out.push_back({parent, cone.phi + i * theta, theta});
    return out;
}

std::vector<SubCone> split_partition(const ConePartition& cones) {
    std::vector<SubCone> out;
    for (std::size_t k = 0; k < cones.widths.size(); ++k) {
        auto sub = split({cones.base_angles[k], cones.widths[k]}, k);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

// clockwise rotation by phi, mapping the cone's base ray onto the x-axis
std::array<double, 2> rotate_cw(const std::array<double, 2>& w, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    return {c * w[0] + s * w[1], -s * w[0] + c * w[1]};
}

/// P(w + s Z in base cone [0, theta]), theta in (0, pi/2]. The x-integral is
/// explicit; the remaining y-integral is taken in units of s around w_y.
double base_cone_probability(const std::array<double, 2>& w, double s, double theta) {
    const double cot = std::cos(theta) / std::sin(theta);
    const double lo = std::max(-w[1] / s, -kTailCut);
    if (lo >= kTailCut) return 0.0;
    auto f = [&](double u) {
        return norm_pdf(u) * norm_cdf((w[0] - (w[1] + s * u) * cot) / s);
    };
    return integrate(f, lo, kTailCut, kQuadTol).value;
}

/// Closed-form gradient of the base-cone probability in the rotated frame.
std::array<double, 2> base_cone_gradient(const std::array<double, 2>& w, double s, double theta) {
    const double sin_t = std::sin(theta), cos_t = std::cos(theta);
    const double along = (w[0] * cos_t + w[1] * sin_t) / s;   // projection on the theta-ray
    const double across = (w[0] * sin_t - w[1] * cos_t) / s;  // distance off the theta-ray
    const double slant = norm_pdf(across) * norm_cdf(along) / s;
    const double dx = sin_t * slant;
    const double dy = norm_pdf(w[1] / s) * norm_cdf(w[0] / s) / s - cos_t * slant;
    return {dx, dy};
}

double spot_factor(double x, double sigma, double t, double b) {
    return x * std::exp(-0.5 * sigma * sigma * t + sigma * b);
}

}  // namespace

double cone_probability(const std::array<double, 2>& w, double t, double maturity,
                        const Cone& cone) {
    if (!(t < maturity)) throw std::domain_error("cone_probability: t < maturity required");
    const double s = std::sqrt(maturity - t);
    double p = 0.0;
    for (const auto& sub : split(cone))
        p += base_cone_probability(rotate_cw(w, sub.phi), s, sub.theta);
    return p;
}

std::array<double, 2> cone_probability_gradient(const std::array<double, 2>& w, double t,
                                                double maturity, const Cone& cone) {
    if (!(t < maturity)) throw std::domain_error("cone_probability_gradient: t < maturity required");
    const double s = std::sqrt(maturity - t);
    std::array<double, 2> g{0.0, 0.0};
    for (const auto& sub : split(cone)) {
        const auto local = base_cone_gradient(rotate_cw(w, sub.phi), s, sub.theta);
        const double c = std::cos(sub.phi), sn = std::sin(sub.phi);
        g[0] += c * local[0] - sn * local[1];
        g[1] += sn * local[0] + c * local[1];
    }
    return g;
}

double cone_probability_mc(const std::array<double, 2>& w, double t, double maturity,
                           const Cone& cone, std::size_t samples, RngStream& rng) {
    const double s = std::sqrt(maturity - t);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = w[0] + s * rng.gaussian();
        const double y = w[1] + s * rng.gaussian();
        double angle = std::atan2(y, x);
        if (angle < cone.phi) angle += 2.0 * kPi;
        if (angle >= cone.phi && angle <= cone.phi + cone.theta) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples);
}

WeightsAndGradients mixture_weights(const MixtureSpec& spec, const DriverState& state) {
    require_before_maturity(spec, state);
    const double s = std::sqrt(spec.maturity - state.t);
    const std::array<double, 2> w{state.w1, state.w2};

    WeightsAndGradients out;
    out.p.assign(spec.p0.size(), 0.0);
    out.gradients.assign(spec.p0.size(), {0.0, 0.0});
    for (const auto& sub : split_partition(spec.cones)) {
        const auto local_w = rotate_cw(w, sub.phi);
        out.p[sub.parent] += base_cone_probability(local_w, s, sub.theta);
        const auto local_g = base_cone_gradient(local_w, s, sub.theta);
        const double c = std::cos(sub.phi), sn = std::sin(sub.phi);
        out.gradients[sub.parent][0] += c * local_g[0] - sn * local_g[1];
        out.gradients[sub.parent][1] += sn * local_g[0] + c * local_g[1];
    }
    return out;
}

std::vector<double> mixture_weights_mc(const MixtureSpec& spec, const DriverState& state,
                                       std::size_t samples, RngStream& rng) {
    require_before_maturity(spec, state);
    const double s = std::sqrt(spec.maturity - state.t);
    std::vector<std::size_t> hits(spec.p0.size(), 0);
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = state.w1 + s * rng.gaussian();
        const double y = state.w2 + s * rng.gaussian();
        double angle = std::atan2(y, x);
        if (angle < 0.0) angle += 2.0 * kPi;
        for (std::size_t k = 0; k < spec.cones.widths.size(); ++k) {
            if (angle >= spec.cones.base_angles[k] &&
                angle < spec.cones.base_angles[k] + spec.cones.widths[k]) {
                ++hits[k];
                break;
            }
        }
    }
    std::vector<double> p(spec.p0.size());
    for (std::size_t k = 0; k < p.size(); ++k)
        p[k] = static_cast<double>(hits[k]) / static_cast<double>(samples);
    return p;
}

std::vector<double> spot_factors(const MixtureSpec& spec, const DriverState& state) {
    std::vector<double> out(spec.grid.size());
    for (std::size_t k = 0; k < spec.grid.size(); ++k)
        out[k] = spot_factor(spec.grid[k], spec.sigma[k], state.t, state.b);
    return out;
}

Eigen::VectorXd price_map(const MixtureSpec& spec, const DriverState& state) {
    const auto wg = mixture_weights(spec, state);
    const auto xt = spot_factors(spec, state);
    const double tau = spec.maturity - state.t;

    Eigen::VectorXd g = Eigen::VectorXd::Zero(spec.n + 1);
    for (std::size_t k = 0; k < xt.size(); ++k) {
        g(0) += wg.p[k] * xt[k];
        for (int j = 0; j < spec.n; ++j)
            g(j + 1) += wg.p[k] * black_forward_price(xt[k], spec.sigma[k],
                                                      spec.strikes[static_cast<std::size_t>(j)], tau);
    }
    return g;
}

double price_at_strike(const MixtureSpec& spec, const DriverState& state, double strike) {
    const auto wg = mixture_weights(spec, state);
    const auto xt = spot_factors(spec, state);
    const double tau = spec.maturity - state.t;
    double g = 0.0;
    for (std::size_t k = 0; k < xt.size(); ++k)
        g += wg.p[k] * black_forward_price(xt[k], spec.sigma[k], strike, tau);
    return g;
}

JacobianMatrix price_jacobian(const MixtureSpec& spec, const DriverState& state) {
    const auto wg = mixture_weights(spec, state);
    const auto xt = spot_factors(spec, state);
    const double tau = spec.maturity - state.t;
    const double sqrt_tau = std::sqrt(tau);

    JacobianMatrix out;
    out.matrix.setZero();
    for (std::size_t k = 0; k < xt.size(); ++k) {
        const double sig = spec.sigma[k];
        // row 0: the forward
        out.matrix(0, 0) += wg.gradients[k][0] * xt[k];
        out.matrix(0, 1) += wg.gradients[k][1] * xt[k];
        out.matrix(0, 2) += wg.p[k] * sig * xt[k];
        for (int j = 0; j < spec.n; ++j) {
            const double strike = spec.strikes[static_cast<std::size_t>(j)];
            const double price = black_forward_price(xt[k], sig, strike, tau);
            const double d1 = std::log(xt[k] / strike) / (sig * sqrt_tau) + 0.5 * sig * sqrt_tau;
            out.matrix(j + 1, 0) += wg.gradients[k][0] * price;
            out.matrix(j + 1, 1) += wg.gradients[k][1] * price;
            out.matrix(j + 1, 2) += wg.p[k] * norm_cdf(d1) * sig * xt[k];
        }
    }
    const Eigen::PartialPivLU<Eigen::Matrix3d> lu(out.matrix);
    out.determinant = lu.determinant();
    // 2-norm condition from the eigenvalues of J^T J
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(out.matrix.transpose() * out.matrix);
    const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(2);
    out.condition = lo > 0.0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
    return out;
}

DetScan jacobian_det_scan(const MixtureSpec& spec, double t, double b,
                          const std::vector<double>& w1_grid,
                          const std::vector<double>& w2_grid) {
    DetScan scan;
    scan.w1 = w1_grid;
    scan.w2 = w2_grid;
    scan.det.resize(static_cast<Eigen::Index>(w1_grid.size()),
                    static_cast<Eigen::Index>(w2_grid.size()));
    for (std::size_t i = 0; i < w1_grid.size(); ++i)
        for (std::size_t j = 0; j < w2_grid.size(); ++j) {
            const DriverState state{w1_grid[i], w2_grid[j], b, t};
            scan.det(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                price_jacobian(spec, state).determinant;
        }
    for (std::size_t i = 0; i + 1 < w1_grid.size(); ++i)
        for (std::size_t j = 0; j + 1 < w2_grid.size(); ++j) {
            const double d00 = scan.det(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double d10 = scan.det(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(j));
            const double d01 = scan.det(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1));
            const double d11 =
                scan.det(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(j + 1));
            const double lo = std::min(std::min(d00, d10), std::min(d01, d11));
            const double hi = std::max(std::max(d00, d10), std::max(d01, d11));
            if (lo < 0.0 && hi > 0.0) scan.sign_changes.push_back({i, j});
        }
    return scan;
}

namespace {

double lognormal_component(const MixtureSpec& spec, const DriverState& state, double x,
                           std::size_t k) {
    const double sig = spec.sigma[k];
    const double tau = spec.maturity - state.t;
    const double z = (std::log(x / spec.grid[k]) + 0.5 * sig * sig * spec.maturity -
                      sig * state.b) /
                     (sig * std::sqrt(tau));
    return norm_pdf(z) / (x * sig * std::sqrt(tau));
}

}  // namespace

double forward_density(const MixtureSpec& spec, const DriverState& state, double x) {
    require_before_maturity(spec, state);
    if (x <= 0.0) throw std::domain_error("forward_density: x must be positive");
    const auto wg = mixture_weights(spec, state);
    double f = 0.0;
    for (std::size_t k = 0; k < wg.p.size(); ++k)
        f += wg.p[k] * lognormal_component(spec, state, x, k);
    return f;
}

double forward_cdf(const MixtureSpec& spec, const DriverState& state, double x) {
    require_before_maturity(spec, state);
    if (x <= 0.0) return 0.0;
    const auto wg = mixture_weights(spec, state);
    const auto xt = spot_factors(spec, state);
    const double tau = spec.maturity - state.t;
    // integrate the density from a lower cutoff far in the left tail
    double lo = x;
    for (std::size_t k = 0; k < xt.size(); ++k) {
        const double width = spec.sigma[k] * std::sqrt(tau);
        lo = std::min(lo, xt[k] * std::exp(-0.5 * width * width - 10.0 * width));
    }
    if (lo >= x) return 0.0;
    auto f = [&](double u) {
        double v = 0.0;
        for (std::size_t k = 0; k < wg.p.size(); ++k)
            v += wg.p[k] * lognormal_component(spec, state, u, k);
        return v;
    };
    return integrate(f, lo, x, 1e-9).value;
}

Eigen::VectorXd density_volatility(const MixtureSpec& spec, const DriverState& state, double x) {
    require_before_maturity(spec, state);
    const auto wg = mixture_weights(spec, state);
    const double tau = spec.maturity - state.t;

    double f = 0.0;
    Eigen::VectorXd num = Eigen::VectorXd::Zero(3);
    for (std::size_t k = 0; k < wg.p.size(); ++k) {
        const double fk = lognormal_component(spec, state, x, k);
        f += wg.p[k] * fk;
        num(0) += wg.gradients[k][0] * fk;
        num(1) += wg.gradients[k][1] * fk;
        const double sig = spec.sigma[k];
        const double moneyness =
            (std::log(x / spec.grid[k]) + 0.5 * sig * sig * spec.maturity - sig * state.b) /
            (sig * tau);
        num(2) += wg.p[k] * fk * moneyness;
    }
    return num / f;
}

}  // namespace fdp
