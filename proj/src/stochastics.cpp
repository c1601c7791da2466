#include "ivhedge/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ivhedge/errors.hpp"

namespace ivhedge {

NigClassical to_classical(const NigParams& p) {
    if (!(p.phi > 0.0) || !std::isfinite(p.zeta) || !std::isfinite(p.phi)) {
        throw DomainError("NIG tail parameter phi must be positive and finite");
    }
    NigClassical c{};
    const double a2 = p.phi * p.phi + p.zeta * p.zeta;
    c.alpha = std::sqrt(a2);
    c.beta = p.zeta;
    c.gamma = p.phi;
    c.delta = p.phi * p.phi * p.phi / a2;
    c.mu = -p.phi * p.phi * p.zeta / a2;
    return c;
}

double nig_psi(double z, const NigParams& p) {
    if (!(p.phi > 0.0)) {
        throw DomainError("NIG tail parameter phi must be positive");
    }
    const double phi2 = p.phi * p.phi;
    const double a2 = phi2 + p.zeta * p.zeta;
    // w = alpha^2 - (zeta + z)^2 - phi^2 rearranged; phi^2 - phi sqrt(phi^2 - w) = phi w / (phi + sqrt(phi^2 - w))
    const double w = z * (2.0 * p.zeta + z);
    const double radicand = phi2 - w;
    if (!(radicand > 0.0)) {
        throw DomainError("NIG cumulant argument " + std::to_string(z) + " outside convergence strip");
    }
    return phi2 / a2 * (-p.zeta * z + p.phi * w / (p.phi + std::sqrt(radicand)));
}

double nig_pdf(double x, const NigParams& p) {
    const NigClassical c = to_classical(p);
    const double dx = x - c.mu;
    const double s = std::sqrt(c.delta * c.delta + dx * dx);
    const double arg = c.alpha * s;
    if (arg > 700.0) {
        return 0.0;
    }
    const double log_f = std::log(c.alpha * c.delta / (std::numbers::pi * s)) +
                         std::log(std::cyl_bessel_k(1.0, arg)) + c.delta * c.gamma + c.beta * dx;
    return std::exp(log_f);
}

namespace {

// 5-point Gauss-Legendre on [-1, 1]
constexpr std::array<double, 5> kGlNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                            0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kGlWeights = {0.2369268850561891, 0.4786286704993665,
                                              0.5688888888888889, 0.4786286704993665,
                                              0.2369268850561891};

constexpr double kTailDensity = 1e-18;

}  // namespace

NigDistribution::NigDistribution(const NigParams& p, double grid_step)
    : params_(p), classical_(to_classical(p)), step_(grid_step) {
    double lo = -10.0;
    double hi = 10.0;
    while (nig_pdf(lo, p) > kTailDensity && lo > -400.0) lo -= 5.0;
    while (nig_pdf(hi, p) > kTailDensity && hi < 400.0) hi += 5.0;
    lo_ = lo;
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step_)) + 1;
    cdf_.resize(n);
    pdf_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        pdf_[i] = nig_pdf(lo_ + step_ * static_cast<double>(i), p);
    }
    cdf_[0] = 0.0;
    const double half = 0.5 * step_;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double mid = lo_ + step_ * (static_cast<double>(i) + 0.5);
        double acc = 0.0;
        for (std::size_t k = 0; k < kGlNodes.size(); ++k) {
            acc += kGlWeights[k] * nig_pdf(mid + half * kGlNodes[k], p);
        }
        cdf_[i + 1] = cdf_[i] + half * acc;
    }
    const double total = cdf_.back();
    for (auto& v : cdf_) v /= total;
    for (auto& v : pdf_) v /= total;
}

double NigDistribution::hermite(std::size_t cell, double x) const {
    const double t = (x - (lo_ + step_ * static_cast<double>(cell))) / step_;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * cdf_[cell] + h10 * step_ * pdf_[cell] + h01 * cdf_[cell + 1] +
           h11 * step_ * pdf_[cell + 1];
}

double NigDistribution::cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= grid_hi()) return 1.0;
    auto cell = static_cast<std::size_t>((x - lo_) / step_);
    cell = std::min(cell, cdf_.size() - 2);
    return std::clamp(hermite(cell, x), 0.0, 1.0);
}

double NigDistribution::invert_in_cell(std::size_t cell, double target) const {
    double a = lo_ + step_ * static_cast<double>(cell);
    double b = a + step_;
    const double fa = cdf_[cell];
    const double fb = cdf_[cell + 1];
    double x = fb > fa ? a + (target - fa) / (fb - fa) * step_ : 0.5 * (a + b);
    for (int it = 0; it < 60; ++it) {
        const double f = hermite(cell, x) - target;
        if (std::abs(f) < 1e-14) break;
        if (f > 0.0) b = x; else a = x;
        const double t = (x - (lo_ + step_ * static_cast<double>(cell))) / step_;
        // derivative of the Hermite interpolant
        const double d00 = (6.0 * t * t - 6.0 * t) / step_;
        const double d10 = 3.0 * t * t - 4.0 * t + 1.0;
        const double d01 = -d00;
        const double d11 = 3.0 * t * t - 2.0 * t;
        const double slope = d00 * cdf_[cell] + d10 * pdf_[cell] + d01 * cdf_[cell + 1] +
                             d11 * pdf_[cell + 1];
        double next = slope > 0.0 ? x - f / slope : 0.5 * (a + b);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (b - a < 1e-15) break;
        x = next;
    }
    return x;
}

double NigDistribution::quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("NIG quantile requires 0 < u < 1");
    }
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return grid_hi();
    auto cell = static_cast<std::size_t>(std::distance(cdf_.begin(), it));
    cell = cell == 0 ? 0 : cell - 1;
    return invert_in_cell(cell, u);
}

double NigDistribution::quantile_from_normal(double z) const {
    const double u = normal_cdf(z);
    if (u <= 0.0) return lo_;
    if (u >= 1.0) return grid_hi();
    return quantile(u);
}

double NigDistribution::sample(NormalSource& src) const {
    // Michael-Schucany-Haas draw of V ~ IG(mean delta/gamma, shape delta^2),
    // then X = mu + beta V + sqrt(V) N.
    const double m = classical_.delta / classical_.gamma;
    const double lambda = classical_.delta * classical_.delta;
    const double nu = src();
    const double y = nu * nu;
    const double x = m + m * m * y / (2.0 * lambda) -
                     m / (2.0 * lambda) * std::sqrt(4.0 * m * lambda * y + m * m * y * y);
    const double v = src.uniform() <= m / (m + x) ? x : m * m / x;
    return classical_.mu + classical_.beta * v + std::sqrt(v) * src();
}

CopulaSpec::CopulaSpec() : corr_(Matrix6::Identity()), chol_(Matrix6::Identity()) {}

CopulaSpec::CopulaSpec(const Matrix6& corr) : corr_(corr) {
    if (!corr.allFinite()) {
        throw ConfigError("copula correlation matrix has non-finite entries");
    }
    for (int i = 0; i < 6; ++i) {
        if (std::abs(corr(i, i) - 1.0) > 1e-12) {
            throw ConfigError("copula correlation matrix must have unit diagonal");
        }
        for (int j = 0; j < i; ++j) {
            if (std::abs(corr(i, j) - corr(j, i)) > 1e-12) {
                throw ConfigError("copula correlation matrix must be symmetric");
            }
        }
    }
    Eigen::LLT<Matrix6> llt(corr);
    if (llt.info() != Eigen::Success) {
        throw ConfigError("copula correlation matrix is not positive definite");
    }
    chol_ = llt.matrixL();
}

Vector6 copula_normals(NormalSource& src, const CopulaSpec& c) {
    Vector6 n;
    for (int k = 0; k < 6; ++k) n(k) = src();
    return c.chol() * n;
}

InnovationVector copula_sample(NormalSource& src, const CopulaSpec& c,
                               const std::array<const NigDistribution*, 6>& marginals) {
    const Vector6 z = copula_normals(src, c);
    InnovationVector eps;
    for (int k = 0; k < 6; ++k) eps(k) = marginals[k]->quantile_from_normal(z(k));
    return eps;
}

}  // namespace ivhedge
