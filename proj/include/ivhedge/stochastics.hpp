#pragma once

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ivhedge/rng.hpp"

namespace ivhedge {

/// Standardized normal-inverse-Gaussian parameters: asymmetry zeta and tail weight phi.
/// The law has zero mean and unit variance for every admissible pair.
struct NigParams {
    double zeta = 0.0;
    double phi = 1.0;
};

/// Classical (alpha, beta, delta, mu) parameters of a standardized NIG law.
struct NigClassical {
    double alpha;
    double beta;
    double delta;
    double mu;
    double gamma;  ///< sqrt(alpha^2 - beta^2) == phi
};

/// Maps (zeta, phi) to the classical parameterization: beta = zeta, gamma = phi,
/// delta and mu chosen for zero mean and unit variance. Throws DomainError if phi <= 0.
NigClassical to_classical(const NigParams& p);

/// Cumulant generating function log E[exp(z eps)]. Throws DomainError outside the strip
/// -sqrt(zeta^2+phi^2) - zeta < z < sqrt(zeta^2+phi^2) - zeta.
double nig_psi(double z, const NigParams& p);

/// Density of the standardized NIG law.
double nig_pdf(double x, const NigParams& p);

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

/// A standard normal source bound to one counter-based stream.
class NormalSource {
public:
    explicit NormalSource(RngStream rng) : rng_(rng) {}
    double operator()() { return dist_(rng_); }
    double uniform() { return rng_.uniform(); }
    RngStream& stream() { return rng_; }

private:
    RngStream rng_;
    std::normal_distribution<double> dist_;
};

/// Standardized NIG law with a cached CDF table for fast quantiles.
///
/// The CDF is tabulated once on a uniform grid wide enough that the tail mass
/// outside it is negligible, integrating the density cell by cell with
/// Gauss-Legendre quadrature. Between nodes the CDF is a cubic Hermite
/// interpolant whose slopes are the density values, which keeps the
/// interpolation error several orders below the 1e-10 inversion tolerance.
/// Immutable after construction.
class NigDistribution {
public:
    explicit NigDistribution(const NigParams& p, double grid_step = 2e-3);

    const NigParams& params() const { return params_; }
    const NigClassical& classical() const { return classical_; }

    double psi(double z) const { return nig_psi(z, params_); }
    double pdf(double x) const { return nig_pdf(x, params_); }
    double cdf(double x) const;

    /// Inverse CDF; |cdf(quantile(u)) - u| < 1e-10. Throws DomainError unless 0 < u < 1.
    double quantile(double u) const;

    /// Quantile of Phi(z) for a standard normal score z, accurate in both tails.
    double quantile_from_normal(double z) const;

    /// Exact draw through the inverse-Gaussian mixing representation.
    double sample(NormalSource& src) const;

    double grid_lo() const { return lo_; }
    double grid_hi() const { return lo_ + step_ * static_cast<double>(cdf_.size() - 1); }

private:
    double hermite(std::size_t cell, double x) const;
    double invert_in_cell(std::size_t cell, double target) const;

    NigParams params_;
    NigClassical classical_;
    double lo_ = 0.0;
    double step_ = 0.0;
    std::vector<double> cdf_;
    std::vector<double> pdf_;
};

/// Draws one standardized NIG variate. Equivalent in law to nig_quantile(U).
inline double nig_sample(NormalSource& src, const NigDistribution& d) { return d.sample(src); }

inline double nig_quantile(double u, const NigDistribution& d) { return d.quantile(u); }

using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

/// Contemporaneous innovations (eps_R, eps_1, ..., eps_5).
using InnovationVector = Vector6;

/// Gaussian copula over the six innovations. Construction validates the
/// correlation matrix and caches its Cholesky factor; throws ConfigError
/// if the matrix is not a symmetric positive definite correlation matrix.
class CopulaSpec {
public:
    CopulaSpec();
    explicit CopulaSpec(const Matrix6& corr);

    const Matrix6& corr() const { return corr_; }
    const Matrix6& chol() const { return chol_; }

private:
    Matrix6 corr_;
    Matrix6 chol_;
};

/// Correlated normal scores z ~ N(0, corr).
Vector6 copula_normals(NormalSource& src, const CopulaSpec& c);

/// One innovation vector: correlated normal scores mapped through Phi and the
/// NIG quantile of each marginal.
InnovationVector copula_sample(NormalSource& src, const CopulaSpec& c,
                               const std::array<const NigDistribution*, 6>& marginals);

}  // namespace ivhedge
