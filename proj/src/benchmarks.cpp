#include "ivhedge/benchmarks.hpp"

#include "ivhedge/errors.hpp"
#include "ivhedge/stochastics.hpp"

namespace ivhedge {

SurfacePoint surface_point(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q) {
    if (!(tau > 0.0)) {
        throw DomainError("option maturity must be positive");
    }
    const double tau_c = clamp_to_surface(tau);
    const double M_c = moneyness(S, K, r, q, tau_c);
    SurfacePoint p;
    p.tau = tau;
    p.M = moneyness(S, K, r, q, tau);
    p.sigma = iv(M_c, tau_c, beta);
    p.dsigma_dM = dsigma_dM(M_c, tau_c, beta);
    return p;
}

double bs_d1(double S, double K, double tau, double sigma, double r, double q) {
    return (std::log(S / K) + (r - q + 0.5 * sigma * sigma) * tau) / (sigma * std::sqrt(tau));
}

double bs_call(double S, double K, double tau, double sigma, double r, double q) {
    if (!(S > 0.0) || !(K > 0.0) || !(tau > 0.0) || !(sigma > 0.0)) {
        throw DomainError("Black-Scholes price requires positive S, K, tau and sigma");
    }
    const double d1 = bs_d1(S, K, tau, sigma, r, q);
    const double d2 = d1 - sigma * std::sqrt(tau);
    return S * std::exp(-q * tau) * normal_cdf(d1) - K * std::exp(-r * tau) * normal_cdf(d2);
}

double price_option(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q) {
    const SurfacePoint p = surface_point(S, K, tau, beta, r, q);
    return bs_call(S, K, tau, p.sigma, r, q);
}

double bs_delta(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q) {
    const SurfacePoint p = surface_point(S, K, tau, beta, r, q);
    return std::exp(-q * tau) * normal_cdf(bs_d1(S, K, tau, p.sigma, r, q));
}

double leland_sigma(double sigma, double kappa, double lambda) {
    if (!(lambda > 0.0) || !(kappa >= 0.0)) {
        throw DomainError("Leland delta requires lambda > 0 and kappa >= 0");
    }
    const double adj = 1.0 + std::sqrt(2.0 / std::numbers::pi) * 2.0 * kappa * std::sqrt(lambda) / sigma;
    return sigma * std::sqrt(adj);
}

double leland_delta(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q, double kappa,
                    double lambda) {
    const SurfacePoint p = surface_point(S, K, tau, beta, r, q);
    const double sl = kappa == 0.0 ? p.sigma : leland_sigma(p.sigma, kappa, lambda);
    return std::exp(-q * tau) * normal_cdf(bs_d1(S, K, tau, sl, r, q));
}

double si_delta(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q) {
    const SurfacePoint p = surface_point(S, K, tau, beta, r, q);
    const double d1 = p.M / p.sigma + 0.5 * p.sigma * std::sqrt(tau);
    return std::exp(-q * tau) * (normal_cdf(d1) + normal_pdf(d1) * p.dsigma_dM);
}

}  // namespace ivhedge
