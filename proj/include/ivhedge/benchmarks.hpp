#pragma once

#include <cmath>
#include <numbers>

#include "ivhedge/surface.hpp"

namespace ivhedge {

/// Volatility and moneyness of an option as read off the surface. The surface is
/// evaluated at max(tau, t_min); `M` and `tau` keep the actual remaining maturity.
struct SurfacePoint {
    double tau;    ///< actual remaining maturity
    double M;      ///< moneyness at the actual maturity
    double sigma;  ///< surface volatility
    double dsigma_dM;
};

SurfacePoint surface_point(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q);

/// Black-Scholes call price with volatility sigma.
double bs_call(double S, double K, double tau, double sigma, double r, double q);
/// d = (log(S/K) + (r - q + sigma^2/2) tau) / (sigma sqrt(tau)).
double bs_d1(double S, double K, double tau, double sigma, double r, double q);

/// Call price at the surface volatility; tau below t_min uses the t_min volatility.
double price_option(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q);

/// Practitioner delta e^{-q tau} Phi(d) at the surface volatility.
double bs_delta(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q);

/// Leland delta with the transaction-cost-adjusted variance
/// sigma~^2 = sigma^2 (1 + sqrt(2/pi) 2 kappa sqrt(lambda) / sigma),
/// `lambda` being the number of rebalancing dates per year.
double leland_delta(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q, double kappa,
                    double lambda);
/// The adjusted volatility used by leland_delta.
double leland_sigma(double sigma, double kappa, double lambda);

/// Smile-implied delta e^{-q tau} (Phi(d1) + phi(d1) dsigma/dM), d1 = M/sigma + sigma sqrt(tau)/2.
double si_delta(double S, double K, double tau, const SurfaceCoeffs& beta, double r, double q);

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace ivhedge
