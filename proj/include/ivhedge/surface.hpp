#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "ivhedge/errors.hpp"

namespace ivhedge {

template <typename Scalar>
using Vector5 = Eigen::Matrix<Scalar, 5, 1>;

/// Factor loadings (beta_1..beta_5) of the implied-volatility surface at one date.
using SurfaceCoeffs = Vector5<double>;

/// Fixed constants of the five-factor surface.
struct SurfaceConstants {
    static constexpr double t_max = 5.0;           ///< longest maturity covered (years)
    static constexpr double t_min = 6.0 / 252.0;   ///< shortest maturity covered (years)
    static constexpr double t_conv = 0.25;         ///< term-structure decay scale (years)
    static constexpr double iv_floor = 0.01;       ///< minimum implied volatility
};

/// Option coordinates on the surface.
struct OptionCoordinates {
    double moneyness;
    double tau;
};

namespace detail {

template <typename Scalar>
void check_maturity(Scalar tau) {
    // Small slack so that (T - t) / 252 computed in floating point at exactly six days passes.
    const Scalar lo = Scalar(SurfaceConstants::t_min) * (Scalar(1) - Scalar(1e-12));
    const Scalar hi = Scalar(SurfaceConstants::t_max) * (Scalar(1) + Scalar(1e-12));
    if (!(tau >= lo && tau <= hi)) {
        throw DomainError("surface maturity " + std::to_string(static_cast<double>(tau)) +
                          " outside [t_min, t_max]");
    }
}

}  // namespace detail

/// Log-forward moneyness scaled by the square root of maturity:
/// M = log(S e^{(r-q) tau} / K) / sqrt(tau).
template <typename Scalar>
Scalar moneyness(Scalar S, Scalar K, Scalar r, Scalar q, Scalar tau) {
    using std::log;
    using std::sqrt;
    if (!(S > 0) || !(K > 0) || !(tau > 0)) {
        throw DomainError("moneyness requires S > 0, K > 0 and tau > 0");
    }
    return (log(S / K) + (r - q) * tau) / sqrt(tau);
}

/// The five surface factors (level, term slope, moneyness slope, smile attenuation, smirk).
template <typename Scalar>
Vector5<Scalar> factor_values(Scalar M, Scalar tau) {
    using std::exp;
    using std::log;
    using std::sqrt;
    using std::tanh;
    detail::check_maturity(tau);
    const Scalar log_tau = log(tau / Scalar(SurfaceConstants::t_max));
    Vector5<Scalar> f;
    f(0) = Scalar(1);
    f(1) = exp(-sqrt(tau / Scalar(SurfaceConstants::t_conv)));
    f(2) = M >= Scalar(0) ? M : tanh(M);
    f(3) = (Scalar(1) - exp(-M * M)) * log_tau;
    f(4) = M < Scalar(0) ? (Scalar(1) - exp(Scalar(27) * M * M * M)) * log_tau : Scalar(0);
    return f;
}

/// Surface value before the floor is applied.
template <typename Scalar>
Scalar iv_unfloored(Scalar M, Scalar tau, const Vector5<Scalar>& beta) {
    return beta.dot(factor_values(M, tau));
}

/// Implied volatility sigma(M, tau; beta), floored at SurfaceConstants::iv_floor.
template <typename Scalar>
Scalar iv(Scalar M, Scalar tau, const Vector5<Scalar>& beta) {
    const Scalar raw = iv_unfloored(M, tau, beta);
    return raw > Scalar(SurfaceConstants::iv_floor) ? raw : Scalar(SurfaceConstants::iv_floor);
}

/// Derivative of the surface with respect to moneyness. Zero where the floor binds.
template <typename Scalar>
Scalar dsigma_dM(Scalar M, Scalar tau, const Vector5<Scalar>& beta) {
    using std::exp;
    using std::log;
    using std::tanh;
    if (iv_unfloored(M, tau, beta) <= Scalar(SurfaceConstants::iv_floor)) {
        return Scalar(0);
    }
    const Scalar log_tau = log(tau / Scalar(SurfaceConstants::t_max));
    Scalar d = Scalar(0);
    if (M >= Scalar(0)) {
        d += beta(2);
    } else {
        const Scalar th = tanh(M);
        d += beta(2) * (Scalar(1) - th * th);
        d -= beta(4) * Scalar(81) * M * M * exp(Scalar(27) * M * M * M) * log_tau;
    }
    d += beta(3) * Scalar(2) * M * exp(-M * M) * log_tau;
    return d;
}

/// Remaining maturity raised to t_min; the surface is undefined below it.
inline double clamp_to_surface(double tau) {
    return tau < SurfaceConstants::t_min ? SurfaceConstants::t_min : tau;
}

/// Throws DomainError unless all five loadings are finite.
void validate(const SurfaceCoeffs& beta);

}  // namespace ivhedge
