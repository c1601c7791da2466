#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ivhedge/pathset.hpp"
#include "ivhedge/stochastics.hpp"
#include "ivhedge/surface.hpp"

namespace ivhedge {

/// NGARCH block of the excess-return equation.
struct ReturnBlock {
    double kappa = 0.0;
    double gamma = 0.0;
    double a = 0.0;
    double omega = 0.0;
    NigParams nig;
};

/// Autoregressive / NGARCH block of one surface coefficient.
struct BetaBlock {
    double alpha = 0.0;
    Eigen::Matrix<double, 1, 5> theta = Eigen::Matrix<double, 1, 5>::Zero();  ///< coefficients on beta_{t,1..5}
    double sigma_table = 0.0;  ///< tabulated sigma*sqrt(252); unused for beta_1 (surface-anchored)
    double kappa = 0.0;
    double a = 0.0;
    double gamma = 0.0;
    NigParams nig;
};

/// How the tabulated sigma*sqrt(252) enters the variance recursion of beta_2..beta_5.
enum class SigmaUnits {
    Annualized,  ///< sigma_i = table value, matching h annualized through sqrt(h * delta_t)
    PerPeriod,   ///< sigma_i = table value / sqrt(252)
};

struct JivrParams {
    int version = 1;
    double lambda = 0.0;
    ReturnBlock ret;
    std::array<BetaBlock, 5> beta;
    double omega1 = 0.0;
    double nu = 0.0;
    CopulaSpec copula;
    double r = 0.0266;
    double q = 0.0177;
    double delta_t = 1.0 / 252.0;
    SigmaUnits sigma_units = SigmaUnits::Annualized;

    /// Long-run level sigma_i used in h_{t+1,i} = sigma_i^2 + ... for i = 1..4 (beta_2..beta_5).
    double sigma(int i) const;
    Eigen::Matrix<double, 5, 5> theta() const;
    Vector5<double> alpha() const;

    /// Throws ConfigError on out-of-range persistence or volatility parameters.
    void validate() const;
};

JivrParams jivr_params_from_json_text(const std::string& text);
std::string jivr_params_to_json_text(const JivrParams& p);
JivrParams load_jivr_params(const std::filesystem::path& file);

/// One date of the JIVR state.
struct MarketState {
    double S = 100.0;
    SurfaceCoeffs beta = SurfaceCoeffs::Zero();
    double beta2_lag = 0.0;
    double h_R = 0.0;
    Vector5<double> h = Vector5<double>::Zero();

    /// Throws NumericalError unless S, h_R and all h_i are positive and everything is finite.
    void validate() const;
};

struct StepResult {
    double R_next;
    MarketState next;
};

/// Parameters plus the six marginal NIG laws with their cached quantile tables.
class JivrModel {
public:
    explicit JivrModel(JivrParams p);

    const JivrParams& params() const { return params_; }
    const NigDistribution& marginal(int k) const { return marginals_[static_cast<std::size_t>(k)]; }

    /// (omega_R * sigma(0, 1/12, beta))^2
    double return_anchor(const SurfaceCoeffs& beta) const;
    /// (omega_1 * sigma(0, 1/12, beta))^2
    double beta1_anchor(const SurfaceCoeffs& beta) const;

    InnovationVector draw_innovation(NormalSource& src) const;

    /// Fixed point beta* = alpha + Theta beta* + nu e_2 beta*_2. Throws ConfigError if singular.
    SurfaceCoeffs var_fixed_point() const;

    /// Fixed-point surface with variances at their anchors.
    MarketState unconditional_state(double S0 = 100.0) const;

private:
    JivrParams params_;
    std::vector<NigDistribution> marginals_;
    std::array<const NigDistribution*, 6> marginal_ptrs_{};
};

/// Equity risk premium xi_{t+1} for next-period return variance h_next (annualized).
double equity_premium(double h_next, const JivrModel& model);

/// One transition. `eps_prev` (time-t innovations) drives the variance updates,
/// `eps_next` (time-t+1 innovations) drives the return and coefficient shocks.
StepResult step(const MarketState& state, const InnovationVector& eps_prev,
                const InnovationVector& eps_next, const JivrModel& model);

/// A historical or synthetic collection of initial states.
struct PoolRow {
    std::string date;
    SurfaceCoeffs beta = SurfaceCoeffs::Zero();
    double beta2_lag = 0.0;
    double h_R = 0.0;
    Vector5<double> h = Vector5<double>::Zero();
    std::string cluster;

    MarketState state(double S0 = 100.0) const;
};

struct StatePool {
    std::vector<PoolRow> rows;
    bool has_cluster = false;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    /// Rows whose cluster label equals `label`.
    StatePool filter(const std::string& label) const;
};

/// Reads `date,beta1..beta5,beta2_lag,h_R,h1..h5[,cluster]`. Throws ConfigError
/// naming the offending row on missing columns, non-finite values or non-positive variances.
StatePool load_state_pool(const std::filesystem::path& file);
void save_state_pool(const StatePool& pool, const std::filesystem::path& file);

/// One long path started at the unconditional state; after `burn_in` days, every
/// `stride`-th state is kept until `n_rows` rows are collected.
StatePool make_synthetic_pool(const JivrModel& model, int burn_in, int n_rows, std::uint64_t seed,
                              int stride = 5);

struct SimulateOptions {
    int threads = 1;
    bool record_innovations = false;
    std::string cluster;  ///< restrict initial states to this cluster when non-empty
    double S0 = 100.0;
};

/// Simulates `n_paths` independent paths of `horizon` daily steps. Path i draws
/// everything (pool row, the pre-sample innovation, the T step innovations)
/// from RngStream(seed, i), so output does not depend on `threads`.
PathSet simulate(const JivrModel& model, const StatePool& pool, int horizon, Eigen::Index n_paths,
                 std::uint64_t seed, const SimulateOptions& options = {});

/// Lognormal market with drift `mu` and volatility `sigma` (both annual) sampled
/// every `step_years`, carried in a PathSet with a flat surface beta = (sigma, 0, 0, 0, 0).
PathSet simulate_black_scholes(double mu, double sigma, double r, double q, int horizon,
                               double step_years, Eigen::Index n_paths, std::uint64_t seed,
                               double S0 = 100.0, int threads = 1);

/// Historical state series `date,S,beta1..beta5,beta2_lag,h_R,h1..h5` as a single path.
/// Throws ConfigError listing the dates of rows with missing values and any
/// calendar gap longer than `max_gap_days`.
PathSet load_history(const std::filesystem::path& file, double r = 0.0266, double q = 0.0177,
                     int max_gap_days = 7);

}  // namespace ivhedge
