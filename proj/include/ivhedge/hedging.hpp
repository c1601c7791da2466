#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ivhedge/autodiff.hpp"
#include "ivhedge/pathset.hpp"
#include "ivhedge/rng.hpp"

namespace ivhedge {

/// Policy inputs. V and Delta depend on the strategy's own past actions; the
/// rest are read from the market path.
enum class Feature { V, Delta, Tau, S, Beta1, Beta2, Beta3, Beta4, Beta5, HR, H1, H2, H3, H4, H5 };

std::string feature_name(Feature f);
/// Throws ConfigError on an unknown name.
Feature feature_from_name(const std::string& name);

enum class StateSpace { Full, ReducedTc, ReducedNoTc };

std::string state_space_name(StateSpace s);
StateSpace state_space_from_name(const std::string& name);
/// full: (V, delta, tau, S, beta1..5, h_R, h1..5); reduced_tc: (delta, tau, S, beta1..5, h_R);
/// reduced_no_tc: (tau, S, beta1..5, h_R).
std::vector<Feature> features_for(StateSpace s);

enum class PenaltyKind { MSE, SMSE, CVaR };

struct Penalty {
    PenaltyKind kind = PenaltyKind::MSE;
    double alpha = 0.95;  ///< CVaR level

    /// "mse", "smse", "cvar95", "cvar99", or "cvar<percent>".
    static Penalty parse(const std::string& name);
    std::string name() const;
    bool operator==(const Penalty&) const = default;
};

/// A short European call hedged with the underlying and a cash account.
struct HedgeConfig {
    double strike = 100.0;
    int steps = 63;       ///< rebalancing dates; maturity is steps * PathSet::step_years
    double kappa = 0.0;   ///< proportional transaction cost rate
    double B = 100.0;     ///< borrowing bound
    Penalty penalty;
    StateSpace state_space = StateSpace::ReducedNoTc;
    std::vector<Feature> features;  ///< overrides the state-space list when non-empty
    double leland_lambda = 252.0;   ///< rebalancing dates per year for the Leland benchmark

    std::vector<Feature> input_features() const;
    /// Throws ConfigError on invalid values, and when kappa > 0 is combined with
    /// a state space that omits the current position delta.
    void validate() const;
};

struct PortfolioState {
    double phi = 0.0;    ///< cash carried
    double delta = 0.0;  ///< shares held
    double V = 0.0;      ///< portfolio value
};

/// Self-financing trade at price S: phi = V - new_delta S - kappa S |new_delta - delta|.
PortfolioState rebalance(const PortfolioState& port, double S, double new_delta, double kappa);
/// Value after one period: V = phi e^{r dt} + delta S_next e^{q dt}.
PortfolioState accrue(const PortfolioState& port, double S_next, double r, double q, double dt);
/// Largest position keeping the post-trade cash above -B. `Z` is the proposed
/// position and selects the branch (buying or selling relative to delta_prev).
/// Throws DomainError for kappa = 1 on the selling branch.
double leverage_bound(int t, double V, double S, double delta_prev, double kappa, double B, double V0, double S0,
                      double Z);

/// Per-step view handed to a strategy session.
struct StepInputs {
    int t = 0;
    int steps = 0;
    double tau = 0.0;  ///< remaining maturity in years
    const PathSet* paths = nullptr;
    Eigen::Index first = 0;  ///< first path of the chunk
    Eigen::Index n = 0;      ///< chunk size
    const HedgeConfig* cfg = nullptr;
    Var V;      ///< portfolio value before trading, 1 x n
    Var delta;  ///< current holdings, 1 x n

    /// Raw values of a market feature at this step, 1 x n. Throws UsageError for V and Delta.
    Array market(Feature f) const;
};

/// Per-rollout state (e.g. recurrent memory) of a strategy.
class StrategySession {
public:
    virtual ~StrategySession() = default;
    /// Proposed position Z (1 x n) before the leverage bound.
    virtual Var position(const StepInputs& in) = 0;
};

/// A hedging rule. Implementations are immutable and may be shared across threads.
class Strategy {
public:
    virtual ~Strategy() = default;
    virtual std::string name() const = 0;
    /// Starts a rollout on `tape` for `n` paths. `dropout_rng` is non-null only in training.
    virtual std::unique_ptr<StrategySession> start(Tape& tape, Eigen::Index n, RngStream* dropout_rng) const = 0;
};

/// Differentiable rollout of one chunk of paths.
struct Rollout {
    Var xi;    ///< terminal hedging error, 1 x n (losses positive)
    Var cost;  ///< discounted transaction costs, 1 x n
    Array V0;  ///< initial option premium per path
    /// Filled when requested: holdings and portfolio value per step, n x (steps + 1).
    Eigen::MatrixXd delta_path;
    Eigen::MatrixXd V_path;
    Eigen::MatrixXd phi_path;
};

/// Initial option premium for paths [first, first + n), priced off the t = 0 surface.
Array initial_premium(const PathSet& paths, Eigen::Index first, Eigen::Index n, const HedgeConfig& cfg);

/// Records the hedge of paths [first, first + n) on `tape`. `v0_shift` is added to the
/// initial portfolio value (used to test translation covariance).
Rollout rollout(Tape& tape, const PathSet& paths, Eigen::Index first, Eigen::Index n, const Strategy& strategy,
                const HedgeConfig& cfg, RngStream* dropout_rng = nullptr, bool keep_trajectory = false,
                double v0_shift = 0.0);

struct HedgeResult {
    Eigen::ArrayXd xi;
    Eigen::ArrayXd cost;
    Eigen::ArrayXd V0;
    std::optional<Eigen::MatrixXd> delta_path;
    std::optional<Eigen::MatrixXd> V_path;
    std::optional<Eigen::MatrixXd> phi_path;
};

struct RunOptions {
    Eigen::Index chunk = 500;
    int threads = 1;
    bool keep_trajectory = false;
    double v0_shift = 0.0;
};

/// Evaluates `strategy` on every path (no dropout). Results do not depend on `threads`.
/// Throws NumericalError naming the path and step if the strategy emits a non-finite position.
HedgeResult run_hedge(const PathSet& paths, const Strategy& strategy, const HedgeConfig& cfg,
                      const RunOptions& options = {});

/// Writes `path_id,xi_T,cost,V0` and, when present, a second file with the per-step trajectory.
void export_hedge_csv(const HedgeResult& result, const std::filesystem::path& file,
                      const std::filesystem::path& trajectory_file = {});

// --- benchmark strategies ---------------------------------------------------

enum class BenchmarkKind { BlackScholes, Leland, SmileImplied };

std::string benchmark_name(BenchmarkKind k);

/// Closed-form delta hedger reading the surface of each path.
class BenchmarkStrategy : public Strategy {
public:
    explicit BenchmarkStrategy(BenchmarkKind kind) : kind_(kind) {}
    std::string name() const override { return benchmark_name(kind_); }
    std::unique_ptr<StrategySession> start(Tape& tape, Eigen::Index n, RngStream* dropout_rng) const override;
    BenchmarkKind kind() const { return kind_; }

    /// Positions for the chunk described by `in` (uses in.cfg for kappa and lambda).
    Array deltas(const StepInputs& in) const;

private:
    BenchmarkKind kind_;
};

/// Fixed per-step positions supplied by a callback; used in tests and tools.
class CallbackStrategy : public Strategy {
public:
    using Fn = std::function<Array(const StepInputs&)>;
    CallbackStrategy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string name() const override { return name_; }
    std::unique_ptr<StrategySession> start(Tape& tape, Eigen::Index n, RngStream* dropout_rng) const override;

private:
    std::string name_;
    Fn fn_;
};

}  // namespace ivhedge
