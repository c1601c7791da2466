#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ivhedge/hedging.hpp"
#include "ivhedge/neural.hpp"
#include "ivhedge/pathset.hpp"

namespace ivhedge {

// --- penalties -----------------------------------------------------------------

/// Index k (1-based) of the empirical VaR order statistic: ceil(alpha N).
Eigen::Index var_order_index(Eigen::Index n, double alpha);

/// Empirical risk of a sample of terminal errors. Throws UsageError on an empty sample.
double penalty_estimate(const Eigen::ArrayXd& xi, const Penalty& penalty);

/// Subgradient of penalty_estimate with respect to each sample. For CVaR the VaR
/// order statistic is treated as a fixed index selection.
Eigen::ArrayXd penalty_gradient(const Eigen::ArrayXd& xi, const Penalty& penalty);

// --- metrics -------------------------------------------------------------------

struct Metrics {
    double avg_pnl = 0.0;
    double cvar_95 = 0.0;
    double cvar_99 = 0.0;
    double cvar_deviation = 0.0;  ///< CVaR at `deviation_alpha` of xi - mean(xi)
    double mse = 0.0;
    double smse = 0.0;
    double cost_mean = 0.0;
    double cost_std = 0.0;
    Eigen::Index n_paths = 0;
};

struct MetricsReport {
    std::string strategy;
    double deviation_alpha = 0.95;
    Metrics overall;
    std::map<std::string, Metrics> per_cluster;  ///< empty when paths carry no cluster labels
};

Metrics compute_metrics(const Eigen::ArrayXd& xi, const Eigen::ArrayXd& cost, double deviation_alpha = 0.95);

/// Runs `strategy` on `paths` without dropout and summarizes the result.
MetricsReport evaluate(const Strategy& strategy, const PathSet& paths, const HedgeConfig& cfg,
                       const RunOptions& options = {}, double deviation_alpha = 0.95);
MetricsReport summarize(const std::string& strategy, const HedgeResult& result, const PathSet& paths,
                        double deviation_alpha = 0.95);

/// One row per (strategy, cluster), cluster "all" first.
void write_metrics_csv(const std::vector<MetricsReport>& reports, const std::filesystem::path& file);

// --- neural strategy -------------------------------------------------------------

/// A trained policy together with the input layout it expects.
struct Policy {
    PolicyWeights weights;
    Normalizer normalizer;
    std::vector<Feature> features;
};

/// Hedges with an RNN-FNN policy. Weights are bound fresh on each tape without gradients.
class NeuralStrategy : public Strategy {
public:
    NeuralStrategy(Policy policy, std::string name = "rl");
    std::string name() const override { return name_; }
    std::unique_ptr<StrategySession> start(Tape& tape, Eigen::Index n, RngStream* dropout_rng) const override;
    const Policy& policy() const { return policy_; }

private:
    Policy policy_;
    std::string name_;
};

/// Uses weights already bound on a tape, so their gradients can be read after backward().
class BoundPolicyStrategy : public Strategy {
public:
    BoundPolicyStrategy(const BoundWeights& bound, const Policy& policy) : bound_(bound), policy_(policy) {}
    std::string name() const override { return "rl"; }
    std::unique_ptr<StrategySession> start(Tape& tape, Eigen::Index n, RngStream* dropout_rng) const override;

private:
    const BoundWeights& bound_;
    const Policy& policy_;
};

/// Normalizer over the training paths. Market features use every (path, step < T);
/// V and delta use the trajectory of the Black-Scholes delta hedge on at most
/// `max_rollout_paths` paths.
Normalizer fit_normalizer(const PathSet& paths, const HedgeConfig& cfg, const std::vector<Feature>& features,
                          Eigen::Index max_rollout_paths = 5000, int threads = 1);

// --- training --------------------------------------------------------------------

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;       ///< mean batch penalty (dropout active)
    double validation_loss = 0.0;  ///< penalty on the validation paths (dropout off); NaN without validation paths
};

struct TrainConfig {
    int epochs = 30;
    Eigen::Index batch_size = 1000;
    double learning_rate = 5e-4;
    std::uint64_t seed = 1;
    double validation_fraction = 0.1;
    Architecture arch;  ///< input_dim is filled from the hedge features
    Eigen::Index chunk = 250;  ///< paths per tape
    int threads = 1;
    std::function<void(const EpochStats&)> on_epoch;

    /// Throws ConfigError on invalid values; `n_train` is the number of paths used for gradient steps.
    void validate(Eigen::Index n_train) const;
};

struct TrainResult {
    Policy policy;
    AdamState adam;
    std::vector<EpochStats> curve;  ///< epochs run by the latest call
    int epochs_done = 0;            ///< cumulative, including earlier runs
};

/// Mini-batch training. The last `validation_fraction` of `paths` is held out.
/// Deterministic for fixed inputs regardless of `threads`. Throws NumericalError
/// if a batch loss is not finite.
TrainResult train(const TrainConfig& tcfg, const HedgeConfig& hedge, const PathSet& paths);

/// Continues from existing weights and optimizer state (normalizer and features are kept).
TrainResult train_from(const TrainConfig& tcfg, const HedgeConfig& hedge, const PathSet& paths, TrainResult start);

void write_loss_curve_csv(const std::vector<EpochStats>& curve, const std::filesystem::path& file);

/// Packs a trained policy with its configuration for saving.
Checkpoint make_checkpoint(const TrainResult& result, const TrainConfig& tcfg, const HedgeConfig& hedge);
/// Restores the policy and optimizer state; `hedge` receives the stored hedge configuration.
TrainResult from_checkpoint(const Checkpoint& ckpt, HedgeConfig* hedge = nullptr);

std::string hedge_config_to_json(const HedgeConfig& cfg);
/// Fields absent from `json_text` keep the values already in `cfg`.
void hedge_config_from_json(const std::string& json_text, HedgeConfig& cfg);

}  // namespace ivhedge
