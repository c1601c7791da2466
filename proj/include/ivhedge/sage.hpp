#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ivhedge/hedging.hpp"
#include "ivhedge/pathset.hpp"
#include "ivhedge/training.hpp"

namespace ivhedge {

enum class SageMode { Exact, Sampled };

std::string sage_mode_name(SageMode m);
SageMode sage_mode_from_name(const std::string& name);

/// Shapley attribution of the risk reduction achieved by adding features to a baseline.
struct SageReport {
    std::vector<std::string> features;  ///< the attributed universe, in order
    std::string penalty;
    SageMode mode = SageMode::Exact;
    int permutations = 0;  ///< sampled mode only
    double risk_baseline = 0.0;
    double risk_full = 0.0;
    std::vector<double> contributions;  ///< C_j
    std::vector<double> relative;       ///< C_j / (risk_baseline - risk_full)
    /// Risk of every evaluated subset, keyed by bitmask over `features`.
    std::map<std::uint32_t, double> subset_risk;

    double total_reduction() const { return risk_baseline - risk_full; }
};

/// Risk of the model using the subset `mask` of the universe.
using SubsetRisk = std::function<double(std::uint32_t mask)>;

/// Shapley values of the set function -risk over `n` players. Exact mode enumerates
/// all 2^n subsets; sampled mode averages marginal gains over `permutations`
/// random orderings drawn from `seed`. Each distinct subset is evaluated once.
/// `evaluate_batch`, when given, is called first with every mask that will be needed
/// so that the risks can be computed in parallel.
SageReport shapley_from_risk(const std::vector<std::string>& features, const SubsetRisk& risk, SageMode mode,
                             int permutations = 200, std::uint64_t seed = 0,
                             const std::function<void(const std::vector<std::uint32_t>&)>& evaluate_batch = {});

struct SageConfig {
    std::vector<Feature> universe{Feature::Beta1, Feature::Beta2, Feature::Beta3,
                                  Feature::Beta4, Feature::Beta5, Feature::HR};
    std::vector<Feature> baseline{Feature::Tau, Feature::S};
    SageMode mode = SageMode::Sampled;
    int permutations = 200;
    std::uint64_t seed = 1;
    TrainConfig train;  ///< per-subset training; its seed is replaced by one derived from (seed, mask)
    int subset_threads = 1;  ///< subsets trained concurrently
};

/// Seed of the subset training run for `mask`.
std::uint64_t subset_seed(std::uint64_t master, std::uint32_t mask);

/// Features of the model for `mask`: baseline first, then the selected universe members in order.
std::vector<Feature> subset_features(const SageConfig& cfg, std::uint32_t mask);

/// Trains one policy per required subset on `train_paths` and evaluates hedge.penalty on `test_paths`.
/// Throws ConfigError if the universe has more than 16 features or overlaps the baseline,
/// or if the hedge state space requires features outside baseline + universe.
SageReport sage(const SageConfig& cfg, const HedgeConfig& hedge, const PathSet& train_paths,
                const PathSet& test_paths);

/// `feature,contribution,relative` rows followed by the subset table in a second file.
void write_sage_csv(const SageReport& report, const std::filesystem::path& file,
                    const std::filesystem::path& subsets_file = {});
std::string sage_report_to_json(const SageReport& report);
SageReport sage_report_from_json(const std::string& text);

}  // namespace ivhedge
