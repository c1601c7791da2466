#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ivhedge/hedging.hpp"
#include "ivhedge/pathset.hpp"

namespace ivhedge {

struct BacktestOptions {
    int maturity = 63;  ///< option life in steps
    int spacing = 21;   ///< steps between option openings
};

/// Number of options opened on a history with `n_steps` daily steps (rows - 1).
int backtest_option_count(int n_steps, const BacktestOptions& opt = {});

/// Every option's window of the history as one path, spot rescaled to 100 at its opening.
PathSet backtest_episodes(const PathSet& history, const BacktestOptions& opt = {});

struct BacktestResult {
    std::vector<std::string> strategies;
    std::vector<int> open_step;
    std::vector<std::string> open_dates;
    std::vector<std::string> close_dates;
    Eigen::VectorXd V0;          ///< premium of each option
    Eigen::MatrixXd pnl;         ///< options x strategies, -xi_T
    Eigen::MatrixXd cumulative;  ///< running sum of pnl down each column
};

/// Opens an at-the-money option (strike 100 after rescaling) every `spacing` steps and
/// hedges it to expiry along the history with each strategy. `tmpl` supplies kappa,
/// B and the penalty; its strike and step count are replaced.
/// Throws ConfigError if the history is not a single path or is shorter than one option life.
BacktestResult backtest(const std::vector<const Strategy*>& strategies, const PathSet& history,
                        const HedgeConfig& tmpl, const BacktestOptions& opt = {}, int threads = 1);

/// `option,open_date,close_date,V0,` then `pnl_<name>` and `cum_<name>` per strategy.
void write_backtest_csv(const BacktestResult& result, const std::filesystem::path& file);

}  // namespace ivhedge
