#include "ivhedge/backtest.hpp"

#include <sstream>

#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"

namespace ivhedge {

int backtest_option_count(int n_steps, const BacktestOptions& opt) {
    if (opt.maturity < 1 || opt.spacing < 1) {
        throw ConfigError("backtest: maturity and spacing must be positive");
    }
    if (n_steps < opt.maturity) {
        return 0;
    }
    return (n_steps - opt.maturity) / opt.spacing + 1;
}

PathSet backtest_episodes(const PathSet& history, const BacktestOptions& opt) {
    history.validate_shape();
    if (history.n_paths != 1) {
        throw ConfigError("backtest: the history must be a single path, got " + std::to_string(history.n_paths));
    }
    const int count = backtest_option_count(history.horizon, opt);
    if (count == 0) {
        throw ConfigError("backtest: history covers " + std::to_string(history.horizon) +
                          " steps, one option needs " + std::to_string(opt.maturity));
    }
    const int m = opt.maturity;
    PathSet ep = PathSet::allocate(count, m);
    ep.market = history.market;
    ep.step_years = history.step_years;
    ep.r = history.r;
    ep.q = history.q;
    ep.seed = history.seed;
    ep.params_hash = history.params_hash;
    ep.pool_row.assign(static_cast<std::size_t>(count), -1);
    ep.cluster.assign(static_cast<std::size_t>(count), "");
    for (int k = 0; k < count; ++k) {
        const int t0 = k * opt.spacing;
        const double scale = 100.0 / history.S(0, t0);
        ep.S.row(k) = history.S.block(0, t0, 1, m + 1) * scale;
        for (std::size_t i = 0; i < 5; ++i) {
            ep.beta[i].row(k) = history.beta[i].block(0, t0, 1, m + 1);
            ep.h[i].row(k) = history.h[i].block(0, t0, 1, m + 1);
        }
        ep.beta2_lag.row(k) = history.beta2_lag.block(0, t0, 1, m + 1);
        ep.h_R.row(k) = history.h_R.block(0, t0, 1, m + 1);
    }
    return ep;
}

BacktestResult backtest(const std::vector<const Strategy*>& strategies, const PathSet& history,
                        const HedgeConfig& tmpl, const BacktestOptions& opt, int threads) {
    if (strategies.empty()) {
        throw ConfigError("backtest: no strategies given");
    }
    const PathSet ep = backtest_episodes(history, opt);
    HedgeConfig cfg = tmpl;
    cfg.strike = 100.0;
    cfg.steps = opt.maturity;
    cfg.validate();

    BacktestResult res;
    const auto count = static_cast<int>(ep.n_paths);
    const bool dated = static_cast<int>(history.dates.size()) == history.horizon + 1;
    for (int k = 0; k < count; ++k) {
        const int t0 = k * opt.spacing;
        res.open_step.push_back(t0);
        res.open_dates.push_back(dated ? history.dates[static_cast<std::size_t>(t0)] : std::to_string(t0));
        res.close_dates.push_back(dated ? history.dates[static_cast<std::size_t>(t0 + opt.maturity)]
                                        : std::to_string(t0 + opt.maturity));
    }
    res.pnl.resize(count, static_cast<Eigen::Index>(strategies.size()));
    RunOptions run;
    run.threads = threads;
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        res.strategies.push_back(strategies[s]->name());
        const HedgeResult hr = run_hedge(ep, *strategies[s], cfg, run);
        res.pnl.col(static_cast<Eigen::Index>(s)) = -hr.xi.matrix();
        if (s == 0) {
            res.V0 = hr.V0.matrix();
        }
    }
    res.cumulative = res.pnl;
    for (Eigen::Index k = 1; k < res.cumulative.rows(); ++k) {
        res.cumulative.row(k) += res.cumulative.row(k - 1);
    }
    return res;
}

void write_backtest_csv(const BacktestResult& result, const std::filesystem::path& file) {
    std::ostringstream out;
    out << "option,open_date,close_date,V0";
    for (const auto& s : result.strategies) {
        out << ",pnl_" << s;
    }
    for (const auto& s : result.strategies) {
        out << ",cum_" << s;
    }
    out << '\n';
    for (Eigen::Index k = 0; k < result.pnl.rows(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        out << k << ',' << result.open_dates[ks] << ',' << result.close_dates[ks] << ','
            << format_double(result.V0(k));
        for (Eigen::Index s = 0; s < result.pnl.cols(); ++s) {
            out << ',' << format_double(result.pnl(k, s));
        }
        for (Eigen::Index s = 0; s < result.cumulative.cols(); ++s) {
            out << ',' << format_double(result.cumulative(k, s));
        }
        out << '\n';
    }
    write_text_file(file, out.str());
}

}  // namespace ivhedge
