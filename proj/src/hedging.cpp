#include "ivhedge/hedging.hpp"

#include <cmath>
#include <fstream>

#include "ivhedge/benchmarks.hpp"
#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"
#include "ivhedge/parallel.hpp"

namespace ivhedge {

namespace {

constexpr const char* kFeatureNames[] = {"V",     "delta", "tau", "S",  "beta1", "beta2", "beta3", "beta4",
                                         "beta5", "h_R",   "h1",  "h2", "h3",    "h4",    "h5"};

}  // namespace

std::string feature_name(Feature f) { return kFeatureNames[static_cast<int>(f)]; }

Feature feature_from_name(const std::string& name) {
    for (int k = 0; k < 15; ++k) {
        if (name == kFeatureNames[k]) {
            return static_cast<Feature>(k);
        }
    }
    throw ConfigError("unknown feature '" + name + "'");
}

std::string state_space_name(StateSpace s) {
    switch (s) {
        case StateSpace::Full: return "full";
        case StateSpace::ReducedTc: return "reduced_tc";
        case StateSpace::ReducedNoTc: return "reduced_no_tc";
    }
    return "?";
}

StateSpace state_space_from_name(const std::string& name) {
    if (name == "full") return StateSpace::Full;
    if (name == "reduced_tc") return StateSpace::ReducedTc;
    if (name == "reduced_no_tc") return StateSpace::ReducedNoTc;
    throw ConfigError("unknown state space '" + name + "' (expected full, reduced_tc or reduced_no_tc)");
}

std::vector<Feature> features_for(StateSpace s) {
    using F = Feature;
    switch (s) {
        case StateSpace::Full:
            return {F::V, F::Delta, F::Tau, F::S, F::Beta1, F::Beta2, F::Beta3, F::Beta4,
                    F::Beta5, F::HR, F::H1, F::H2, F::H3, F::H4, F::H5};
        case StateSpace::ReducedTc:
            return {F::Delta, F::Tau, F::S, F::Beta1, F::Beta2, F::Beta3, F::Beta4, F::Beta5, F::HR};
        case StateSpace::ReducedNoTc:
            return {F::Tau, F::S, F::Beta1, F::Beta2, F::Beta3, F::Beta4, F::Beta5, F::HR};
    }
    return {};
}

Penalty Penalty::parse(const std::string& name) {
    if (name == "mse") return {PenaltyKind::MSE, 0.95};
    if (name == "smse") return {PenaltyKind::SMSE, 0.95};
    if (name.rfind("cvar", 0) == 0 && name.size() > 4) {
        const double pct = parse_double(name.substr(4), "penalty");
        if (!(pct > 0.0 && pct < 100.0)) {
            throw ConfigError("CVaR level must lie in (0, 100): '" + name + "'");
        }
        return {PenaltyKind::CVaR, pct / 100.0};
    }
    throw ConfigError("unknown penalty '" + name + "' (expected mse, smse, cvar95 or cvar99)");
}

std::string Penalty::name() const {
    switch (kind) {
        case PenaltyKind::MSE: return "mse";
        case PenaltyKind::SMSE: return "smse";
        case PenaltyKind::CVaR: return "cvar" + format_double(alpha * 100.0);
    }
    return "?";
}

std::vector<Feature> HedgeConfig::input_features() const {
    return features.empty() ? features_for(state_space) : features;
}

void HedgeConfig::validate() const {
    if (!(strike > 0.0)) {
        throw ConfigError("hedge.strike must be positive");
    }
    if (steps < 1) {
        throw ConfigError("hedge.steps must be at least 1");
    }
    if (!(kappa >= 0.0 && kappa <= 1.0)) {
        throw ConfigError("hedge.kappa must lie in [0, 1]");
    }
    if (!(B > 0.0)) {
        throw ConfigError("hedge.B must be positive");
    }
    if (penalty.kind == PenaltyKind::CVaR && !(penalty.alpha > 0.0 && penalty.alpha < 1.0)) {
        throw ConfigError("CVaR level must lie in (0, 1)");
    }
    if (!(leland_lambda > 0.0)) {
        throw ConfigError("hedge.leland_lambda must be positive");
    }
    if (kappa > 0.0 && features.empty() && state_space == StateSpace::ReducedNoTc) {
        throw ConfigError(
            "state space reduced_no_tc omits the current position delta, which the policy needs when "
            "transaction costs are present (kappa > 0); use reduced_tc or full");
    }
}

PortfolioState rebalance(const PortfolioState& port, double S, double new_delta, double kappa) {
    PortfolioState out = port;
    out.phi = port.V - new_delta * S - kappa * S * std::abs(new_delta - port.delta);
    out.delta = new_delta;
    return out;
}

PortfolioState accrue(const PortfolioState& port, double S_next, double r, double q, double dt) {
    PortfolioState out = port;
    out.V = port.phi * std::exp(r * dt) + port.delta * S_next * std::exp(q * dt);
    return out;
}

double leverage_bound(int t, double V, double S, double delta_prev, double kappa, double B, double V0, double S0,
                      double Z) {
    if (!(S > 0.0) || !(B > 0.0) || !(S0 > 0.0)) {
        throw DomainError("leverage bound requires S > 0 and B > 0");
    }
    if (t == 0) {
        return (V0 + B) / S0;
    }
    if (Z >= delta_prev) {
        return (V + B + kappa * S * delta_prev) / (S * (1.0 + kappa));
    }
    if (kappa >= 1.0) {
        throw DomainError("leverage bound: selling branch is undefined for kappa = 1");
    }
    return (V + B - kappa * S * delta_prev) / (S * (1.0 - kappa));
}

Array StepInputs::market(Feature f) const {
    const int col = t;
    auto slice = [&](const Eigen::MatrixXd& m) -> Array {
        return m.col(col).segment(first, n).transpose().array();
    };
    switch (f) {
        case Feature::V:
        case Feature::Delta: throw UsageError("V and delta are portfolio features, not market features");
        case Feature::Tau: return Array::Constant(1, n, tau);
        case Feature::S: return slice(paths->S);
        case Feature::Beta1:
        case Feature::Beta2:
        case Feature::Beta3:
        case Feature::Beta4:
        case Feature::Beta5:
            return slice(paths->beta[static_cast<std::size_t>(static_cast<int>(f) - static_cast<int>(Feature::Beta1))]);
        case Feature::HR: return slice(paths->h_R);
        case Feature::H1:
        case Feature::H2:
        case Feature::H3:
        case Feature::H4:
        case Feature::H5:
            return slice(paths->h[static_cast<std::size_t>(static_cast<int>(f) - static_cast<int>(Feature::H1))]);
    }
    throw UsageError("unknown feature");
}

Array initial_premium(const PathSet& paths, Eigen::Index first, Eigen::Index n, const HedgeConfig& cfg) {
    const double tau = cfg.steps * paths.step_years;
    Array v0(1, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        SurfaceCoeffs beta;
        for (int f = 0; f < 5; ++f) {
            beta(f) = paths.beta[static_cast<std::size_t>(f)](first + i, 0);
        }
        v0(0, i) = price_option(paths.S(first + i, 0), cfg.strike, tau, beta, paths.r, paths.q);
    }
    return v0;
}

Rollout rollout(Tape& tape, const PathSet& paths, Eigen::Index first, Eigen::Index n, const Strategy& strategy,
                const HedgeConfig& cfg, RngStream* dropout_rng, bool keep_trajectory, double v0_shift) {
    cfg.validate();
    if (paths.horizon < cfg.steps) {
        throw ConfigError("paths cover " + std::to_string(paths.horizon) + " steps, the hedge needs " +
                          std::to_string(cfg.steps));
    }
    if (first < 0 || n < 1 || first + n > paths.n_paths) {
        throw UsageError("rollout: path range out of bounds");
    }
    const double dt = paths.step_years;
    const double kappa = cfg.kappa;
    const double grow_r = std::exp(paths.r * dt);
    const double grow_q = std::exp(paths.q * dt);
    const int N = cfg.steps;

    Rollout out;
    out.V0 = initial_premium(paths, first, n, cfg);
    auto session = strategy.start(tape, n, dropout_rng);

    Var V = tape.constant(out.V0 + v0_shift);
    Var delta = tape.constant(0.0, 1, n);
    Var cost = tape.constant(0.0, 1, n);
    if (keep_trajectory) {
        out.delta_path = Eigen::MatrixXd::Zero(n, N + 1);
        out.V_path = Eigen::MatrixXd::Zero(n, N + 1);
        out.phi_path = Eigen::MatrixXd::Zero(n, N);
    }
    auto S_at = [&](int t) -> Array { return paths.S.col(t).segment(first, n).transpose().array(); };

    for (int t = 0; t < N; ++t) {
        StepInputs in;
        in.t = t;
        in.steps = N;
        in.tau = (N - t) * dt;
        in.paths = &paths;
        in.first = first;
        in.n = n;
        in.cfg = &cfg;
        in.V = V;
        in.delta = delta;
        const Var Z = session->position(in);
        if (Z.rows() != 1 || Z.cols() != n) {
            throw UsageError("strategy '" + strategy.name() + "' returned a position of the wrong shape");
        }
        if (!Z.value().allFinite()) {
            Eigen::Index bad = 0;
            for (; bad < n && std::isfinite(Z.value()(0, bad)); ++bad) {
            }
            throw NumericalError("strategy '" + strategy.name() + "' produced a non-finite position on path " +
                                 std::to_string(first + bad) + " at step " + std::to_string(t));
        }
        const Array S = S_at(t);
        Var bound;
        if (t == 0 || kappa == 0.0) {
            bound = mul(V + cfg.B, 1.0 / S);
        } else {
            const Mask buying = Z.value() >= delta.value();
            const Var up = mul(V + cfg.B + mul(delta, kappa * S), 1.0 / (S * (1.0 + kappa)));
            if (kappa >= 1.0) {
                if (!buying.all()) {
                    throw DomainError("leverage bound: selling branch is undefined for kappa = 1");
                }
                bound = up;
            } else {
                const Var down = mul(V + cfg.B - mul(delta, kappa * S), 1.0 / (S * (1.0 - kappa)));
                bound = select(buying, up, down, Z.value() - delta.value());
            }
        }
        const Var new_delta = min(Z, bound);
        Var phi = V - mul(new_delta, S);
        if (kappa > 0.0) {
            const Var trade = abs(new_delta - delta);
            phi = phi - mul(trade, kappa * S);
            cost = cost + mul(trade, kappa * std::exp(-paths.r * t * dt) * S);
        }
        const Array S_next = S_at(t + 1);
        if (keep_trajectory) {
            out.V_path.col(t) = V.value().row(0).transpose().matrix();
            out.delta_path.col(t + 1) = new_delta.value().row(0).transpose().matrix();
            out.phi_path.col(t) = phi.value().row(0).transpose().matrix();
        }
        V = phi * grow_r + mul(new_delta, grow_q * S_next);
        delta = new_delta;
    }
    if (keep_trajectory) {
        out.V_path.col(N) = V.value().row(0).transpose().matrix();
    }
    const Array payoff = (S_at(N) - cfg.strike).max(0.0);
    out.xi = add(-V, payoff);
    out.cost = cost;
    return out;
}

HedgeResult run_hedge(const PathSet& paths, const Strategy& strategy, const HedgeConfig& cfg,
                      const RunOptions& options) {
    cfg.validate();
    const Eigen::Index n = paths.n_paths;
    const Eigen::Index chunk = std::max<Eigen::Index>(1, options.chunk);
    const Eigen::Index n_chunks = (n + chunk - 1) / chunk;
    HedgeResult res;
    res.xi.resize(n);
    res.cost.resize(n);
    res.V0.resize(n);
    if (options.keep_trajectory) {
        res.delta_path = Eigen::MatrixXd(n, cfg.steps + 1);
        res.V_path = Eigen::MatrixXd(n, cfg.steps + 1);
        res.phi_path = Eigen::MatrixXd(n, cfg.steps);
    }
    parallel_for(n_chunks, options.threads, [&](std::ptrdiff_t begin, std::ptrdiff_t end) {
        for (std::ptrdiff_t c = begin; c < end; ++c) {
            const Eigen::Index first = c * chunk;
            const Eigen::Index m = std::min(chunk, n - first);
            Tape tape;
            const Rollout r = rollout(tape, paths, first, m, strategy, cfg, nullptr, options.keep_trajectory,
                                      options.v0_shift);
            res.xi.segment(first, m) = r.xi.value().row(0).transpose();
            res.cost.segment(first, m) = r.cost.value().row(0).transpose();
            res.V0.segment(first, m) = r.V0.row(0).transpose();
            if (options.keep_trajectory) {
                res.delta_path->middleRows(first, m) = r.delta_path;
                res.V_path->middleRows(first, m) = r.V_path;
                res.phi_path->middleRows(first, m) = r.phi_path;
            }
        }
    });
    return res;
}

void export_hedge_csv(const HedgeResult& result, const std::filesystem::path& file,
                      const std::filesystem::path& trajectory_file) {
    std::string out = "path_id,xi_T,cost,V0\n";
    for (Eigen::Index i = 0; i < result.xi.size(); ++i) {
        out += std::to_string(i) + "," + format_double(result.xi(i)) + "," + format_double(result.cost(i)) + "," +
               format_double(result.V0(i)) + "\n";
    }
    write_text_file(file, out);
    if (!trajectory_file.empty() && result.delta_path) {
        std::ofstream tr(trajectory_file, std::ios::binary | std::ios::trunc);
        if (!tr) {
            throw ConfigError("cannot write '" + trajectory_file.string() + "'");
        }
        tr << "path_id,t,delta,V,phi\n";
        const auto& d = *result.delta_path;
        const auto& v = *result.V_path;
        const auto& p = *result.phi_path;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            for (Eigen::Index t = 0; t < d.cols(); ++t) {
                tr << i << ',' << t << ',' << format_double(d(i, t)) << ',' << format_double(v(i, t)) << ','
                   << (t < p.cols() ? format_double(p(i, t)) : std::string()) << '\n';
            }
        }
    }
}

std::string benchmark_name(BenchmarkKind k) {
    switch (k) {
        case BenchmarkKind::BlackScholes: return "bs";
        case BenchmarkKind::Leland: return "leland";
        case BenchmarkKind::SmileImplied: return "si";
    }
    return "?";
}

namespace {

class ConstantSession : public StrategySession {
public:
    ConstantSession(Tape& tape, std::function<Array(const StepInputs&)> fn) : tape_(tape), fn_(std::move(fn)) {}
    Var position(const StepInputs& in) override { return tape_.constant(fn_(in)); }

private:
    Tape& tape_;
    std::function<Array(const StepInputs&)> fn_;
};

}  // namespace

Array BenchmarkStrategy::deltas(const StepInputs& in) const {
    Array d(1, in.n);
    const PathSet& p = *in.paths;
    for (Eigen::Index i = 0; i < in.n; ++i) {
        const Eigen::Index row = in.first + i;
        SurfaceCoeffs beta;
        for (int f = 0; f < 5; ++f) {
            beta(f) = p.beta[static_cast<std::size_t>(f)](row, in.t);
        }
        const double S = p.S(row, in.t);
        switch (kind_) {
            case BenchmarkKind::BlackScholes: d(0, i) = bs_delta(S, in.cfg->strike, in.tau, beta, p.r, p.q); break;
            case BenchmarkKind::Leland:
                d(0, i) = leland_delta(S, in.cfg->strike, in.tau, beta, p.r, p.q, in.cfg->kappa, in.cfg->leland_lambda);
                break;
            case BenchmarkKind::SmileImplied: d(0, i) = si_delta(S, in.cfg->strike, in.tau, beta, p.r, p.q); break;
        }
    }
    return d;
}

std::unique_ptr<StrategySession> BenchmarkStrategy::start(Tape& tape, Eigen::Index, RngStream*) const {
    return std::make_unique<ConstantSession>(tape, [this](const StepInputs& in) { return deltas(in); });
}

std::unique_ptr<StrategySession> CallbackStrategy::start(Tape& tape, Eigen::Index, RngStream*) const {
    return std::make_unique<ConstantSession>(tape, fn_);
}

}  // namespace ivhedge
