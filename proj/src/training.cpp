#include "ivhedge/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"
#include "ivhedge/parallel.hpp"

namespace ivhedge {

using nlohmann::json;

// --- penalties -----------------------------------------------------------------

Eigen::Index var_order_index(Eigen::Index n, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("CVaR level must lie in (0, 1)");
    }
    const auto k = static_cast<Eigen::Index>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
    return std::clamp<Eigen::Index>(k, 1, n);
}

namespace {

void require_sample(const Eigen::ArrayXd& xi) {
    if (xi.size() == 0) {
        throw UsageError("penalty of an empty sample");
    }
}

/// Position of the k-th smallest value (ties broken by index).
Eigen::Index order_statistic_index(const Eigen::ArrayXd& xi, Eigen::Index k) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(xi.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    auto less = [&](Eigen::Index a, Eigen::Index b) { return xi(a) < xi(b) || (xi(a) == xi(b) && a < b); };
    std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), less);
    return idx[static_cast<std::size_t>(k - 1)];
}

}  // namespace

double penalty_estimate(const Eigen::ArrayXd& xi, const Penalty& penalty) {
    require_sample(xi);
    const auto n = static_cast<double>(xi.size());
    switch (penalty.kind) {
        case PenaltyKind::MSE: return xi.square().sum() / n;
        case PenaltyKind::SMSE: return (xi >= 0.0).select(xi.square(), 0.0).sum() / n;
        case PenaltyKind::CVaR: {
            const Eigen::Index k = var_order_index(xi.size(), penalty.alpha);
            const double var = xi(order_statistic_index(xi, k));
            return var + (xi - var).max(0.0).sum() / ((1.0 - penalty.alpha) * n);
        }
    }
    throw UsageError("unknown penalty");
}

Eigen::ArrayXd penalty_gradient(const Eigen::ArrayXd& xi, const Penalty& penalty) {
    require_sample(xi);
    const auto n = static_cast<double>(xi.size());
    switch (penalty.kind) {
        case PenaltyKind::MSE: return 2.0 * xi / n;
        case PenaltyKind::SMSE: return (xi >= 0.0).select(2.0 * xi / n, 0.0);
        case PenaltyKind::CVaR: {
            const Eigen::Index k = var_order_index(xi.size(), penalty.alpha);
            const Eigen::Index sel = order_statistic_index(xi, k);
            const double var = xi(sel);
            const double w = 1.0 / ((1.0 - penalty.alpha) * n);
            Eigen::ArrayXd g = (xi > var).select(Eigen::ArrayXd::Constant(xi.size(), w), 0.0);
            const double above = static_cast<double>((xi > var).count());
            g(sel) += 1.0 - above * w;
            return g;
        }
    }
    throw UsageError("unknown penalty");
}

// --- metrics -------------------------------------------------------------------

Metrics compute_metrics(const Eigen::ArrayXd& xi, const Eigen::ArrayXd& cost, double deviation_alpha) {
    require_sample(xi);
    Metrics m;
    m.n_paths = xi.size();
    const double mean_xi = xi.sum() / static_cast<double>(xi.size());
    m.avg_pnl = -mean_xi;
    m.cvar_95 = penalty_estimate(xi, {PenaltyKind::CVaR, 0.95});
    m.cvar_99 = penalty_estimate(xi, {PenaltyKind::CVaR, 0.99});
    m.cvar_deviation = penalty_estimate(xi - mean_xi, {PenaltyKind::CVaR, deviation_alpha});
    m.mse = penalty_estimate(xi, {PenaltyKind::MSE, 0.95});
    m.smse = penalty_estimate(xi, {PenaltyKind::SMSE, 0.95});
    if (cost.size() > 0) {
        m.cost_mean = cost.sum() / static_cast<double>(cost.size());
        m.cost_std = cost.size() > 1
                         ? std::sqrt((cost - m.cost_mean).square().sum() / static_cast<double>(cost.size() - 1))
                         : 0.0;
    }
    return m;
}

MetricsReport summarize(const std::string& strategy, const HedgeResult& result, const PathSet& paths,
                        double deviation_alpha) {
    MetricsReport rep;
    rep.strategy = strategy;
    rep.deviation_alpha = deviation_alpha;
    rep.overall = compute_metrics(result.xi, result.cost, deviation_alpha);
    const bool labelled = static_cast<Eigen::Index>(paths.cluster.size()) == paths.n_paths &&
                          std::any_of(paths.cluster.begin(), paths.cluster.end(),
                                      [](const std::string& c) { return !c.empty(); });
    if (labelled) {
        std::map<std::string, std::vector<Eigen::Index>> groups;
        for (Eigen::Index i = 0; i < paths.n_paths; ++i) {
            groups[paths.cluster[static_cast<std::size_t>(i)]].push_back(i);
        }
        for (const auto& [label, rows] : groups) {
            Eigen::ArrayXd xi(static_cast<Eigen::Index>(rows.size()));
            Eigen::ArrayXd cost(xi.size());
            for (std::size_t j = 0; j < rows.size(); ++j) {
                xi(static_cast<Eigen::Index>(j)) = result.xi(rows[j]);
                cost(static_cast<Eigen::Index>(j)) = result.cost(rows[j]);
            }
            rep.per_cluster[label] = compute_metrics(xi, cost, deviation_alpha);
        }
    }
    return rep;
}

MetricsReport evaluate(const Strategy& strategy, const PathSet& paths, const HedgeConfig& cfg,
                       const RunOptions& options, double deviation_alpha) {
    const HedgeResult res = run_hedge(paths, strategy, cfg, options);
    return summarize(strategy.name(), res, paths, deviation_alpha);
}

void write_metrics_csv(const std::vector<MetricsReport>& reports, const std::filesystem::path& file) {
    std::ostringstream out;
    out << "strategy,cluster,n_paths,avg_pnl,cvar_95,cvar_99,cvar_deviation,deviation_alpha,mse,smse,cost_mean,"
           "cost_std\n";
    auto row = [&](const MetricsReport& r, const std::string& cluster, const Metrics& m) {
        out << r.strategy << ',' << cluster << ',' << m.n_paths << ',' << format_double(m.avg_pnl) << ','
            << format_double(m.cvar_95) << ',' << format_double(m.cvar_99) << ',' << format_double(m.cvar_deviation)
            << ',' << format_double(r.deviation_alpha) << ',' << format_double(m.mse) << ','
            << format_double(m.smse) << ',' << format_double(m.cost_mean) << ',' << format_double(m.cost_std)
            << '\n';
    };
    for (const auto& r : reports) {
        row(r, "all", r.overall);
        for (const auto& [label, m] : r.per_cluster) {
            row(r, label, m);
        }
    }
    write_text_file(file, out.str());
}

// --- neural strategy -------------------------------------------------------------

namespace {

class PolicySession : public StrategySession {
public:
    PolicySession(Tape& tape, const Policy& policy, std::unique_ptr<BoundWeights> owned, const BoundWeights* bound,
                  RngStream* dropout_rng)
        : tape_(tape),
          policy_(policy),
          owned_(std::move(owned)),
          bound_(owned_ ? *owned_ : *bound),
          dropout_rng_(dropout_rng) {}

    Var position(const StepInputs& in) override {
        const auto& feats = policy_.features;
        const auto& norm = policy_.normalizer;
        std::vector<Var> segments;
        std::vector<Array> pending;
        auto flush = [&] {
            if (pending.empty()) {
                return;
            }
            Array block(static_cast<Eigen::Index>(pending.size()), in.n);
            for (std::size_t r = 0; r < pending.size(); ++r) {
                block.row(static_cast<Eigen::Index>(r)) = pending[r];
            }
            segments.push_back(tape_.constant(std::move(block)));
            pending.clear();
        };
        for (std::size_t i = 0; i < feats.size(); ++i) {
            const auto fi = static_cast<Eigen::Index>(i);
            const double m = norm.mean(fi);
            const double s = norm.scale(fi);
            if (feats[i] == Feature::V || feats[i] == Feature::Delta) {
                flush();
                const Var v = feats[i] == Feature::V ? in.V : in.delta;
                segments.push_back((v + (-m)) * (1.0 / s));
            } else {
                pending.push_back((in.market(feats[i]) - m) / s);
            }
        }
        flush();
        Var X = segments.front();
        for (std::size_t k = 1; k < segments.size(); ++k) {
            X = vstack(X, segments[k]);
        }
        return policy_raw(bound_, policy_.weights.arch, X, rec_, dropout_rng_);
    }

private:
    Tape& tape_;
    const Policy& policy_;
    std::unique_ptr<BoundWeights> owned_;
    const BoundWeights& bound_;
    RngStream* dropout_rng_;
    RecurrentState rec_;
};

void check_policy(const Policy& p) {
    if (p.features.empty()) {
        throw ConfigError("policy has no input features");
    }
    if (static_cast<int>(p.features.size()) != p.weights.arch.input_dim ||
        p.normalizer.mean.size() != static_cast<Eigen::Index>(p.features.size()) ||
        p.normalizer.scale.size() != p.normalizer.mean.size()) {
        throw ConfigError("policy features, normalizer and network input width disagree");
    }
}

}  // namespace

NeuralStrategy::NeuralStrategy(Policy policy, std::string name) : policy_(std::move(policy)), name_(std::move(name)) {
    check_policy(policy_);
}

std::unique_ptr<StrategySession> NeuralStrategy::start(Tape& tape, Eigen::Index, RngStream* dropout_rng) const {
    auto owned = std::make_unique<BoundWeights>(bind(tape, policy_.weights, false));
    return std::make_unique<PolicySession>(tape, policy_, std::move(owned), nullptr, dropout_rng);
}

std::unique_ptr<StrategySession> BoundPolicyStrategy::start(Tape& tape, Eigen::Index, RngStream* dropout_rng) const {
    return std::make_unique<PolicySession>(tape, policy_, nullptr, &bound_, dropout_rng);
}

Normalizer fit_normalizer(const PathSet& paths, const HedgeConfig& cfg, const std::vector<Feature>& features,
                          Eigen::Index max_rollout_paths, int threads) {
    const int N = cfg.steps;
    if (paths.horizon < N || paths.n_paths < 1) {
        throw ConfigError("normalizer: paths do not cover the hedge horizon");
    }
    const auto d = static_cast<Eigen::Index>(features.size());
    Normalizer norm = Normalizer::identity(static_cast<int>(d));

    std::optional<HedgeResult> traj;
    const bool needs_portfolio = std::any_of(features.begin(), features.end(),
                                             [](Feature f) { return f == Feature::V || f == Feature::Delta; });
    if (needs_portfolio) {
        const PathSet sub = paths.select_range(0, std::min(paths.n_paths, std::max<Eigen::Index>(1, max_rollout_paths)));
        HedgeConfig bs_cfg = cfg;
        bs_cfg.features.clear();
        RunOptions opt;
        opt.threads = threads;
        opt.keep_trajectory = true;
        traj = run_hedge(sub, BenchmarkStrategy(BenchmarkKind::BlackScholes), bs_cfg, opt);
    }

    for (Eigen::Index i = 0; i < d; ++i) {
        const Feature f = features[static_cast<std::size_t>(i)];
        Eigen::ArrayXXd sample;
        if (f == Feature::V) {
            sample = traj->V_path->leftCols(N).array();
        } else if (f == Feature::Delta) {
            sample = traj->delta_path->leftCols(N).array();
        } else {
            sample.resize(1, static_cast<Eigen::Index>(N) * paths.n_paths);
            StepInputs in;
            in.steps = N;
            in.paths = &paths;
            in.first = 0;
            in.n = paths.n_paths;
            in.cfg = &cfg;
            for (int t = 0; t < N; ++t) {
                in.t = t;
                in.tau = (N - t) * paths.step_years;
                sample.middleCols(static_cast<Eigen::Index>(t) * paths.n_paths, paths.n_paths) = in.market(f);
            }
        }
        const Eigen::ArrayXXd flat = sample.reshaped(1, sample.size());
        const Normalizer one = Normalizer::fit(flat);
        norm.mean(i) = one.mean(0);
        norm.scale(i) = one.scale(0);
    }
    return norm;
}

// --- training --------------------------------------------------------------------

void TrainConfig::validate(Eigen::Index n_train) const {
    if (epochs < 1) {
        throw ConfigError("train.epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("train.batch_size must be positive");
    }
    if (batch_size > n_train) {
        throw ConfigError("train.batch_size (" + std::to_string(batch_size) + ") exceeds the " +
                          std::to_string(n_train) + " training paths");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train.learning_rate must be positive");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("train.validation_fraction must lie in [0, 1)");
    }
    if (chunk < 1) {
        throw ConfigError("train.chunk must be positive");
    }
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;
constexpr std::uint64_t kDropoutStream = 0x64726f706f7574ULL;

std::vector<Eigen::Index> shuffled(Eigen::Index n, RngStream rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(i + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(std::min(j, i))]);
    }
    return idx;
}

void add_into(PolicyWeights& acc, const PolicyWeights& g) {
    std::vector<const Eigen::MatrixXd*> src;
    g.for_each([&](const Eigen::MatrixXd& m) { src.push_back(&m); });
    std::size_t k = 0;
    acc.for_each([&](Eigen::MatrixXd& m) { m += *src[k++]; });
}

}  // namespace

TrainResult train(const TrainConfig& tcfg, const HedgeConfig& hedge, const PathSet& paths) {
    hedge.validate();
    const Eigen::Index n_val = static_cast<Eigen::Index>(std::floor(tcfg.validation_fraction * paths.n_paths));
    const Eigen::Index n_train = paths.n_paths - n_val;
    tcfg.validate(n_train);
    TrainResult start;
    start.policy.features = hedge.input_features();
    Architecture arch = tcfg.arch;
    arch.input_dim = static_cast<int>(start.policy.features.size());
    arch.validate();
    start.policy.weights = glorot_init(arch, tcfg.seed);
    start.policy.normalizer = fit_normalizer(paths.select_range(0, n_train), hedge, start.policy.features, 5000,
                                             resolve_threads(tcfg.threads));
    start.adam = AdamState::for_weights(start.policy.weights, tcfg.learning_rate);
    return train_from(tcfg, hedge, paths, std::move(start));
}

TrainResult train_from(const TrainConfig& tcfg, const HedgeConfig& hedge, const PathSet& paths, TrainResult start) {
    hedge.validate();
    check_policy(start.policy);
    if (start.policy.features != hedge.input_features()) {
        throw ConfigError("policy features do not match the hedge state space");
    }
    const Eigen::Index n_val = static_cast<Eigen::Index>(std::floor(tcfg.validation_fraction * paths.n_paths));
    const Eigen::Index n_train = paths.n_paths - n_val;
    tcfg.validate(n_train);
    const int threads = resolve_threads(tcfg.threads);

    TrainResult res = std::move(start);
    res.adam.lr = tcfg.learning_rate;
    const PathSet train_set = paths.select_range(0, n_train);
    const PathSet val_set = n_val > 0 ? paths.select_range(n_train, n_val) : PathSet{};
    const Architecture& arch = res.policy.weights.arch;
    const int first_epoch = res.epochs_done + 1;
    res.curve.clear();

    for (int e = 0; e < tcfg.epochs; ++e) {
        const int epoch = first_epoch + e;
        const auto order = shuffled(n_train, RngStream(tcfg.seed, kShuffleStream).substream(
                                                 static_cast<std::uint64_t>(epoch)));
        const Eigen::Index n_batches = (n_train + tcfg.batch_size - 1) / tcfg.batch_size;
        double loss_sum = 0.0;
        for (Eigen::Index b = 0; b < n_batches; ++b) {
            const Eigen::Index begin = b * tcfg.batch_size;
            const Eigen::Index count = std::min(tcfg.batch_size, n_train - begin);
            const std::span<const Eigen::Index> rows(order.data() + begin, static_cast<std::size_t>(count));
            const PathSet batch = train_set.select(rows);
            const std::uint64_t batch_id = (static_cast<std::uint64_t>(epoch) << 32) | static_cast<std::uint64_t>(b);
            const RngStream batch_rng = RngStream(tcfg.seed, kDropoutStream).substream(batch_id);

            const Eigen::Index n_chunks = (count + tcfg.chunk - 1) / tcfg.chunk;
            std::vector<std::unique_ptr<Tape>> tapes(static_cast<std::size_t>(n_chunks));
            std::vector<BoundWeights> bound(static_cast<std::size_t>(n_chunks));
            std::vector<Var> xis(static_cast<std::size_t>(n_chunks));
            Eigen::ArrayXd xi(count);
            parallel_for(n_chunks, threads, [&](std::ptrdiff_t c0, std::ptrdiff_t c1) {
                for (std::ptrdiff_t c = c0; c < c1; ++c) {
                    const auto ci = static_cast<std::size_t>(c);
                    const Eigen::Index first = c * tcfg.chunk;
                    const Eigen::Index m = std::min(tcfg.chunk, count - first);
                    tapes[ci] = std::make_unique<Tape>();
                    bound[ci] = bind(*tapes[ci], res.policy.weights, true);
                    const BoundPolicyStrategy strat(bound[ci], res.policy);
                    RngStream drop = batch_rng.substream(static_cast<std::uint64_t>(c));
                    const Rollout r = rollout(*tapes[ci], batch, first, m, strat, hedge, &drop);
                    xis[ci] = r.xi;
                    xi.segment(first, m) = r.xi.value().row(0).transpose();
                }
            });
            const double loss = penalty_estimate(xi, hedge.penalty);
            if (!std::isfinite(loss)) {
                throw NumericalError("training diverged: non-finite loss in epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(b) + " (seed " + std::to_string(tcfg.seed) +
                                     ", batch id " + std::to_string(batch_id) + ")");
            }
            loss_sum += loss;
            const Eigen::ArrayXd seed_grad = penalty_gradient(xi, hedge.penalty);
            std::vector<PolicyWeights> grads(static_cast<std::size_t>(n_chunks));
            parallel_for(n_chunks, threads, [&](std::ptrdiff_t c0, std::ptrdiff_t c1) {
                for (std::ptrdiff_t c = c0; c < c1; ++c) {
                    const auto ci = static_cast<std::size_t>(c);
                    const Eigen::Index first = c * tcfg.chunk;
                    const Eigen::Index m = std::min(tcfg.chunk, count - first);
                    tapes[ci]->backward(xis[ci], seed_grad.segment(first, m).transpose());
                    grads[ci] = gradients(*tapes[ci], bound[ci], arch);
                    tapes[ci].reset();
                }
            });
            PolicyWeights total = std::move(grads[0]);
            for (std::size_t c = 1; c < grads.size(); ++c) {
                add_into(total, grads[c]);
            }
            if (!total.all_finite()) {
                throw NumericalError("training diverged: non-finite gradient in epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(b) + " (seed " + std::to_string(tcfg.seed) +
                                     ", batch id " + std::to_string(batch_id) + ")");
            }
            adam_step(res.policy.weights, total, res.adam);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(n_batches);
        stats.validation_loss = std::numeric_limits<double>::quiet_NaN();
        if (n_val > 0) {
            RunOptions opt;
            opt.chunk = tcfg.chunk;
            opt.threads = threads;
            const HedgeResult vr = run_hedge(val_set, NeuralStrategy(res.policy), hedge, opt);
            stats.validation_loss = penalty_estimate(vr.xi, hedge.penalty);
        }
        res.curve.push_back(stats);
        res.epochs_done = epoch;
        if (tcfg.on_epoch) {
            tcfg.on_epoch(stats);
        }
    }
    return res;
}

void write_loss_curve_csv(const std::vector<EpochStats>& curve, const std::filesystem::path& file) {
    std::ostringstream out;
    out << "epoch,train_loss,validation_loss\n";
    for (const auto& s : curve) {
        out << s.epoch << ',' << format_double(s.train_loss) << ','
            << (std::isnan(s.validation_loss) ? std::string() : format_double(s.validation_loss)) << '\n';
    }
    write_text_file(file, out.str());
}

// --- configuration round trips ---------------------------------------------------

std::string hedge_config_to_json(const HedgeConfig& cfg) {
    json j;
    j["strike"] = cfg.strike;
    j["steps"] = cfg.steps;
    j["kappa"] = cfg.kappa;
    j["B"] = cfg.B;
    j["penalty"] = cfg.penalty.name();
    j["state_space"] = state_space_name(cfg.state_space);
    if (!cfg.features.empty()) {
        std::vector<std::string> names;
        for (Feature f : cfg.features) {
            names.push_back(feature_name(f));
        }
        j["features"] = names;
    }
    j["leland_lambda"] = cfg.leland_lambda;
    return j.dump();
}

void hedge_config_from_json(const std::string& json_text, HedgeConfig& cfg) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("hedge configuration is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("hedge configuration must be a JSON object");
    }
    auto num = [&](const char* key, double& dst) {
        if (j.contains(key)) {
            if (!j[key].is_number()) {
                throw ConfigError(std::string("hedge.") + key + " must be a number");
            }
            dst = j[key].get<double>();
        }
    };
    num("strike", cfg.strike);
    num("kappa", cfg.kappa);
    num("B", cfg.B);
    num("leland_lambda", cfg.leland_lambda);
    if (j.contains("steps")) {
        if (!j["steps"].is_number_integer()) {
            throw ConfigError("hedge.steps must be an integer");
        }
        cfg.steps = j["steps"].get<int>();
    }
    if (j.contains("penalty")) {
        cfg.penalty = Penalty::parse(j["penalty"].get<std::string>());
    }
    if (j.contains("state_space")) {
        cfg.state_space = state_space_from_name(j["state_space"].get<std::string>());
    }
    if (j.contains("features")) {
        cfg.features.clear();
        for (const auto& name : j["features"]) {
            cfg.features.push_back(feature_from_name(name.get<std::string>()));
        }
    }
}

Checkpoint make_checkpoint(const TrainResult& result, const TrainConfig& tcfg, const HedgeConfig& hedge) {
    Checkpoint c;
    c.weights = result.policy.weights;
    c.adam = result.adam;
    c.normalizer = result.policy.normalizer;
    for (Feature f : result.policy.features) {
        c.features.push_back(feature_name(f));
    }
    c.seed = tcfg.seed;
    json meta;
    meta["hedge"] = json::parse(hedge_config_to_json(hedge));
    meta["train"] = {{"epochs_total", result.epochs_done},
                     {"batch_size", tcfg.batch_size},
                     {"learning_rate", tcfg.learning_rate},
                     {"validation_fraction", tcfg.validation_fraction},
                     {"chunk", tcfg.chunk}};
    c.metadata_json = meta.dump();
    return c;
}

TrainResult from_checkpoint(const Checkpoint& ckpt, HedgeConfig* hedge) {
    TrainResult r;
    r.policy.weights = ckpt.weights;
    r.policy.normalizer = ckpt.normalizer;
    for (const auto& name : ckpt.features) {
        r.policy.features.push_back(feature_from_name(name));
    }
    r.adam = ckpt.adam;
    check_policy(r.policy);
    json meta = json::parse(ckpt.metadata_json, nullptr, false);
    if (hedge != nullptr && meta.is_object() && meta.contains("hedge")) {
        hedge_config_from_json(meta["hedge"].dump(), *hedge);
    }
    if (meta.is_object() && meta.contains("train") && meta["train"].contains("epochs_total")) {
        r.epochs_done = meta["train"]["epochs_total"].get<int>();
    }
    return r;
}

}  // namespace ivhedge
