#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivhedge/backtest.hpp"
#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"
#include "ivhedge/hedging.hpp"
#include "ivhedge/jivr.hpp"
#include "ivhedge/manifest.hpp"
#include "ivhedge/neural.hpp"
#include "ivhedge/parallel.hpp"
#include "ivhedge/pathset.hpp"
#include "ivhedge/sage.hpp"
#include "ivhedge/training.hpp"

#ifndef IVHEDGE_DEFAULT_DATA_DIR
#define IVHEDGE_DEFAULT_DATA_DIR "data"
#endif

namespace ivhedge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Reads nested JSON objects as CLI11 configuration: {"train": {"epochs": 5}} sets
/// `train --epochs 5`. Arrays become multi-valued options.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            input >> j;
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("configuration file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) {
            throw CLI::ConversionError("configuration file must hold a JSON object");
        }
        std::vector<CLI::ConfigItem> items;
        collect(j, {}, items);
        return items;
    }

private:
    static std::string scalar(const json& v, const std::string& key) {
        if (v.is_boolean()) {
            return v.get<bool>() ? "true" : "false";
        }
        if (v.is_number()) {
            return v.dump();
        }
        if (v.is_string()) {
            return v.get<std::string>();
        }
        throw CLI::ConversionError("configuration value '" + key + "' must be a number, string, boolean or array");
    }

    static void collect(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (it->is_object()) {
                auto p = parents;
                p.push_back(it.key());
                collect(*it, p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = it.key();
            if (it->is_array()) {
                for (const auto& v : *it) {
                    item.inputs.push_back(scalar(v, it.key()));
                }
            } else {
                item.inputs.push_back(scalar(*it, it.key()));
            }
            out.push_back(std::move(item));
        }
    }
};

struct Global {
    std::string params_file;
    int threads = 1;
    bool reference = false;

    int worker_count() const { return reference ? 1 : resolve_threads(threads); }

    std::string resolved_params() const {
        if (!params_file.empty()) {
            return params_file;
        }
        if (const char* env = std::getenv("IVHEDGE_PARAMS"); env != nullptr && *env != '\0') {
            return env;
        }
        return std::string(IVHEDGE_DEFAULT_DATA_DIR) + "/jivr_params.json";
    }
};

struct HedgeArgs {
    double strike = 100.0;
    int steps = 63;
    double kappa = 0.0;
    double B = 100.0;
    std::string penalty = "mse";
    std::string state_space = "reduced_no_tc";
    std::vector<std::string> features;
    double leland_lambda = 252.0;
    bool policy_inputs = true;

    void add(CLI::App* app, bool with_policy_inputs) {
        policy_inputs = with_policy_inputs;
        app->add_option("--strike", strike, "Option strike")->capture_default_str();
        app->add_option("--steps", steps, "Rebalancing dates until maturity")->capture_default_str();
        app->add_option("--tc", kappa, "Proportional transaction cost rate kappa")->capture_default_str();
        app->add_option("--borrow-limit", B, "Borrowing bound B of the leverage constraint")->capture_default_str();
        app->add_option("--leland-lambda", leland_lambda, "Rebalancing frequency per year for the Leland delta")
            ->capture_default_str();
        app->add_option("--penalty", penalty, "Risk penalty: mse, smse, cvar95, cvar99")->capture_default_str();
        if (with_policy_inputs) {
            app->add_option("--state-space", state_space, "full, reduced_tc or reduced_no_tc")->capture_default_str();
            app->add_option("--features", features, "Explicit policy inputs (overrides --state-space)");
        }
    }

    HedgeConfig build() const {
        HedgeConfig h;
        h.strike = strike;
        h.steps = steps;
        h.kappa = kappa;
        h.B = B;
        h.penalty = Penalty::parse(penalty);
        h.state_space = state_space_from_name(state_space);
        if (!policy_inputs) {
            // Benchmarks ignore the state space; stored policies carry their own inputs.
            h.state_space = kappa > 0.0 ? StateSpace::ReducedTc : StateSpace::ReducedNoTc;
        }
        for (const auto& f : features) {
            h.features.push_back(feature_from_name(f));
        }
        h.leland_lambda = leland_lambda;
        h.validate();
        return h;
    }
};

struct TrainArgs {
    int epochs = 30;
    long long batch = 1000;
    double lr = 5e-4;
    double validation = 0.1;
    std::vector<int> lstm_widths{56, 56};
    std::vector<int> ffnn_widths{56, 56};
    double dropout = 0.5;
    bool recurrent = false;
    long long chunk = 250;

    void add(CLI::App* app) {
        app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
        app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
        app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        app->add_option("--validation", validation, "Fraction of paths held out for validation")
            ->capture_default_str();
        app->add_option("--lstm-widths", lstm_widths, "Widths of the gated cells")->capture_default_str();
        app->add_option("--ffnn-widths", ffnn_widths, "Widths of the ReLU layers")->capture_default_str();
        app->add_option("--dropout", dropout, "Dropout probability on ReLU layers")->capture_default_str();
        app->add_flag("--recurrent", recurrent, "Feed each cell's previous output back into it");
        app->add_option("--chunk", chunk, "Paths per autodiff tape")->capture_default_str();
    }

    TrainConfig build(std::uint64_t seed, int threads) const {
        TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch;
        t.learning_rate = lr;
        t.validation_fraction = validation;
        t.seed = seed;
        t.arch.lstm_widths = lstm_widths;
        t.arch.ffnn_widths = ffnn_widths;
        t.arch.dropout = dropout;
        t.arch.recurrent = recurrent;
        t.chunk = chunk;
        t.threads = threads;
        return t;
    }
};

json option_value(const CLI::Option* opt) {
    if (opt->get_expected_max() == 0) {
        return opt->count() > 0;
    }
    if (opt->count() > 0) {
        const auto& res = opt->results();
        if (opt->get_expected_max() > 1 || res.size() > 1) {
            return res;
        }
        return res.empty() ? json("true") : json(res.front());
    }
    const std::string d = opt->get_default_str();
    return d.empty() ? json(nullptr) : json(d);
}

/// The options of `app` (and its parents' global options) as canonical JSON.
std::string resolved_config(const CLI::App* app) {
    json j;
    std::vector<std::string> path;
    for (const CLI::App* a = app; a != nullptr; a = a->get_parent()) {
        json section;
        for (const CLI::Option* opt : a->get_options()) {
            const std::string name = opt->get_single_name();
            if (name == "help" || name == "config" || name == "version") {
                continue;
            }
            section[name] = option_value(opt);
        }
        const std::string key = a->get_parent() == nullptr ? "global" : a->get_name();
        j[key] = section;
        if (a->get_parent() != nullptr) {
            path.insert(path.begin(), a->get_name());
        }
    }
    std::string command;
    for (const auto& p : path) {
        command += (command.empty() ? "" : " ") + p;
    }
    j["command"] = command;
    return j.dump();
}

void write_manifest(const CLI::App* app, const fs::path& file, const std::map<std::string, fs::path>& inputs,
                    const std::vector<fs::path>& outputs, const std::map<std::string, std::uint64_t>& seeds) {
    RunManifest m;
    m.command = app->get_name();
    m.config_json = resolved_config(app);
    for (const auto& [role, path] : inputs) {
        m.input_hashes[role] = sha256_file(path);
    }
    for (const auto& path : outputs) {
        m.output_hashes[path.filename().string()] = sha256_file(path);
    }
    m.seeds = seeds;
    write_text_file(file, m.to_json_text());
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
    return fs::path(p.string() + suffix);
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
}

struct LoadedStrategy {
    std::unique_ptr<Strategy> strategy;
    std::vector<Feature> features;  ///< inputs of a neural policy, empty for benchmarks
    fs::path checkpoint;
};

LoadedStrategy load_strategy(const std::string& spec) {
    LoadedStrategy s;
    if (spec == "bs") {
        s.strategy = std::make_unique<BenchmarkStrategy>(BenchmarkKind::BlackScholes);
    } else if (spec == "leland") {
        s.strategy = std::make_unique<BenchmarkStrategy>(BenchmarkKind::Leland);
    } else if (spec == "si") {
        s.strategy = std::make_unique<BenchmarkStrategy>(BenchmarkKind::SmileImplied);
    } else if (spec.rfind("checkpoint:", 0) == 0) {
        s.checkpoint = spec.substr(11);
        if (s.checkpoint.empty()) {
            throw ConfigError("--strategy checkpoint: needs a file name");
        }
        TrainResult tr = from_checkpoint(load_checkpoint(s.checkpoint));
        s.features = tr.policy.features;
        s.strategy = std::make_unique<NeuralStrategy>(std::move(tr.policy), "rl_" + s.checkpoint.stem().string());
    } else {
        throw ConfigError("unknown strategy '" + spec + "' (expected bs, leland, si or checkpoint:<file>)");
    }
    return s;
}

/// Hedge configuration for one strategy: a neural policy brings its own inputs.
HedgeConfig config_for(const HedgeConfig& base, const LoadedStrategy& s) {
    HedgeConfig h = base;
    if (!s.features.empty()) {
        h.features = s.features;
    }
    return h;
}

JivrModel load_model(const Global& g) {
    return JivrModel(load_jivr_params(g.resolved_params()));
}

std::string file_hash_or_empty(const fs::path& p) {
    return fs::exists(p) ? sha256_file(p) : std::string();
}

// --- simulate ----------------------------------------------------------------------

struct SimulateArgs {
    std::string market = "jivr";
    long long paths = 1000;
    int horizon = 63;
    std::uint64_t seed = 1;
    std::string pool = std::string(IVHEDGE_DEFAULT_DATA_DIR) + "/synthetic_pool.csv";
    std::string cluster;
    bool record = false;
    double mu = 0.0892;
    double sigma = 0.1952;
    double r = 0.0;
    double q = 0.0;
    double step_days = 1.0;
    double S0 = 100.0;
    std::string out;
    std::string export_csv;
};

void cmd_simulate(const CLI::App* app, const Global& g, const SimulateArgs& a, std::ostream& out) {
    PathSet p;
    std::map<std::string, fs::path> inputs;
    if (a.market == "jivr") {
        const std::string params = g.resolved_params();
        const JivrModel model = load_model(g);
        const StatePool pool = load_state_pool(a.pool);
        SimulateOptions opt;
        opt.threads = g.worker_count();
        opt.record_innovations = a.record;
        opt.cluster = a.cluster;
        opt.S0 = a.S0;
        p = simulate(model, pool, a.horizon, a.paths, a.seed, opt);
        p.params_hash = sha256_file(params);
        inputs["params"] = params;
        inputs["pool"] = a.pool;
    } else if (a.market == "bs") {
        p = simulate_black_scholes(a.mu, a.sigma, a.r, a.q, a.horizon, a.step_days / 252.0, a.paths, a.seed, a.S0,
                                   g.worker_count());
    } else {
        throw ConfigError("simulate --market must be jivr or bs, got '" + a.market + "'");
    }
    const fs::path stem = a.out;
    ensure_parent(stem);
    save_pathset(p, stem);
    std::vector<fs::path> outputs{with_suffix(stem, ".bin"), with_suffix(stem, ".json")};
    if (!a.export_csv.empty()) {
        ensure_parent(a.export_csv);
        export_pathset_csv(p, a.export_csv);
        outputs.emplace_back(a.export_csv);
    }
    write_manifest(app, with_suffix(stem, ".manifest.json"), inputs, outputs, {{"seed", a.seed}});
    out << "simulated " << p.n_paths << " paths x " << p.horizon << " steps -> " << stem.string() << ".bin\n";
}

// --- train -------------------------------------------------------------------------

struct TrainCmdArgs {
    std::string paths;
    std::uint64_t seed = 1;
    std::string resume;
    std::string out;
    std::string loss_curve;
    HedgeArgs hedge;
    TrainArgs train;
};

void cmd_train(const CLI::App* app, const Global& g, const TrainCmdArgs& a, std::ostream& out) {
    const HedgeConfig hedge = a.hedge.build();
    const PathSet paths = load_pathset(a.paths);
    const TrainConfig tcfg = [&] {
        TrainConfig t = a.train.build(a.seed, g.worker_count());
        t.on_epoch = [&out](const EpochStats& s) {
            out << "epoch " << s.epoch << " train " << format_double(s.train_loss) << " validation "
                << format_double(s.validation_loss) << '\n';
        };
        return t;
    }();
    TrainResult result;
    std::map<std::string, fs::path> inputs{{"paths_bin", with_suffix(a.paths, ".bin")},
                                           {"paths_json", with_suffix(a.paths, ".json")}};
    if (!a.resume.empty()) {
        const Checkpoint ck = load_checkpoint(a.resume);
        result = train_from(tcfg, hedge, paths, from_checkpoint(ck));
        inputs["resume"] = a.resume;
    } else {
        result = train(tcfg, hedge, paths);
    }
    const fs::path ckpt_file = a.out;
    ensure_parent(ckpt_file);
    save_checkpoint(make_checkpoint(result, tcfg, hedge), ckpt_file);
    const fs::path curve = a.loss_curve.empty() ? with_suffix(ckpt_file, ".loss.csv") : fs::path(a.loss_curve);
    ensure_parent(curve);
    write_loss_curve_csv(result.curve, curve);
    write_manifest(app, with_suffix(ckpt_file, ".manifest.json"), inputs, {ckpt_file, curve}, {{"seed", a.seed}});
    out << "checkpoint -> " << ckpt_file.string() << '\n';
}

// --- evaluate ----------------------------------------------------------------------

struct EvaluateArgs {
    std::string paths;
    std::vector<std::string> strategies{"bs"};
    std::string out;
    std::string export_prefix;
    bool trajectory = false;
    double deviation_alpha = 0.95;
    HedgeArgs hedge;
};

void cmd_evaluate(const CLI::App* app, const Global& g, const EvaluateArgs& a, std::ostream& out) {
    const HedgeConfig base = a.hedge.build();
    const PathSet paths = load_pathset(a.paths);
    std::vector<MetricsReport> reports;
    std::vector<fs::path> outputs;
    std::map<std::string, fs::path> inputs{{"paths_bin", with_suffix(a.paths, ".bin")},
                                           {"paths_json", with_suffix(a.paths, ".json")}};
    RunOptions opt;
    opt.threads = g.worker_count();
    opt.keep_trajectory = a.trajectory;
    for (const auto& spec : a.strategies) {
        const LoadedStrategy s = load_strategy(spec);
        if (!s.checkpoint.empty()) {
            inputs["checkpoint_" + s.strategy->name()] = s.checkpoint;
        }
        const HedgeConfig h = config_for(base, s);
        const HedgeResult res = run_hedge(paths, *s.strategy, h, opt);
        reports.push_back(summarize(s.strategy->name(), res, paths, a.deviation_alpha));
        if (!a.export_prefix.empty()) {
            const fs::path f = a.export_prefix + "_" + s.strategy->name() + ".csv";
            const fs::path traj = a.trajectory ? fs::path(a.export_prefix + "_" + s.strategy->name() + "_trajectory.csv")
                                               : fs::path();
            ensure_parent(f);
            export_hedge_csv(res, f, traj);
            outputs.push_back(f);
            if (!traj.empty()) {
                outputs.push_back(traj);
            }
        }
        const Metrics& m = reports.back().overall;
        out << s.strategy->name() << ": mse " << format_double(m.mse) << " smse " << format_double(m.smse)
            << " cvar95 " << format_double(m.cvar_95) << " cost " << format_double(m.cost_mean) << '\n';
    }
    const fs::path file = a.out;
    ensure_parent(file);
    write_metrics_csv(reports, file);
    outputs.insert(outputs.begin(), file);
    write_manifest(app, with_suffix(file, ".manifest.json"), inputs, outputs, {});
}

// --- backtest ----------------------------------------------------------------------

struct BacktestArgs {
    std::string history;
    double r = 0.0266;
    double q = 0.0177;
    int max_gap_days = 7;
    int maturity = 63;
    int spacing = 21;
    std::vector<std::string> strategies{"bs"};
    std::string out;
    HedgeArgs hedge;
};

void cmd_backtest(const CLI::App* app, const Global& g, const BacktestArgs& a, std::ostream& out) {
    const HedgeConfig base = a.hedge.build();
    const PathSet history = load_history(a.history, a.r, a.q, a.max_gap_days);
    std::vector<LoadedStrategy> loaded;
    std::map<std::string, fs::path> inputs{{"history", a.history}};
    for (const auto& spec : a.strategies) {
        loaded.push_back(load_strategy(spec));
        if (!loaded.back().checkpoint.empty()) {
            inputs["checkpoint_" + loaded.back().strategy->name()] = loaded.back().checkpoint;
        }
    }
    BacktestOptions opt;
    opt.maturity = a.maturity;
    opt.spacing = a.spacing;
    // Each strategy runs with its own inputs, then the columns are merged.
    BacktestResult merged;
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        const HedgeConfig h = config_for(base, loaded[i]);
        const BacktestResult one = backtest({loaded[i].strategy.get()}, history, h, opt, g.worker_count());
        if (i == 0) {
            merged = one;
            continue;
        }
        merged.strategies.push_back(one.strategies.front());
        merged.pnl.conservativeResize(Eigen::NoChange, merged.pnl.cols() + 1);
        merged.pnl.rightCols(1) = one.pnl;
        merged.cumulative.conservativeResize(Eigen::NoChange, merged.cumulative.cols() + 1);
        merged.cumulative.rightCols(1) = one.cumulative;
    }
    const fs::path file = a.out;
    ensure_parent(file);
    write_backtest_csv(merged, file);
    write_manifest(app, with_suffix(file, ".manifest.json"), inputs, {file}, {});
    out << merged.pnl.rows() << " options x " << merged.strategies.size() << " strategies -> " << file.string()
        << '\n';
}

// --- sage --------------------------------------------------------------------------

struct SageArgs {
    std::string train_paths;
    std::string test_paths;
    bool tiny = false;
    std::string mode = "sampled";
    int permutations = 200;
    std::uint64_t seed = 1;
    int subset_threads = 1;
    std::string pool = std::string(IVHEDGE_DEFAULT_DATA_DIR) + "/synthetic_pool.csv";
    std::string out;
    HedgeArgs hedge;
    TrainArgs train;
};

void cmd_sage(const CLI::App* app, const Global& g, SageArgs a, std::ostream& out) {
    HedgeConfig hedge = a.hedge.build();
    PathSet train_paths;
    PathSet test_paths;
    std::map<std::string, fs::path> inputs;
    TrainConfig tcfg = a.train.build(a.seed, g.worker_count());
    if (a.tiny) {
        // Small enough for the 64 exact-mode subset trainings to finish in seconds.
        hedge.steps = 5;
        tcfg.epochs = 2;
        tcfg.batch_size = 100;
        tcfg.validation_fraction = 0.0;
        tcfg.arch.lstm_widths = {4};
        tcfg.arch.ffnn_widths = {4};
        tcfg.chunk = 100;
        const JivrModel model = load_model(g);
        const StatePool pool = load_state_pool(a.pool);
        SimulateOptions opt;
        opt.threads = g.worker_count();
        train_paths = simulate(model, pool, hedge.steps, 300, mix64(a.seed ^ 0x747261696eULL), opt);
        test_paths = simulate(model, pool, hedge.steps, 300, mix64(a.seed ^ 0x74657374ULL), opt);
        inputs["params"] = g.resolved_params();
        inputs["pool"] = a.pool;
    } else {
        if (a.train_paths.empty() || a.test_paths.empty()) {
            throw ConfigError("sage needs --train-paths and --test-paths (or --tiny)");
        }
        train_paths = load_pathset(a.train_paths);
        test_paths = load_pathset(a.test_paths);
        inputs["train_paths"] = with_suffix(a.train_paths, ".bin");
        inputs["test_paths"] = with_suffix(a.test_paths, ".bin");
    }
    SageConfig cfg;
    cfg.mode = sage_mode_from_name(a.mode);
    cfg.permutations = a.permutations;
    cfg.seed = a.seed;
    cfg.train = tcfg;
    cfg.subset_threads = g.reference ? 1 : std::max(1, a.subset_threads);
    const SageReport rep = sage(cfg, hedge, train_paths, test_paths);
    const fs::path prefix = a.out;
    ensure_parent(prefix);
    const fs::path csv = with_suffix(prefix, ".csv");
    const fs::path subsets = with_suffix(prefix, "_subsets.csv");
    const fs::path js = with_suffix(prefix, ".json");
    write_sage_csv(rep, csv, subsets);
    write_text_file(js, sage_report_to_json(rep));
    write_manifest(app, with_suffix(prefix, ".manifest.json"), inputs, {csv, subsets, js}, {{"seed", a.seed}});
    out << "sage (" << a.mode << ", " << rep.subset_risk.size() << " subsets): total reduction "
        << format_double(rep.total_reduction()) << " -> " << csv.string() << '\n';
}

// --- pool / params -----------------------------------------------------------------

void cmd_pool_synthetic(const CLI::App* app, const Global& g, int rows, int burn_in, int stride, std::uint64_t seed,
                        const std::string& out_file, std::ostream& out) {
    const JivrModel model = load_model(g);
    const StatePool pool = make_synthetic_pool(model, burn_in, rows, seed, stride);
    ensure_parent(out_file);
    save_state_pool(pool, out_file);
    write_manifest(app, with_suffix(out_file, ".manifest.json"), {{"params", g.resolved_params()}}, {out_file},
                   {{"seed", seed}});
    out << pool.size() << " synthetic states -> " << out_file << '\n';
}

void cmd_params_show(const Global& g, std::ostream& out) {
    const std::string file = g.resolved_params();
    const JivrParams p = load_jivr_params(file);
    out << jivr_params_to_json_text(p);
    out << "sha256 " << file_hash_or_empty(file) << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deep hedging of options with an implied-volatility surface market model", "ivhedge"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON configuration; sections are named after commands");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.set_version_flag("--version", build_version());

    Global g;
    app.add_option("--params", g.params_file, "JIVR parameter file (default: $IVHEDGE_PARAMS or the shipped file)");
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_flag("--reference", g.reference, "Single-threaded canonical mode");

    SimulateArgs sim;
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Simulate market paths");
    simulate_cmd->add_option("--market", sim.market, "jivr or bs")->capture_default_str();
    simulate_cmd->add_option("--paths", sim.paths, "Number of paths")->check(CLI::PositiveNumber)->capture_default_str();
    simulate_cmd->add_option("--horizon", sim.horizon, "Steps per path")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    simulate_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    simulate_cmd->add_option("--pool", sim.pool, "Initial-state pool CSV")->capture_default_str();
    simulate_cmd->add_option("--cluster", sim.cluster, "Restrict initial states to a cluster label");
    simulate_cmd->add_flag("--record-innovations", sim.record, "Store the innovations with the paths");
    simulate_cmd->add_option("--mu", sim.mu, "Black-Scholes market drift (annual)")->capture_default_str();
    simulate_cmd->add_option("--sigma", sim.sigma, "Black-Scholes market volatility (annual)")->capture_default_str();
    simulate_cmd->add_option("--r", sim.r, "Black-Scholes market risk-free rate")->capture_default_str();
    simulate_cmd->add_option("--q", sim.q, "Black-Scholes market dividend yield")->capture_default_str();
    simulate_cmd->add_option("--step-days", sim.step_days, "Black-Scholes market step in trading days")
        ->check(CLI::PositiveNumber)->capture_default_str();
    simulate_cmd->add_option("--S0", sim.S0, "Initial spot")->check(CLI::PositiveNumber)->capture_default_str();
    simulate_cmd->add_option("--out", sim.out, "Output stem (writes <stem>.bin and <stem>.json)")->required();
    simulate_cmd->add_option("--export-csv", sim.export_csv, "Also write the paths as CSV");

    TrainCmdArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a hedging policy");
    train_cmd->add_option("--paths", tr.paths, "Training PathSet stem")->required();
    train_cmd->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
    train_cmd->add_option("--resume", tr.resume, "Continue from a checkpoint");
    train_cmd->add_option("--out", tr.out, "Checkpoint file")->required();
    train_cmd->add_option("--loss-curve", tr.loss_curve, "Loss curve CSV (default <out>.loss.csv)");
    tr.hedge.add(train_cmd, true);
    tr.train.add(train_cmd);

    EvaluateArgs ev;
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate hedging strategies on saved paths");
    evaluate_cmd->add_option("--paths", ev.paths, "PathSet stem")->required();
    evaluate_cmd->add_option("--strategy", ev.strategies, "bs, leland, si or checkpoint:<file> (repeatable)")
        ->capture_default_str();
    evaluate_cmd->add_option("--out", ev.out, "Metrics CSV")->required();
    evaluate_cmd->add_option("--export-csv", ev.export_prefix, "Write per-path results to <prefix>_<strategy>.csv");
    evaluate_cmd->add_flag("--trajectory", ev.trajectory, "Include per-step positions in the export");
    evaluate_cmd->add_option("--deviation-alpha", ev.deviation_alpha, "Level of the CVaR deviation metric")
        ->capture_default_str();
    ev.hedge.add(evaluate_cmd, false);

    BacktestArgs bt;
    CLI::App* backtest_cmd = app.add_subcommand("backtest", "Rolling hedges along a historical state series");
    backtest_cmd->add_option("--history", bt.history, "History CSV")->required();
    backtest_cmd->add_option("--r", bt.r, "Risk-free rate")->capture_default_str();
    backtest_cmd->add_option("--q", bt.q, "Dividend yield")->capture_default_str();
    backtest_cmd->add_option("--max-gap-days", bt.max_gap_days, "Largest calendar gap accepted")->capture_default_str();
    backtest_cmd->add_option("--maturity", bt.maturity, "Option life in steps")->capture_default_str();
    backtest_cmd->add_option("--spacing", bt.spacing, "Steps between openings")->capture_default_str();
    backtest_cmd->add_option("--strategy", bt.strategies, "bs, leland, si or checkpoint:<file> (repeatable)")
        ->capture_default_str();
    backtest_cmd->add_option("--out", bt.out, "Cumulative P&L CSV")->required();
    bt.hedge.add(backtest_cmd, false);

    SageArgs sg;
    sg.train.epochs = 10;
    sg.train.lstm_widths = {16, 16};
    sg.train.ffnn_widths = {16, 16};
    CLI::App* sage_cmd = app.add_subcommand("sage", "Shapley attribution of surface features");
    sage_cmd->add_option("--train-paths", sg.train_paths, "Training PathSet stem");
    sage_cmd->add_option("--test-paths", sg.test_paths, "Test PathSet stem");
    sage_cmd->add_flag("--tiny", sg.tiny, "Use a small built-in market and network");
    sage_cmd->add_option("--mode", sg.mode, "exact or sampled")->capture_default_str();
    sage_cmd->add_option("--permutations", sg.permutations, "Permutations in sampled mode")->capture_default_str();
    sage_cmd->add_option("--seed", sg.seed, "Master seed")->capture_default_str();
    sage_cmd->add_option("--subset-threads", sg.subset_threads, "Subsets trained concurrently")
        ->capture_default_str();
    sage_cmd->add_option("--pool", sg.pool, "Initial-state pool CSV for --tiny")->capture_default_str();
    sage_cmd->add_option("--out", sg.out, "Output prefix (<prefix>.csv, <prefix>_subsets.csv, <prefix>.json)")
        ->required();
    sg.hedge.add(sage_cmd, false);
    sg.train.add(sage_cmd);

    CLI::App* pool_cmd = app.add_subcommand("pool", "Initial-state pools");
    pool_cmd->require_subcommand(1);
    int pool_rows = 500;
    int pool_burn = 252;
    int pool_stride = 5;
    std::uint64_t pool_seed = 1;
    std::string pool_out;
    CLI::App* pool_syn = pool_cmd->add_subcommand("make-synthetic", "Sample a pool from the model's own dynamics");
    pool_syn->add_option("--rows", pool_rows, "Rows to keep")->check(CLI::PositiveNumber)->capture_default_str();
    pool_syn->add_option("--burn-in", pool_burn, "Discarded days")->capture_default_str();
    pool_syn->add_option("--stride", pool_stride, "Days between kept states")->check(CLI::PositiveNumber)
        ->capture_default_str();
    pool_syn->add_option("--seed", pool_seed, "Seed")->capture_default_str();
    pool_syn->add_option("--out", pool_out, "Output CSV")->required();

    CLI::App* params_cmd = app.add_subcommand("params", "Model parameter files");
    params_cmd->require_subcommand(1);
    CLI::App* params_show = params_cmd->add_subcommand("show", "Validate and print the resolved parameter file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kConfigError;
    }

    try {
        if (simulate_cmd->parsed()) {
            cmd_simulate(simulate_cmd, g, sim, out);
        } else if (train_cmd->parsed()) {
            cmd_train(train_cmd, g, tr, out);
        } else if (evaluate_cmd->parsed()) {
            cmd_evaluate(evaluate_cmd, g, ev, out);
        } else if (backtest_cmd->parsed()) {
            cmd_backtest(backtest_cmd, g, bt, out);
        } else if (sage_cmd->parsed()) {
            cmd_sage(sage_cmd, g, sg, out);
        } else if (pool_syn->parsed()) {
            cmd_pool_synthetic(pool_syn, g, pool_rows, pool_burn, pool_stride, pool_seed, pool_out, out);
        } else if (params_show->parsed()) {
            cmd_params_show(g, out);
        }
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kRuntimeError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kSuccess;
}

}  // namespace ivhedge::cli
