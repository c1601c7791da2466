#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ivhedge/benchmarks.hpp"
#include "ivhedge/csv.hpp"
#include "ivhedge/hedging.hpp"
#include "ivhedge/jivr.hpp"
#include "ivhedge/manifest.hpp"
#include "ivhedge/neural.hpp"
#include "ivhedge/parallel.hpp"
#include "ivhedge/sage.hpp"
#include "ivhedge/stochastics.hpp"
#include "ivhedge/training.hpp"

namespace fs = std::filesystem;
using namespace ivhedge;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

fs::path data_file(const std::string& name) { return fs::path(IVHEDGE_TEST_DATA_DIR) / name; }

JivrModel shipped_model() { return JivrModel(load_jivr_params(data_file("jivr_params.json"))); }

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("ivhedge_acceptance_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int threads() { return resolve_threads(0); }

double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double variance(const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0.0;
    for (const double v : x) {
        s += (v - m) * (v - m);
    }
    return s / static_cast<double>(x.size() - 1);
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// --- 1: NIG marginals and copula --------------------------------------------------

Outcome criterion_1() {
    const JivrModel model = shipped_model();
    const CopulaSpec& c = model.params().copula;
    std::array<const NigDistribution*, 6> marg{};
    for (int k = 0; k < 6; ++k) {
        marg[static_cast<std::size_t>(k)] = &model.marginal(k);
    }
    const int n = 1'000'000;
    NormalSource src(RngStream(1, 0));
    std::vector<double> zr(n);
    std::vector<double> z1(n);
    std::vector<std::vector<double>> eps(6, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        NormalSource probe = src;
        const Vector6 z = copula_normals(probe, c);
        zr[static_cast<std::size_t>(i)] = z(0);
        z1[static_cast<std::size_t>(i)] = z(1);
        const InnovationVector e = copula_sample(src, c, marg);
        for (int k = 0; k < 6; ++k) {
            eps[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = e(k);
        }
    }
    double worst_mean = 0.0;
    double worst_var = 0.0;
    for (const auto& e : eps) {
        worst_mean = std::max(worst_mean, std::abs(mean(e)));
        worst_var = std::max(worst_var, std::abs(variance(e) - 1.0));
    }
    const double rho = correlation(zr, z1);
    const bool pass = worst_mean < 0.01 && worst_var < 0.01 && std::abs(rho + 0.550) <= 0.02;
    return {pass, "max|mean| " + fmt(worst_mean) + " (< 0.01), max|var-1| " + fmt(worst_var) +
                      " (< 0.01), normal-scores corr(eps_R, eps_1) " + fmt(rho) + " (-0.550 +- 0.02)"};
}

// --- 2: cumulant function -----------------------------------------------------------

Outcome criterion_2() {
    const NigParams p{-0.641306, 2.039669};
    const NigDistribution d(p);
    NormalSource src(RngStream(2, 0));
    const int n = 1'000'000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = std::exp(0.1 * d.sample(src));
        s += v;
        s2 += v * v;
    }
    const double m = s / n;
    const double se = std::sqrt((s2 / n - m * m) / (n - 1));
    const double target = std::exp(nig_psi(0.1, p));
    const double psi0 = nig_psi(0.0, p);
    const bool pass = psi0 == 0.0 && std::abs(m - target) < 3.0 * se;
    return {pass, "psi(0) = " + fmt(psi0) + ", |mean(e^{0.1 eps}) - e^{psi(0.1)}| = " + fmt(std::abs(m - target)) +
                      " vs 3 SE = " + fmt(3.0 * se)};
}

// --- 3: policy gradient vs finite differences ------------------------------------------

Array uniform_block(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    RngStream g(seed, 5);
    Array a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = 2.0 * g.uniform() - 1.0;
    }
    return a;
}

double policy_objective(const PolicyWeights& w, const std::vector<Array>& X, const std::vector<Array>& readout,
                        const Array& bound, std::uint64_t* signature, PolicyWeights* grad) {
    Tape t;
    t.set_track_kinks(true);
    const BoundWeights bw = bind(t, w, grad != nullptr);
    RecurrentState rec;
    Var total = t.constant(0.0, 1, 1);
    for (std::size_t s = 0; s < X.size(); ++s) {
        const PolicyOutput out = policy_forward(bw, w.arch, t.constant(X[s]), rec, t.constant(bound), nullptr);
        total = total + sum(out.delta_out * t.constant(readout[s]));
    }
    *signature = t.signature();
    const double v = total.value()(0, 0);
    if (grad != nullptr) {
        t.backward(total);
        *grad = gradients(t, bw, w.arch);
    }
    return v;
}

Outcome criterion_3() {
    const double h = 1e-6;
    double worst = 0.0;
    long compared = 0;
    long skipped = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Architecture a;
        a.input_dim = 4;
        a.lstm_widths = {5, 4};
        a.ffnn_widths = {6, 3};
        a.recurrent = seed % 2 == 0;
        a.dropout = 0.0;
        PolicyWeights w = glorot_init(a, seed);
        RngStream g(seed, 77);
        auto jitter = [&](Eigen::MatrixXd& m) {
            for (Eigen::Index i = 0; i < m.size(); ++i) {
                m.data()[i] = 0.2 * (g.uniform() - 0.5);
            }
        };
        for (auto& b : w.cell_b) jitter(b);
        for (auto& b : w.ffnn_b) jitter(b);
        jitter(w.out_b);
        std::vector<Array> X;
        std::vector<Array> readout;
        for (std::uint64_t s = 0; s < 3; ++s) {
            X.push_back(uniform_block(4, 8, 100 * seed + s));
            readout.push_back(uniform_block(1, 8, 900 + 100 * seed + s));
        }
        Array bound = Array::Constant(1, 8, std::numeric_limits<double>::infinity());
        bound(0, static_cast<Eigen::Index>(seed % 8)) = -2.0;
        std::uint64_t sig0 = 0;
        PolicyWeights gw;
        policy_objective(w, X, readout, bound, &sig0, &gw);
        const Eigen::VectorXd flat = w.flatten();
        const Eigen::VectorXd gflat = gw.flatten();
        for (Eigen::Index k = 0; k < flat.size(); ++k) {
            PolicyWeights up = w;
            PolicyWeights dn = w;
            Eigen::VectorXd f = flat;
            f(k) += h;
            up.unflatten(f);
            f(k) -= 2 * h;
            dn.unflatten(f);
            std::uint64_t su = 0;
            std::uint64_t sd = 0;
            const double fu = policy_objective(up, X, readout, bound, &su, nullptr);
            const double fd = policy_objective(dn, X, readout, bound, &sd, nullptr);
            if (su != sig0 || sd != sig0) {
                ++skipped;  // a ReLU or min switched inside the difference stencil
                continue;
            }
            const double num = (fu - fd) / (2 * h);
            const double scale = std::max({std::abs(num), std::abs(gflat(k)), 1e-3});
            worst = std::max(worst, std::abs(num - gflat(k)) / scale);
            ++compared;
        }
    }
    const bool pass = worst < 1e-5 && compared > 0;
    return {pass, "max relative error " + fmt(worst) + " (< 1e-5, denominator floor 1e-3) over " +
                      std::to_string(compared) + " parameters, 5 seeds, " + std::to_string(skipped) +
                      " skipped at kinks"};
}

// --- 4: benchmark identities -------------------------------------------------------------

Outcome criterion_4() {
    RngStream g(4, 0);
    double worst_leland = 0.0;
    double worst_si = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double S = 60.0 + 80.0 * g.uniform();
        const double tau = SurfaceConstants::t_min + (1.0 - SurfaceConstants::t_min) * g.uniform();
        SurfaceCoeffs b;
        b << 0.1 + 0.3 * g.uniform(), 0.1 * (g.uniform() - 0.5), 0, 0, 0;
        const double bs = bs_delta(S, 100, tau, b, 0.0266, 0.0177);
        worst_leland = std::max(worst_leland, std::abs(leland_delta(S, 100, tau, b, 0.0266, 0.0177, 0.0, 252) - bs));
        worst_si = std::max(worst_si, std::abs(si_delta(S, 100, tau, b, 0.0266, 0.0177) - bs));
    }
    const bool pass = worst_leland <= 1e-12 && worst_si <= 1e-12;
    return {pass, "max|leland(kappa=0) - bs| " + fmt(worst_leland) + ", max|si(flat smile) - bs| " + fmt(worst_si) +
                      " (<= 1e-12, 1000 points)"};
}

// --- 5, 6: Black-Scholes market ----------------------------------------------------------

constexpr double kBsMu = 0.0892;
constexpr double kBsSigma = 0.1952;
constexpr int kBsSteps = 16;
constexpr double kBsStepYears = 63.0 / 252.0 / kBsSteps;

PathSet bs_market(Eigen::Index n, std::uint64_t seed) {
    return simulate_black_scholes(kBsMu, kBsSigma, 0.0, 0.0, kBsSteps, kBsStepYears, n, seed, 100.0, threads());
}

HedgeConfig bs_hedge() {
    HedgeConfig cfg;
    cfg.steps = kBsSteps;
    cfg.penalty = Penalty::parse("mse");
    return cfg;
}

MetricsReport assess(const Strategy& strategy, const PathSet& paths, const HedgeConfig& cfg) {
    RunOptions opt;
    opt.threads = threads();
    return evaluate(strategy, paths, cfg, opt);
}

bool within(double x, double target, double rel) { return std::abs(x - target) <= rel * target; }

Outcome criterion_5() {
    const PathSet test = bs_market(99'000, 42);
    const MetricsReport r = assess(BenchmarkStrategy(BenchmarkKind::BlackScholes), test, bs_hedge());
    const bool pass = within(r.overall.mse, 0.684, 0.10) && within(r.overall.cvar_95, 1.942, 0.10);
    return {pass, "BS delta on 99000 paths: MSE " + fmt(r.overall.mse) + " (0.684 +- 10%), CVaR95 " +
                      fmt(r.overall.cvar_95) + " (1.942 +- 10%)"};
}

TrainConfig desk_training(std::uint64_t seed, int epochs) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 1000;
    t.learning_rate = 5e-4;
    t.seed = seed;
    t.validation_fraction = 0.1;
    t.arch.lstm_widths = {56, 56};
    t.arch.ffnn_widths = {56, 56};
    t.arch.dropout = 0.0;
    t.threads = threads();
    t.on_epoch = [](const EpochStats& s) {
        std::cerr << "  epoch " << s.epoch << " train " << fmt(s.train_loss) << " validation "
                  << fmt(s.validation_loss) << '\n';
    };
    return t;
}

constexpr int kBsEpochs = 30;

Outcome criterion_6() {
    const HedgeConfig cfg = bs_hedge();
    const PathSet train_paths = bs_market(50'000, 7);
    const TrainResult tr = train(desk_training(6, kBsEpochs), cfg, train_paths);
    const PathSet test = bs_market(99'000, 42);
    const MetricsReport bs = assess(BenchmarkStrategy(BenchmarkKind::BlackScholes), test, cfg);
    const MetricsReport rl = assess(NeuralStrategy(tr.policy), test, cfg);
    const bool pass = rl.overall.mse <= 1.10 * bs.overall.mse;
    return {pass, "RL-MSE " + fmt(rl.overall.mse) + " vs 1.10 x BS " + fmt(bs.overall.mse) + " = " +
                      fmt(1.10 * bs.overall.mse) + " (50000 training paths, " + std::to_string(kBsEpochs) +
                      " epochs, dropout 0)"};
}

// --- 7, 8: JIVR market ------------------------------------------------------------

constexpr int kJivrEpochs = 25;

struct JivrData {
    PathSet train;
    PathSet test;
};

JivrData jivr_data() {
    const JivrModel model = shipped_model();
    const StatePool pool = load_state_pool(data_file("synthetic_pool.csv"));
    SimulateOptions opt;
    opt.threads = threads();
    return {simulate(model, pool, 63, 50'000, 101, opt), simulate(model, pool, 63, 20'000, 202, opt)};
}

Outcome criterion_7() {
    const JivrData d = jivr_data();
    HedgeConfig cfg;
    cfg.steps = 63;
    cfg.kappa = 0.0;
    cfg.state_space = StateSpace::ReducedNoTc;
    cfg.penalty = Penalty::parse("mse");
    const TrainResult tr = train(desk_training(7, kJivrEpochs), cfg, d.train);
    const MetricsReport bs = assess(BenchmarkStrategy(BenchmarkKind::BlackScholes), d.test, cfg);
    const MetricsReport rl = assess(NeuralStrategy(tr.policy), d.test, cfg);
    const double reduction = 1.0 - rl.overall.mse / bs.overall.mse;
    const bool pass = rl.overall.mse < bs.overall.mse;
    return {pass, "RL-MSE " + fmt(rl.overall.mse) + " vs BS " + fmt(bs.overall.mse) + " on 20000 test paths, reduction " +
                      fmt(100.0 * reduction, 3) + "% (strict improvement required, target 10%)"};
}

Outcome criterion_8() {
    const JivrData d = jivr_data();
    HedgeConfig cfg;
    cfg.steps = 63;
    cfg.kappa = 0.01;
    cfg.state_space = StateSpace::ReducedTc;
    cfg.penalty = Penalty::parse("smse");
    const TrainResult tr = train(desk_training(8, kJivrEpochs), cfg, d.train);
    const MetricsReport bs = assess(BenchmarkStrategy(BenchmarkKind::BlackScholes), d.test, cfg);
    const MetricsReport rl = assess(NeuralStrategy(tr.policy), d.test, cfg);
    const bool pass = rl.overall.cost_mean < 0.7 * bs.overall.cost_mean;
    return {pass, "kappa 1%: RL-SMSE mean cost " + fmt(rl.overall.cost_mean) + " vs 0.7 x BS " +
                      fmt(bs.overall.cost_mean) + " = " + fmt(0.7 * bs.overall.cost_mean) + " (ratio " +
                      fmt(rl.overall.cost_mean / bs.overall.cost_mean) + ")"};
}

// --- 9: SAGE ------------------------------------------------------------------------

Outcome criterion_9() {
    const JivrModel model = shipped_model();
    const StatePool pool = load_state_pool(data_file("synthetic_pool.csv"));
    const PathSet train_paths = simulate(model, pool, 5, 300, 91);
    const PathSet test_paths = simulate(model, pool, 5, 300, 92);
    HedgeConfig hedge;
    hedge.steps = 5;
    SageConfig cfg;
    cfg.mode = SageMode::Exact;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 100;
    cfg.train.validation_fraction = 0.0;
    cfg.train.arch.lstm_widths = {4};
    cfg.train.arch.ffnn_widths = {4};
    cfg.train.chunk = 100;
    const SageReport full = sage(cfg, hedge, train_paths, test_paths);
    const double total = std::accumulate(full.contributions.begin(), full.contributions.end(), 0.0);
    const double gap = std::abs(total - (full.risk_baseline - full.risk_full));

    cfg.universe = {Feature::HR};
    const SageReport single = sage(cfg, hedge, train_paths, test_paths);
    TrainConfig t = cfg.train;
    t.seed = subset_seed(cfg.seed, 0);
    HedgeConfig h = hedge;
    h.features = subset_features(cfg, 0);
    const TrainResult r = train(t, h, train_paths);
    const double direct = penalty_estimate(run_hedge(test_paths, NeuralStrategy(r.policy), h).xi, h.penalty);
    const bool single_ok = single.contributions.size() == 1 &&
                           single.contributions[0] == single.subset_risk.at(0) - single.subset_risk.at(1) &&
                           single.subset_risk.at(0) == direct;
    const bool pass = gap <= 1e-9 && single_ok && full.subset_risk.size() == 64;
    return {pass, "exact mode, 64 subsets: |sum C - (rho_base - rho_full)| = " + fmt(gap) +
                      " (<= 1e-9); single feature equals direct risk difference: " + (single_ok ? "yes" : "no")};
}

// --- 10: CLI determinism ---------------------------------------------------------

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
    std::map<std::string, std::string> h;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            h[fs::relative(e.path(), dir).string()] = sha256_file(e.path());
        }
    }
    return h;
}

int run_cli(const std::vector<std::string>& args, std::string* out_text) {
    std::vector<std::string> full{"ivhedge"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    *out_text = out.str();
    if (code != 0) {
        std::cerr << err.str();
    }
    return code;
}

Outcome criterion_10() {
    const fs::path dir = fresh_dir("determinism");
    const std::string params = data_file("jivr_params.json").string();
    const std::string pool = data_file("synthetic_pool.csv").string();
    const std::string history = data_file("synthetic_history.csv").string();
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    const std::vector<std::vector<std::string>> commands{
        {"--reference", "--params", params, "params", "show"},
        {"--reference", "--params", params, "pool", "make-synthetic", "--rows", "40", "--burn-in", "300", "--seed",
         "3", "--out", p("pool.csv")},
        {"--reference", "--params", params, "simulate", "--pool", pool, "--paths", "600", "--horizon", "10", "--seed",
         "5", "--record-innovations", "--out", p("jivr"), "--export-csv", p("jivr.csv")},
        {"--reference", "simulate", "--market", "bs", "--paths", "600", "--horizon", "10", "--seed", "6", "--out",
         p("bs")},
        {"--reference", "train", "--paths", p("jivr"), "--steps", "10", "--tc", "0.005", "--state-space", "reduced_tc",
         "--penalty", "cvar95", "--epochs", "2", "--batch", "100", "--lstm-widths", "6", "--ffnn-widths", "6",
         "--seed", "9", "--out", p("model.json")},
        {"--reference", "evaluate", "--paths", p("jivr"), "--steps", "10", "--tc", "0.005", "--strategy", "bs",
         "--strategy", "leland", "--strategy", "si", "--strategy", "checkpoint:" + p("model.json"), "--export-csv",
         p("per_path"), "--trajectory", "--out", p("metrics.csv")},
        {"--reference", "backtest", "--history", history, "--strategy", "bs", "--strategy",
         "checkpoint:" + p("model.json"), "--tc", "0.005", "--out", p("backtest.csv")},
        {"--reference", "--params", params, "sage", "--tiny", "--mode", "sampled", "--permutations", "20", "--pool",
         pool, "--seed", "4", "--out", p("sage")},
    };
    std::vector<std::string> first_out;
    for (const auto& c : commands) {
        std::string text;
        if (run_cli(c, &text) != 0) {
            std::string line;
            for (const auto& a : c) {
                line += " " + a;
            }
            return {false, "command failed:" + line};
        }
        first_out.push_back(text);
    }
    const auto first = hash_tree(dir);
    fs::remove_all(dir);
    fs::create_directories(dir);
    int stdout_diffs = 0;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        std::string text;
        if (run_cli(commands[i], &text) != 0) {
            return {false, "rerun failed"};
        }
        stdout_diffs += text != first_out[i] ? 1 : 0;
    }
    const auto second = hash_tree(dir);
    int file_diffs = 0;
    for (const auto& [name, hash] : first) {
        const auto it = second.find(name);
        if (it == second.end() || it->second != hash) {
            std::cerr << "  differs: " << name << '\n';
            ++file_diffs;
        }
    }
    file_diffs += static_cast<int>(second.size() > first.size() ? second.size() - first.size() : 0);
    const bool pass = file_diffs == 0 && stdout_diffs == 0 && first.size() > 10;
    return {pass, std::to_string(commands.size()) + " commands rerun in reference mode: " +
                      std::to_string(first.size()) + " output files, " + std::to_string(file_diffs) +
                      " differ; " + std::to_string(stdout_diffs) + " stdout transcripts differ"};
}

const std::vector<std::function<Outcome()>> kCriteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                      criterion_5, criterion_6, criterion_7, criterion_8,
                                                      criterion_9, criterion_10};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> which;
    app.add_option("--criterion", which, "Criterion number (1-10, repeatable); all when omitted")
        ->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);
    if (which.empty()) {
        which.resize(kCriteria.size());
        std::iota(which.begin(), which.end(), 1);
    }
    bool all = true;
    for (const int k : which) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = kCriteria[static_cast<std::size_t>(k - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << " [" << fmt(secs, 3)
                  << " s]" << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
