#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "commands.hpp"
#include "ivhedge/csv.hpp"
#include "ivhedge/hedging.hpp"
#include "ivhedge/manifest.hpp"
#include "ivhedge/pathset.hpp"
#include "ivhedge/training.hpp"
#include "test_util.hpp"

namespace ivhedge {
namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ivhedge");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = testing::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        params_ = testing::data_file("jivr_params.json").string();
        pool_ = testing::data_file("synthetic_pool.csv").string();
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    CliRun simulate(const std::string& stem, int paths, int horizon, int seed) const {
        return run_cli({"--params", params_, "simulate", "--pool", pool_, "--paths", std::to_string(paths),
                        "--horizon", std::to_string(horizon), "--seed", std::to_string(seed), "--out", path(stem)});
    }
    std::filesystem::path dir_;
    std::string params_;
    std::string pool_;
};

TEST_F(CliTest, SimulateIsReproducible) {
    ASSERT_EQ(simulate("a", 50, 10, 4).code, 0);
    ASSERT_EQ(simulate("b", 50, 10, 4).code, 0);
    EXPECT_EQ(sha256_file(path("a.bin")), sha256_file(path("b.bin")));
    const PathSet p = load_pathset(path("a"));
    EXPECT_EQ(p.n_paths, 50);
    EXPECT_EQ(p.horizon, 10);
    ASSERT_EQ(simulate("c", 50, 10, 5).code, 0);
    EXPECT_NE(sha256_file(path("a.bin")), sha256_file(path("c.bin")));
}

TEST_F(CliTest, ThreadCountDoesNotChangeOutput) {
    ASSERT_EQ(simulate("a", 40, 8, 2).code, 0);
    const CliRun r = run_cli({"--params", params_, "--threads", "3", "simulate", "--pool", pool_, "--paths", "40",
                              "--horizon", "8", "--seed", "2", "--out", path("b")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(sha256_file(path("a.bin")), sha256_file(path("b.bin")));
}

TEST_F(CliTest, ZeroHorizonWritesInitialStates) {
    ASSERT_EQ(simulate("z", 7, 0, 1).code, 0);
    const PathSet p = load_pathset(path("z"));
    EXPECT_EQ(p.horizon, 0);
    EXPECT_EQ(p.S.cols(), 1);
}

TEST_F(CliTest, MissingPoolIsAConfigError) {
    const CliRun r = run_cli({"--params", params_, "simulate", "--pool", path("nope.csv"), "--out", path("x")});
    EXPECT_EQ(r.code, cli::kConfigError);
    EXPECT_NE(r.err.find("nope.csv"), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownOptionIsAConfigError) {
    EXPECT_EQ(run_cli({"simulate", "--bogus", "--out", path("x")}).code, cli::kConfigError);
    EXPECT_EQ(run_cli({}).code, cli::kConfigError);
}

TEST_F(CliTest, EvaluateMatchesLibrary) {
    ASSERT_EQ(simulate("p", 200, 21, 9).code, 0);
    const CliRun r = run_cli({"evaluate", "--paths", path("p"), "--steps", "21", "--tc", "0.005", "--strategy", "bs", "--strategy", "leland", "--out", path("m.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const PathSet p = load_pathset(path("p"));
    HedgeConfig cfg;
    cfg.steps = 21;
    cfg.kappa = 0.005;
    cfg.state_space = StateSpace::ReducedTc;
    const MetricsReport lib = evaluate(BenchmarkStrategy(BenchmarkKind::BlackScholes), p, cfg);
    const CsvTable t = read_csv(path("m.csv"));
    ASSERT_GE(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "bs");
    EXPECT_EQ(t.rows[0][1], "all");
    EXPECT_EQ(t.rows[0][8], format_double(lib.overall.mse));
    EXPECT_EQ(t.rows[0][3], format_double(lib.overall.avg_pnl));
}

TEST_F(CliTest, TrainThenEvaluateCheckpoint) {
    ASSERT_EQ(simulate("p", 200, 5, 3).code, 0);
    const CliRun tr = run_cli({"train", "--paths", path("p"), "--steps", "5", "--penalty", "cvar95", "--tc", "0",
                               "--epochs", "2", "--batch", "50", "--lstm-widths", "4", "--ffnn-widths", "4",
                               "--out", path("model.json")});
    ASSERT_EQ(tr.code, 0) << tr.err;
    EXPECT_TRUE(std::filesystem::exists(path("model.json.loss.csv")));
    const CliRun ev = run_cli({"evaluate", "--paths", path("p"), "--steps", "5", "--penalty", "cvar95", "--strategy",
                               "checkpoint:" + path("model.json"), "--out", path("m.csv")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const CsvTable t = read_csv(path("m.csv"));
    ASSERT_FALSE(t.rows.empty());
    EXPECT_EQ(t.header.size(), 12u);
    for (const auto& field : t.rows[0]) {
        EXPECT_FALSE(field.empty());
        EXPECT_EQ(field.find("nan"), std::string::npos);
    }
}

TEST_F(CliTest, TransactionCostsNeedTheCostState) {
    ASSERT_EQ(simulate("p", 20, 5, 3).code, 0);
    const CliRun r = run_cli({"train", "--paths", path("p"), "--steps", "5", "--tc", "0.01", "--state-space",
                              "reduced_no_tc", "--epochs", "1", "--out", path("model.json")});
    EXPECT_EQ(r.code, cli::kConfigError);
    EXPECT_NE(r.err.find("reduced_no_tc"), std::string::npos) << r.err;
}

TEST_F(CliTest, ShortPathsAreRejected) {
    ASSERT_EQ(simulate("p", 20, 5, 3).code, 0);
    const CliRun r = run_cli({"evaluate", "--paths", path("p"), "--steps", "63", "--strategy", "bs", "--out",
                              path("m.csv")});
    EXPECT_EQ(r.code, cli::kConfigError);
}

TEST_F(CliTest, TinySageIsEfficient) {
    const CliRun r = run_cli({"--params", params_, "sage", "--tiny", "--mode", "exact", "--pool", pool_, "--out",
                              path("sage")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(read_text_file(path("sage.json")));
    double sum = 0.0;
    for (const auto& c : j.at("contributions")) {
        sum += c.get<double>();
    }
    EXPECT_NEAR(sum, j.at("risk_baseline").get<double>() - j.at("risk_full").get<double>(), 1e-9);
    EXPECT_EQ(j.at("subsets").size(), 64u);
}

TEST_F(CliTest, ConfigFileSuppliesOptions) {
    write_text_file(path("cfg.json"), R"({"simulate": {"paths": 12, "horizon": 3, "seed": 8}})");
    const CliRun r = run_cli({"--config", path("cfg.json"), "--params", params_, "simulate", "--pool", pool_, "--out",
                              path("c")});
    ASSERT_EQ(r.code, 0) << r.err;
    const PathSet p = load_pathset(path("c"));
    EXPECT_EQ(p.n_paths, 12);
    EXPECT_EQ(p.horizon, 3);
    write_text_file(path("bad.json"), R"({"simulate": {"pathz": 12}})");
    EXPECT_EQ(run_cli({"--config", path("bad.json"), "simulate", "--out", path("d")}).code, cli::kConfigError);
}

TEST_F(CliTest, BacktestWritesOneRowPerOption) {
    const CliRun r = run_cli({"backtest", "--history", testing::data_file("synthetic_history.csv").string(),
                              "--strategy", "bs", "--strategy", "si", "--out", path("bt.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_csv(path("bt.csv")).rows.size(), 50u);
}

TEST_F(CliTest, ParamsShowPrintsHash) {
    const CliRun r = run_cli({"--params", params_, "params", "show"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("sha256 " + sha256_file(params_)), std::string::npos);
}

}  // namespace
}  // namespace ivhedge
