#include "quantbsde/cli.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace quantbsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int status;
    std::string out, err;
    std::map<std::string, std::string> kv;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "quantbsde");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Outcome o{cli::run(static_cast<int>(argv.size()), argv.data(), out, err), out.str(), err.str(), {}};
    std::istringstream lines(o.out);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) o.kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return o;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "quantbsde_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const auto p = scratch(name);
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST(ParseConfig, DefaultsAndOverrides) {
    const auto c = cli::parse_config(nlohmann::json::parse(R"({
        "model": {"name": "bergman", "params": {"borrow_rate": 0.07}},
        "quantizers": 12, "optimizer": {"newton": false}, "mc": {"paths": 100, "seed": 7}
    })"));
    EXPECT_EQ(c.model.name, "bergman");
    EXPECT_DOUBLE_EQ(std::get<BergmanParams>(c.model.params).borrow_rate, 0.07);
    EXPECT_DOUBLE_EQ(std::get<BergmanParams>(c.model.params).lend_rate, 0.01);
    EXPECT_DOUBLE_EQ(c.model.horizon, 0.25);
    EXPECT_EQ(c.steps, 50u);
    EXPECT_EQ(c.quantizers, 12u);
    EXPECT_FALSE(c.optimizer.newton_enabled);
    EXPECT_EQ(c.mc_paths, 100u);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.sweep_quantizers.size(), 6u);

    const auto bs = cli::parse_config(nlohmann::json::parse(R"({"model": "black-scholes"})"));
    EXPECT_EQ(bs.steps, 20u);
    EXPECT_EQ(bs.quantizers, 50u);
    EXPECT_DOUBLE_EQ(bs.model.horizon, 1.0);
}

TEST(ParseConfig, FieldLevelErrors) {
    auto message = [](const char* text) {
        try {
            cli::validate(cli::parse_config(nlohmann::json::parse(text)));
        } catch (const cli::ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message(R"({"stepz": 3})").find("stepz: unknown field"), std::string::npos);
    EXPECT_NE(message(R"({"optimizer": {"tol": 1}})").find("optimizer.tol"), std::string::npos);
    EXPECT_NE(message(R"({"model": {"name": "bergman", "params": {"rate": 1}}})").find("model.params.rate"),
              std::string::npos);
    EXPECT_NE(message(R"({"steps": "ten"})").find("steps"), std::string::npos);
    EXPECT_NE(message(R"({"steps": 0})").find("steps: must be >= 1"), std::string::npos);
    EXPECT_NE(message(R"({"model": "heston"})").find("heston"), std::string::npos);
    EXPECT_EQ(message(R"({"model": "bergman"})"), "no error");
}

TEST(Cli, SolveBlackScholes) {
    const auto o = run_cli({"solve", "--model", "black-scholes"});
    ASSERT_EQ(o.status, cli::kOk) << o.err;
    EXPECT_EQ(o.kv.at("model"), "black-scholes");
    EXPECT_EQ(o.kv.at("steps"), "20");
    EXPECT_EQ(o.kv.at("quantizers"), "50");
    const double u0 = std::stod(o.kv.at("u0"));
    EXPECT_GT(u0, 11.5);
    EXPECT_LT(u0, 12.0);
    EXPECT_EQ(o.kv.at("u0").size(), std::string("11.6693").size());
    EXPECT_TRUE(o.kv.count("v0"));
}

TEST(Cli, SolveWritesArtifactAndUsesCache) {
    const auto art = scratch("solve.rmq.json");
    const auto cache = scratch("cache.rmq.json");
    fs::remove(cache);
    const auto a = run_cli({"solve", "--model", "bergman", "--steps", "10", "--quantizers", "8", "--output",
                            art.string(), "--tree-cache", cache.string()});
    ASSERT_EQ(a.status, cli::kOk) << a.err;
    EXPECT_EQ(a.kv.at("tree_cache"), "miss");
    EXPECT_TRUE(fs::exists(art));
    EXPECT_NE(slurp(art).find("\"solution\""), std::string::npos);
    const auto b = run_cli({"solve", "--model", "bergman", "--steps", "10", "--quantizers", "8", "--tree-cache",
                            cache.string()});
    EXPECT_EQ(b.kv.at("tree_cache"), "hit");
    EXPECT_EQ(a.kv.at("u0"), b.kv.at("u0"));
    // Different grid sizes invalidate the cache.
    const auto c = run_cli({"solve", "--model", "bergman", "--steps", "10", "--quantizers", "9", "--tree-cache",
                            cache.string()});
    EXPECT_EQ(c.kv.at("tree_cache"), "miss");
}

TEST(Cli, SolveWithMonteCarloControl) {
    const auto cfg = write_config("mc.json", R"({"model": "bergman", "steps": 10, "quantizers": 10,
                                                   "mc": {"paths": 20000}})");
    const auto o = run_cli({"solve", "--config", cfg.string(), "--seed", "3"});
    ASSERT_EQ(o.status, cli::kOk) << o.err;
    EXPECT_TRUE(o.kv.count("ps_v0"));
    EXPECT_GT(std::stod(o.kv.at("ps_v0_stderr")), 0.0);
}

TEST(Cli, SweepMatchesSolve) {
    const auto csv = scratch("single.csv");
    const auto cfg = write_config("sweep1.json", R"({"model": "bergman", "sweep": {"quantizers": [10], "steps": [15]}})");
    const auto s = run_cli({"sweep", "--config", cfg.string(), "--output", csv.string()});
    ASSERT_EQ(s.status, cli::kOk) << s.err;
    const auto d = run_cli({"solve", "--model", "bergman", "--steps", "15", "--quantizers", "10"});
    EXPECT_EQ(slurp(csv), "quantizers,15\n10," + d.kv.at("u0") + "\n");
    EXPECT_TRUE(fs::exists(csv.string() + ".json"));
}

TEST(Cli, SweepPartialFailureFlagsErr) {
    const auto csv = scratch("err.csv");
    const auto cfg = write_config("sweep_err.json", R"({"model": "bergman",
        "optimizer": {"max_iterations": 1, "newton": false},
        "sweep": {"quantizers": [1, 30], "steps": [5]}})");
    const auto o = run_cli({"sweep", "--config", cfg.string(), "--output", csv.string()});
    EXPECT_EQ(o.status, cli::kPartialFailure);
    EXPECT_NE(slurp(csv).find("30,ERR"), std::string::npos);
    EXPECT_NE(o.err.find("N=30"), std::string::npos);
}

TEST(Cli, SweepNeedsOutput) {
    EXPECT_EQ(run_cli({"sweep", "--model", "bergman"}).status, cli::kConfigError);
}

TEST(Cli, HedgeOutputs) {
    const auto csv = scratch("hedge.csv");
    const auto o = run_cli({"hedge", "--model", "black-scholes", "--output", csv.string()});
    ASSERT_EQ(o.status, cli::kOk) << o.err;
    EXPECT_EQ(o.kv.at("rows"), "200");
    EXPECT_TRUE(o.kv.count("max_rel_central_k10"));
    const auto text = slurp(csv);
    EXPECT_EQ(text.substr(0, text.find('\n')), "step,codeword,v_hat,v_exact,abs_err");

    const auto empty_cfg = write_config("hedge_empty.json", R"({"hedge": {"steps": []}})");
    const auto e = run_cli({"hedge", "--config", empty_cfg.string(), "--output", csv.string()});
    ASSERT_EQ(e.status, cli::kOk) << e.err;
    EXPECT_EQ(slurp(csv), "step,codeword,v_hat,v_exact,abs_err\n");
}

TEST(Cli, HedgeRejections) {
    const auto csv = scratch("hedge_bad.csv");
    EXPECT_EQ(run_cli({"hedge", "--model", "bergman", "--output", csv.string()}).status, cli::kConfigError);
    const auto cfg = write_config("hedge_bad.json", R"({"hedge": {"steps": [20]}})");
    const auto o = run_cli({"hedge", "--config", cfg.string(), "--output", csv.string()});
    EXPECT_EQ(o.status, cli::kConfigError);
    EXPECT_NE(o.err.find("hedge.steps"), std::string::npos);
}

TEST(Cli, BadInvocations) {
    EXPECT_EQ(run_cli({}).status, cli::kConfigError);
    EXPECT_EQ(run_cli({"solve", "--model", "heston"}).status, cli::kConfigError);
    EXPECT_EQ(run_cli({"solve", "--config", "/nonexistent/q.json"}).status, cli::kConfigError);
    const auto cfg = write_config("typo.json", R"({"quantiziers": 5})");
    const auto o = run_cli({"solve", "--config", cfg.string()});
    EXPECT_EQ(o.status, cli::kConfigError);
    EXPECT_NE(o.err.find("quantiziers"), std::string::npos);
}

TEST(Cli, BinaryExitStatus) {
    const std::string bin = QUANTBSDE_CLI_PATH;
    const std::string ok = bin + " solve --model bergman --steps 5 --quantizers 5 > /dev/null 2>&1";
    EXPECT_EQ(std::system(ok.c_str()), 0);
    const std::string bad = bin + " solve --steps 0 > /dev/null 2>&1";
    const int status = std::system(bad.c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), cli::kConfigError);
}
