#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smoothbandit/harness.hpp"

using namespace smoothbandit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("smoothbandit_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SMOOTHBANDIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json small_config(const fs::path& out) {
  return json{{"name", "small"},
              {"instance", {{"family", "sinusoidal"}, {"dim", 1}, {"frequency", 1}, {"amplitude", 1}}},
              {"policies", json::array({json{{"name", "smooth_bandit"}, {"c_epoch", 8}}, "binned_ucb", "oracle"})},
              {"horizons", {1000, 2000}},
              {"reps", 3},
              {"base_seed", 7},
              {"checkpoints", 5},
              {"out_dir", out.string()},
              {"threads", 1}};
}

}  // namespace

TEST(Exponent, Examples) {
  EXPECT_NEAR(theoretical_exponent(1, 0, 1), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(theoretical_exponent(2, 1, 1), 0.2, 1e-15);
  EXPECT_NEAR(theoretical_exponent(1e6, 1, 1), 0.0, 1e-6);
  EXPECT_EQ(theoretical_exponent(2, 3, 1), 0.0);
  EXPECT_THROW(theoretical_exponent(0.5, 1, 1), ParameterError);
}

TEST(FitRate, ExactPowerLaw) {
  std::vector<double> T, R;
  for (int k = 12; k <= 16; ++k) {
    T.push_back(std::pow(2.0, k));
    R.push_back(3.0 * std::sqrt(T.back()));
  }
  const RateFit f = fit_rate(T, R);
  EXPECT_NEAR(f.slope, 0.5, 1e-10);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-9);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  const RateFit flat = fit_rate(T, std::vector<double>(5, 4.0));
  EXPECT_NEAR(flat.slope, 0.0, 1e-12);
}

TEST(FitRate, UniformPolicyIsLinear) {
  const auto env = make_constant_gap(1, 0.5);
  std::vector<double> T, R;
  for (int k = 12; k <= 16; ++k) {
    const auto h = static_cast<std::size_t>(1) << k;
    double s = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      UniformPolicy u(2);
      s += simulate(*env, u, h, seed).final_regret;
    }
    T.push_back(static_cast<double>(h));
    R.push_back(s / 10.0);
  }
  EXPECT_NEAR(fit_rate(T, R, std::vector<std::size_t>(5, 10)).slope, 1.0, 0.02);
}

TEST(FitRate, ExclusionsAndErrors) {
  const std::vector<double> T{1e3, 1e4, 1e5, 1e6, 1e7};
  const RateFit f = fit_rate(T, {0.0, 10, 20, 40, 80});
  EXPECT_EQ(f.excluded, std::vector<double>{1e3});
  EXPECT_EQ(f.horizons.size(), 4u);
  EXPECT_THROW(fit_rate(T, {0.0, 0.0, 20, 40, 80}), ParameterError);
  EXPECT_THROW(fit_rate({1e3, 1e4}, {1.0}), ParameterError);
  EXPECT_THROW(fit_rate(T, {1, 2, 3, 4, 5}, {10, 10, 9, 10, 10}), ParameterError);
}

TEST(Config, ParsesPoliciesAndDefaults) {
  const ExperimentConfig c = parse_experiment_config(small_config("out"));
  ASSERT_EQ(c.policies.size(), 3u);
  EXPECT_EQ(c.policies[0].label, "smooth_bandit");
  EXPECT_EQ(c.policies[0].params.at("c_epoch"), 8);
  EXPECT_EQ(c.horizons, (std::vector<std::size_t>{1000, 2000}));
  EXPECT_EQ(c.reps, 3u);
}

TEST(Config, RejectsInvalidFields) {
  auto bad = [](auto mutate) {
    json j = small_config("out");
    mutate(j);
    return j;
  };
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j["colour"] = 1; })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j.erase("instance"); })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j["reps"] = 0; })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j["horizons"] = json::array(); })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j["policies"].push_back("thompson"); })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j["policies"].push_back("oracle"); })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j["base_seed"] = -1; })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](json& j) { j["theory"] = {{"gamma", 1}}; })), ConfigError);
  try {
    parse_experiment_config(bad([](json& j) { j["policies"][0]["c_epoch"] = "big"; }));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("policies[0].c_epoch"), std::string::npos);
  }
}

TEST(Config, InstanceAndPolicyErrorsAreConfigErrors) {
  EXPECT_THROW(make_instance({{"family", "sinusoidal"}, {"amplitude", 3}}), ConfigError);
  EXPECT_THROW(make_instance({{"family", "lower-bound"}, {"gamma", 1}}), ConfigError);
  EXPECT_THROW(make_instance({{"family", "nope"}}), ConfigError);
  const auto env = make_instance({{"family", "constant-gap"}, {"gap", 0.3}});
  EXPECT_THROW(make_policy({"smooth_bandit", "sb", {{"c_epch", 1}}}, *env, 100), ConfigError);
  EXPECT_THROW(make_policy({"smooth_bandit", "sb", {{"p", 2}}}, *env, 100), ConfigError);
  EXPECT_THROW(make_policy({"binned_ucb", "b", {{"bin_side", 2}}}, *env, 100), ConfigError);
}

TEST(Seeds, DerivedFromLabelHorizonRep) {
  const std::uint64_t s = run_seed(7, "oracle", 1000, 2);
  EXPECT_EQ(s, 7 ^ hash_combine(hash_combine(stable_hash("oracle"), 1000), 2));
  EXPECT_NE(s, run_seed(7, "oracle", 1000, 3));
  EXPECT_NE(s, run_seed(7, "oracle", 2000, 2));
  EXPECT_NE(s, run_seed(7, "uniform", 1000, 2));
  const auto keys = enumerate_runs(parse_experiment_config(small_config("out")));
  ASSERT_EQ(keys.size(), 18u);
  EXPECT_EQ(keys[0].policy, 0u);
  EXPECT_EQ(keys[3].horizon, 2000u);
  EXPECT_EQ(keys[6].policy, 1u);
}

TEST(Experiment, DeterministicAcrossRunsAndThreadCounts) {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  json ja = small_config(a), jb = small_config(b);
  jb["threads"] = 3;
  const ExperimentConfig ca = parse_experiment_config(ja), cb = parse_experiment_config(jb);
  const auto fa = write_experiment(run_experiment(ca), 1);
  const auto fb = write_experiment(run_experiment(cb), 1);
  EXPECT_EQ(slurp(fa.csv), slurp(fb.csv));
  const std::string summary_a = slurp(fa.summary);
  ja["out_dir"] = b.string();
  write_experiment(run_experiment(parse_experiment_config(ja)), 1);
  EXPECT_EQ(summary_a, slurp(fb.summary));
  EXPECT_FALSE(fa.states.empty());
}

TEST(Experiment, CsvRowsAndRegretProperties) {
  const fs::path dir = scratch_dir("csv");
  const ExperimentResult res = run_experiment(parse_experiment_config(small_config(dir)));
  std::ostringstream os;
  write_csv(os, res);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kCsvHeader);
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, res.runs.size() * 5);
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const RunResult& r = res.runs[i];
    for (std::size_t c = 1; c < r.cum_regret.size(); ++c) {
      EXPECT_GE(r.cum_regret[c], r.cum_regret[c - 1]);
      EXPECT_GE(r.inferior_count[c], r.inferior_count[c - 1]);
    }
    EXPECT_LE(r.final_regret, 1.0 * static_cast<double>(r.final_inferior) + 1e-9);
    EXPECT_LE(r.final_inferior, r.horizon);
    if (res.config.policies[res.keys[i].policy].name == "oracle") EXPECT_EQ(r.final_regret, 0.0);
  }
}

TEST(Summary, RateCheckAndStateRoundTrip) {
  const fs::path dir = scratch_dir("summary");
  json j = small_config(dir);
  j["horizons"] = {500, 1000, 2000, 4000};
  j["reps"] = 10;
  j["policies"] = {"uniform"};
  j["instance"] = {{"family", "constant-gap"}, {"gap", 0.5}};
  j["theory"] = {{"beta", 2}, {"alpha", 1}, {"dim", 1}, {"band", {0.9, 1.1}}};
  const ExperimentResult res = run_experiment(parse_experiment_config(j));
  const json s = summary_json(res, 1);
  const RateCheck rc = rate_check(s);
  EXPECT_EQ(rc.policy, "uniform");
  EXPECT_TRUE(rc.pass) << rc.fit.slope;
  EXPECT_FALSE(rate_check(s, "", 0.0, 0.5).pass);
  EXPECT_THROW(rate_check(s, "missing"), ParameterError);
  EXPECT_THROW(rate_check(json::object()), ParameterError);

  PolicyConfig cfg;
  cfg.horizon = 5000;
  cfg.c_epoch = 8;
  SinusoidalInstance env(1, 1.0, 1.0);
  RunResult r = run_two_arm(env, cfg, 2);
  r.instance = env.name();
  const json state = state_report(r);
  const StateSummary sum = summarize_state(json::parse(state.dump()));
  EXPECT_EQ(sum.horizon, 5000u);
  EXPECT_EQ(sum.epochs.size(), r.diagnostics.epochs.size());
  EXPECT_EQ(sum.support_cubes, r.diagnostics.final_active.size());
  std::size_t exploit = 0;
  for (auto n : sum.exploit_cubes) exploit += n;
  EXPECT_EQ(sum.explore_cubes + exploit, sum.support_cubes);
  for (std::size_t k = 0; k < sum.epochs.size(); ++k) {
    EXPECT_EQ(sum.epochs[k].length, r.diagnostics.epochs[k].length);
    EXPECT_EQ(sum.epochs[k].screened, r.diagnostics.epochs[k].screened);
  }
  EXPECT_THROW(summarize_state(json{{"policy", 3}}), ParameterError);
}

TEST(Verify, LowerBoundInstancePasses) {
  const auto env = make_instance({{"family", "lower-bound"}, {"dim", 2}, {"horizon", 1e6}, {"alpha", 0.5}});
  const auto lines = verify_instance(*env, {{"samples", 200000}, {"holder_pairs", 5000}}, 3);
  for (const auto& l : lines) EXPECT_TRUE(l.pass) << l.check << " " << l.detail;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  const fs::path cfg = dir / "cfg.json";
  {
    json j = small_config(dir / "out");
    j["horizons"] = {1000};
    j["reps"] = 1;
    std::ofstream(cfg) << j.dump();
  }
  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << R"({"instance": {"family": "sinusoidal"}, "reps": 0})";
  EXPECT_EQ(run_cli("bogus"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("run " + bad.string()), 2);
  EXPECT_EQ(run_cli("run " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("--quiet run " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "small_regret.csv"));
  EXPECT_EQ(run_cli("--quiet verify " + cfg.string()), 0);
  EXPECT_EQ(run_cli("inspect " + (dir / "out" / "small_state_smooth_bandit_T1000_rep0.json").string()), 0);
  EXPECT_EQ(run_cli("rate " + (dir / "out" / "small_summary.json").string()), 2);
}
