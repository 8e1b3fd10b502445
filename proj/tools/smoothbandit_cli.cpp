// Command-line front end: run experiments, validate instances, fit regret
// rates and summarize saved policy states.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "smoothbandit/smoothbandit.hpp"

namespace sb = smoothbandit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<std::size_t> threads;
  bool quiet = false;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sb::ConfigError("input", "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw sb::ConfigError("input", std::string("invalid JSON: ") + e.what());
  }
}

int cmd_run(const std::string& path, const Common& common) {
  sb::ExperimentConfig cfg = sb::load_experiment_config(path);
  if (common.seed) cfg.base_seed = *common.seed;
  if (!common.out_dir.empty()) cfg.out_dir = common.out_dir;
  if (common.threads) cfg.threads = *common.threads;
  if (cfg.policies.empty()) throw sb::ConfigError("policies", "at least one policy is required");
  if (cfg.horizons.empty()) throw sb::ConfigError("horizons", "at least one horizon is required");

  const bool show_progress = !common.quiet && isatty(STDERR_FILENO);
  auto progress = [&](std::size_t done, std::size_t total) {
    if (!show_progress) return;
    if (done == total || done % std::max<std::size_t>(1, total / 20) == 0) {
      std::fprintf(stderr, "\r%zu/%zu runs", done, total);
      if (done == total) std::fprintf(stderr, "\n");
    }
  };
  const sb::ExperimentResult res = sb::run_experiment(cfg, progress);
  const std::size_t dim = sb::make_instance(cfg.instance)->dim();
  const sb::ExperimentFiles files = sb::write_experiment(res, dim);
  if (!common.quiet) {
    const nlohmann::json summary = sb::summary_json(res, dim);
    for (const auto& g : summary["groups"]) {
      std::printf("%-20s T=%-8zu mean regret %12.3f (se %.3f)  inferior %12.1f\n",
                  g["policy"].get<std::string>().c_str(), g["T"].get<std::size_t>(),
                  g["mean_final_regret"].get<double>(), g["se_final_regret"].get<double>(),
                  g["mean_inferior"].get<double>());
    }
    std::printf("wrote %s\nwrote %s\n", files.csv.string().c_str(), files.summary.string().c_str());
    if (!files.states.empty()) std::printf("wrote %zu state reports\n", files.states.size());
    std::fprintf(stderr, "%.2f s\n", res.wall_seconds);
  }
  return kExitOk;
}

int cmd_verify(const std::string& path, const Common& common) {
  const sb::ExperimentConfig cfg = sb::load_experiment_config(path);
  const auto env = sb::make_instance(cfg.instance);
  std::uint64_t seed = common.seed.value_or(cfg.base_seed);
  if (!common.seed && cfg.verify.contains("seed")) seed = cfg.verify["seed"].get<std::uint64_t>();
  const auto lines = sb::verify_instance(*env, cfg.verify, seed);
  bool ok = true;
  for (const auto& l : lines) {
    ok = ok && l.pass;
    if (!common.quiet || !l.pass) std::printf("%s %-12s %s\n", l.pass ? "PASS" : "FAIL", l.check.c_str(), l.detail.c_str());
  }
  std::printf("%s verify %s\n", ok ? "PASS" : "FAIL", env->name().c_str());
  return ok ? kExitOk : kExitFail;
}

int cmd_rate(const std::string& path, const std::string& policy, std::optional<double> lo, std::optional<double> hi,
             const Common& common) {
  const nlohmann::json summary = read_json(path);
  const sb::RateCheck rc = sb::rate_check(summary, policy, lo, hi);
  if (!common.quiet) {
    for (std::size_t i = 0; i < rc.fit.horizons.size(); ++i) {
      std::printf("T=%-10.0f mean regret %.4f\n", rc.fit.horizons[i], rc.fit.mean_regret[i]);
    }
    for (double T : rc.fit.excluded) std::printf("T=%-10.0f excluded (nonpositive mean regret)\n", T);
    std::printf("slope %.4f intercept %.4f R^2 %.4f; exponent %.4f (beta=%g alpha=%g d=%g)\n", rc.fit.slope,
                rc.fit.intercept, rc.fit.r_squared, rc.theory.exponent, rc.theory.beta, rc.theory.alpha,
                rc.theory.dim);
  }
  std::printf("%s rate %s slope=%.4f band=[%.4f, %.4f]\n", rc.pass ? "PASS" : "FAIL", rc.policy.c_str(), rc.fit.slope,
              rc.theory.lo, rc.theory.hi);
  return rc.pass ? kExitOk : kExitFail;
}

int cmd_inspect(const std::string& path, const Common& common) {
  const sb::StateSummary s = sb::summarize_state(read_json(path));
  std::printf("%s on %s, T=%zu, %zu epochs\n", s.policy.c_str(), s.instance.c_str(), s.horizon, s.epochs.size());
  if (!common.quiet) {
    std::printf("%5s %9s %9s %8s %14s %14s %10s %9s %8s %s\n", "epoch", "start", "length", "eps", "N_prev",
                "H_prev", "screened", "min_eig", "explore", "exploit");
    for (const auto& e : s.epochs) {
      auto join_sizes = [](const std::vector<std::size_t>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "/" : "") + std::to_string(v[i]);
        return out.empty() ? std::string("-") : out;
      };
      std::string h;
      for (std::size_t i = 0; i < e.bandwidth_prev.size(); ++i) {
        char buf[32];
        if (std::isfinite(e.bandwidth_prev[i])) {
          std::snprintf(buf, sizeof buf, "%s%.3g", i ? "/" : "", e.bandwidth_prev[i]);
        } else {
          std::snprintf(buf, sizeof buf, "%s-", i ? "/" : "");
        }
        h += buf;
      }
      if (h.empty()) h = "-";
      std::printf("%5zu %9zu %9zu %8.4g %14s %14s %10s %9.3g %8zu %s\n", e.epoch, e.start, e.length, e.tolerance,
                  join_sizes(e.samples_prev).c_str(), h.c_str(), join_sizes(e.screened).c_str(), e.min_eigenvalue,
                  e.explore_cubes, join_sizes(e.exploit_cubes).c_str());
    }
  }
  std::printf("final: %zu support cubes, %zu randomizing", s.support_cubes, s.explore_cubes);
  for (std::size_t a = 0; a < s.exploit_cubes.size(); ++a) std::printf(", %zu exploit arm %zu", s.exploit_cubes[a], a);
  std::printf("\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth nonparametric contextual bandit simulator"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Base seed override");
  app.add_option("--out-dir", common.out_dir, "Output directory override");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  app.add_flag("--quiet", common.quiet, "Only print result lines");

  std::string config_path, results_path, state_path, rate_policy;
  double lo = 0.0, hi = 0.0;
  auto* run = app.add_subcommand("run", "Run the experiments described by a config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* verify = app.add_subcommand("verify", "Check an instance against its declared assumptions");
  verify->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* rate = app.add_subcommand("rate", "Fit log regret on log T and compare with the minimax exponent");
  rate->add_option("results", results_path, "Summary JSON written by run")->required();
  rate->add_option("--policy", rate_policy, "Policy label to fit");
  auto* lo_opt = rate->add_option("--lo", lo, "Lower end of the accepted slope band");
  auto* hi_opt = rate->add_option("--hi", hi, "Upper end of the accepted slope band");
  auto* inspect = app.add_subcommand("inspect", "Summarize decision regions per epoch");
  inspect->add_option("state", state_path, "State report written by run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }
  if (*seed_opt) common.seed = seed;
  if (*threads_opt) common.threads = threads;

  try {
    if (*run) return cmd_run(config_path, common);
    if (*verify) return cmd_verify(config_path, common);
    if (*rate) {
      std::optional<double> l, h;
      if (*lo_opt) l = lo;
      if (*hi_opt) h = hi;
      return cmd_rate(results_path, rate_policy, l, h, common);
    }
    if (*inspect) return cmd_inspect(state_path, common);
  } catch (const sb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const sb::ParameterError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const sb::RunFailure& e) {
    std::cerr << e.what() << '\n';
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  std::cerr << app.help();
  return kExitUsage;
}
