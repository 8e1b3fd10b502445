#pragma once

// Experiment orchestration: config parsing, seeded replicated runs on a worker
// pool, CSV/JSON output, and log-log rate fitting.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "smoothbandit/baselines.hpp"
#include "smoothbandit/environments.hpp"
#include "smoothbandit/errors.hpp"
#include "smoothbandit/random.hpp"
#include "smoothbandit/report.hpp"
#include "smoothbandit/run.hpp"
#include "smoothbandit/smooth_bandit.hpp"

namespace smoothbandit {

using nlohmann::json;

// Invalid experiment configuration; the message names the offending field.
class ConfigError : public ParameterError {
 public:
  ConfigError(const std::string& field, const std::string& what) : ParameterError(field + ": " + what) {}
};

// A run that threw; carries its coordinates.
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double theoretical_exponent(double beta, double alpha, double dim) {
  if (!(beta >= 1.0)) throw ParameterError("beta must be at least 1");
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be nonnegative");
  if (!(dim >= 1.0)) throw ParameterError("dimension must be at least 1");
  return std::max(beta + dim - alpha * beta, 0.0) / (2.0 * beta + dim);
}

struct RateFit {
  std::vector<double> horizons;
  std::vector<double> mean_regret;
  // Horizons dropped because their mean regret was not positive.
  std::vector<double> excluded;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline constexpr std::size_t kMinRateHorizons = 4;
inline constexpr std::size_t kMinRateReps = 10;

// OLS of log(mean regret) on log T. `reps`, when given, must have at least
// kMinRateReps per horizon.
inline RateFit fit_rate(const std::vector<double>& horizons, const std::vector<double>& mean_regret,
                        const std::vector<std::size_t>& reps = {}) {
  if (horizons.size() != mean_regret.size()) throw ParameterError("horizons and regrets differ in length");
  if (!reps.empty() && reps.size() != horizons.size()) throw ParameterError("reps and horizons differ in length");
  RateFit fit;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (!(horizons[i] > 0.0)) throw ParameterError("horizons must be positive");
    if (!reps.empty() && reps[i] < kMinRateReps) {
      throw ParameterError("horizon " + std::to_string(static_cast<long long>(horizons[i])) + " has only " +
                           std::to_string(reps[i]) + " reps; need at least " + std::to_string(kMinRateReps));
    }
    if (mean_regret[i] > 0.0) {
      fit.horizons.push_back(horizons[i]);
      fit.mean_regret.push_back(mean_regret[i]);
    } else {
      fit.excluded.push_back(horizons[i]);
    }
  }
  const std::size_t n = fit.horizons.size();
  if (n < kMinRateHorizons) {
    throw ParameterError("rate fit needs at least 4 horizons with positive regret, have " + std::to_string(n));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(fit.horizons[i]);
    my += std::log(fit.mean_regret[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(fit.horizons[i]) - mx;
    const double dy = std::log(fit.mean_regret[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw ParameterError("rate fit needs distinct horizons");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::log(fit.mean_regret[i]) - (fit.intercept + fit.slope * std::log(fit.horizons[i]));
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------
// Configuration.

struct PolicySpec {
  std::string name;   // smooth_bandit, smooth_bandit_multi, binned_ucb, uniform, oracle
  std::string label;  // output id; defaults to name
  json params = json::object();
};

struct ExperimentConfig {
  std::string name = "experiment";
  json instance;
  std::vector<PolicySpec> policies;
  std::vector<std::size_t> horizons;
  std::size_t reps = 1;
  std::uint64_t base_seed = 0;
  std::size_t checkpoints = 10;
  std::string out_dir = "results";
  std::size_t threads = 0;
  // Leading reps of lattice policies whose full state report is saved.
  std::size_t save_states = 1;
  // Optional overrides of the rate target.
  json theory = json::object();
  json verify = json::object();
};

namespace detail {

inline double number_field(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key, "must be a number");
  return v.get<double>();
}

inline std::size_t count_field(const json& v, const std::string& where, std::size_t min) {
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>()))) {
    throw ConfigError(where, "must be an integer");
  }
  const double d = v.get<double>();
  if (d < static_cast<double>(min)) throw ConfigError(where, "must be at least " + std::to_string(min));
  return static_cast<std::size_t>(d);
}

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(where + "." + it.key(), "unknown field");
  }
}

inline const std::set<std::string>& policy_names() {
  static const std::set<std::string> names{"smooth_bandit", "smooth_bandit_multi", "binned_ucb", "uniform", "oracle"};
  return names;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  detail::reject_unknown(j,
                         {"name", "instance", "policies", "horizons", "reps", "base_seed", "checkpoints", "out_dir",
                          "threads", "save_states", "theory", "verify"},
                         "config");
  ExperimentConfig c;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ConfigError("name", "must be a string");
    c.name = j["name"].get<std::string>();
  }
  if (!j.contains("instance") || !j["instance"].is_object()) throw ConfigError("instance", "required object");
  c.instance = j["instance"];
  if (!c.instance.contains("family") || !c.instance["family"].is_string()) {
    throw ConfigError("instance.family", "required string");
  }
  if (j.contains("policies")) {
    if (!j["policies"].is_array()) throw ConfigError("policies", "must be an array");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < j["policies"].size(); ++i) {
      const json& p = j["policies"][i];
      const std::string where = "policies[" + std::to_string(i) + "]";
      PolicySpec spec;
      if (p.is_string()) {
        spec.name = p.get<std::string>();
      } else if (p.is_object() && p.contains("name") && p["name"].is_string()) {
        spec.name = p["name"].get<std::string>();
        spec.params = p;
        spec.params.erase("name");
        if (p.contains("label")) {
          if (!p["label"].is_string()) throw ConfigError(where + ".label", "must be a string");
          spec.params.erase("label");
          spec.label = p["label"].get<std::string>();
        }
      } else {
        throw ConfigError(where, "must be a policy name or an object with a name");
      }
      if (!detail::policy_names().count(spec.name)) throw ConfigError(where + ".name", "unknown policy '" + spec.name + "'");
      if (spec.label.empty()) spec.label = spec.name;
      if (!labels.insert(spec.label).second) throw ConfigError(where + ".label", "duplicate policy label");
      for (auto it = spec.params.begin(); it != spec.params.end(); ++it) {
        if (!it.value().is_number()) throw ConfigError(where + "." + it.key(), "must be a number");
      }
      c.policies.push_back(std::move(spec));
    }
  }
  if (j.contains("horizons")) {
    if (!j["horizons"].is_array() || j["horizons"].empty()) throw ConfigError("horizons", "must be a nonempty array");
    for (std::size_t i = 0; i < j["horizons"].size(); ++i) {
      c.horizons.push_back(detail::count_field(j["horizons"][i], "horizons[" + std::to_string(i) + "]", 3));
    }
  }
  if (j.contains("reps")) c.reps = detail::count_field(j["reps"], "reps", 1);
  if (j.contains("base_seed")) {
    if (!j["base_seed"].is_number_unsigned() && !j["base_seed"].is_number_integer()) {
      throw ConfigError("base_seed", "must be a nonnegative integer");
    }
    if (j["base_seed"].is_number_integer() && j["base_seed"].get<long long>() < 0) {
      throw ConfigError("base_seed", "must be a nonnegative integer");
    }
    c.base_seed = j["base_seed"].get<std::uint64_t>();
  }
  if (j.contains("checkpoints")) c.checkpoints = detail::count_field(j["checkpoints"], "checkpoints", 1);
  if (j.contains("out_dir")) {
    if (!j["out_dir"].is_string()) throw ConfigError("out_dir", "must be a string");
    c.out_dir = j["out_dir"].get<std::string>();
  }
  if (j.contains("threads")) c.threads = detail::count_field(j["threads"], "threads", 0);
  if (j.contains("save_states")) c.save_states = detail::count_field(j["save_states"], "save_states", 0);
  if (j.contains("theory")) {
    if (!j["theory"].is_object()) throw ConfigError("theory", "must be an object");
    detail::reject_unknown(j["theory"], {"beta", "alpha", "dim", "band"}, "theory");
    c.theory = j["theory"];
  }
  if (j.contains("verify")) {
    if (!j["verify"].is_object()) throw ConfigError("verify", "must be an object");
    detail::reject_unknown(j["verify"], {"samples", "holder_pairs", "t_grid", "alpha", "gamma", "beta", "L", "seed"},
                           "verify");
    c.verify = j["verify"];
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_experiment_config(j);
}

// Builds the environment described by an `instance` block.
inline std::unique_ptr<Instance> make_instance(const json& spec) {
  const std::string family = spec.at("family").get<std::string>();
  const std::string where = "instance";
  std::size_t dim = 1;
  if (spec.contains("dim")) dim = detail::count_field(spec["dim"], where + ".dim", 1);
  try {
    if (family == "lower-bound") {
      detail::reject_unknown(spec,
                             {"family", "dim", "horizon", "beta", "alpha", "delta0", "L", "c_phi", "sigma",
                              "sigma_seed"},
                             where);
      LowerBoundParams p;
      p.dim = spec.contains("dim") ? dim : p.dim;
      if (spec.contains("horizon")) p.horizon = detail::number_field(spec, "horizon", where);
      if (spec.contains("beta")) p.beta = detail::number_field(spec, "beta", where);
      if (spec.contains("alpha")) p.alpha = detail::number_field(spec, "alpha", where);
      if (spec.contains("delta0")) p.delta0 = detail::number_field(spec, "delta0", where);
      if (spec.contains("L")) p.L = detail::number_field(spec, "L", where);
      if (spec.contains("c_phi")) p.c_phi = detail::number_field(spec, "c_phi", where);
      if (spec.contains("sigma")) {
        if (!spec["sigma"].is_array()) throw ConfigError(where + ".sigma", "must be an array of +1/-1");
        for (const auto& s : spec["sigma"]) {
          if (!s.is_number_integer()) throw ConfigError(where + ".sigma", "must be an array of +1/-1");
          p.sigma.push_back(s.get<int>());
        }
      }
      if (spec.contains("sigma_seed")) p.sigma_seed = detail::count_field(spec["sigma_seed"], where + ".sigma_seed", 0);
      return make_lower_bound_instance(p);
    }
    FamilySpec f;
    f.family = family;
    f.dim = dim;
    for (auto it = spec.begin(); it != spec.end(); ++it) {
      if (it.key() == "family" || it.key() == "dim") continue;
      if (it.key() == "means") {
        if (!it.value().is_array()) throw ConfigError(where + ".means", "must be an array of numbers");
        for (const auto& m : it.value()) {
          if (!m.is_number()) throw ConfigError(where + ".means", "must be an array of numbers");
          f.means.push_back(m.get<double>());
        }
        continue;
      }
      if (!it.value().is_number()) throw ConfigError(where + "." + it.key(), "must be a number");
      f.params[it.key()] = it.value().get<double>();
    }
    return make_smooth_instance(f);
  } catch (const ConstructionError& e) {
    throw ConfigError(where, e.what());
  }
}

// Smoothness used by lattice policies when the policy block does not set beta.
inline double instance_beta(const Instance& env) {
  const double b = env.metadata().beta;
  return std::isfinite(b) ? b : 2.0;
}

inline std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const Instance& env, std::size_t horizon) {
  const json& p = spec.params;
  const std::string where = "policy " + spec.label;
  auto num = [&](const char* key, double fallback) {
    return p.contains(key) ? detail::number_field(p, key, where) : fallback;
  };
  auto allow = [&](const std::set<std::string>& keys) { detail::reject_unknown(p, keys, where); };
  try {
    if (spec.name == "smooth_bandit" || spec.name == "smooth_bandit_multi") {
      allow({"beta", "c_epoch", "p", "c0", "quadrature_resolution", "eig_tol", "support_threshold"});
      PolicyConfig cfg;
      cfg.beta = num("beta", instance_beta(env));
      cfg.dim = env.dim();
      cfg.arm_count = env.arm_count();
      cfg.horizon = horizon;
      cfg.c_epoch = num("c_epoch", cfg.c_epoch);
      cfg.p = num("p", cfg.p);
      cfg.c0 = num("c0", cfg.c0);
      cfg.quadrature_resolution = static_cast<std::size_t>(num("quadrature_resolution", 32));
      cfg.eig_tol = num("eig_tol", 0.0);
      cfg.support_threshold = num("support_threshold", cfg.support_threshold);
      const auto variant = spec.name == "smooth_bandit" ? SmoothBanditVariant::two_arm : SmoothBanditVariant::multi_arm;
      return std::make_unique<SmoothBandit>(cfg, env.support(), variant);
    }
    if (spec.name == "binned_ucb") {
      allow({"bin_side", "exploration"});
      BinnedUcbConfig cfg;
      cfg.horizon = horizon;
      cfg.dim = env.dim();
      cfg.arm_count = env.arm_count();
      cfg.bin_side = num("bin_side", 0.0);
      cfg.exploration = num("exploration", 2.0);
      return std::make_unique<BinnedUcb>(cfg);
    }
    if (spec.name == "uniform") {
      allow({});
      return std::make_unique<UniformPolicy>(env.arm_count());
    }
    if (spec.name == "oracle") {
      allow({});
      return std::make_unique<OraclePolicy>(env);
    }
  } catch (const ParameterError& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(where, e.what());
  }
  throw ConfigError(where, "unknown policy '" + spec.name + "'");
}

// base_seed XOR hash(label, T, rep).
inline std::uint64_t run_seed(std::uint64_t base_seed, const std::string& label, std::size_t horizon,
                              std::size_t rep) {
  const std::uint64_t h = hash_combine(hash_combine(stable_hash(label), horizon), rep);
  return base_seed ^ h;
}

// ---------------------------------------------------------------------------
// Execution.

struct RunKey {
  std::size_t policy = 0;  // index into ExperimentConfig::policies
  std::size_t horizon = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string instance_name;
  InstanceMetadata metadata;
  std::vector<RunKey> keys;
  std::vector<RunResult> runs;  // same order as keys
  double wall_seconds = 0.0;
};

// Ordered by policy, then horizon, then rep.
inline std::vector<RunKey> enumerate_runs(const ExperimentConfig& cfg) {
  std::vector<RunKey> keys;
  for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
    for (std::size_t T : cfg.horizons) {
      for (std::size_t r = 0; r < cfg.reps; ++r) {
        keys.push_back({p, T, r, run_seed(cfg.base_seed, cfg.policies[p].label, T, r)});
      }
    }
  }
  return keys;
}

// Runs `job(i)` for i in [0, n) on `threads` workers (0 means hardware concurrency).
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  if (cfg.policies.empty()) throw ConfigError("policies", "at least one policy is required");
  if (cfg.horizons.empty()) throw ConfigError("horizons", "at least one horizon is required");
  const auto t0 = std::chrono::steady_clock::now();
  const std::unique_ptr<Instance> env = make_instance(cfg.instance);
  // Construct every (policy, horizon) once up front so config errors surface before any run.
  for (const auto& spec : cfg.policies) {
    for (std::size_t T : cfg.horizons) make_policy(spec, *env, T);
  }

  ExperimentResult out;
  out.config = cfg;
  out.instance_name = env->name();
  out.metadata = env->metadata();
  out.keys = enumerate_runs(cfg);
  out.runs.resize(out.keys.size());
  std::vector<std::string> errors(out.keys.size());
  std::mutex progress_mutex;
  std::size_t done = 0;

  parallel_for(out.keys.size(), cfg.threads, [&](std::size_t i) {
    const RunKey& k = out.keys[i];
    try {
      auto policy = make_policy(cfg.policies[k.policy], *env, k.horizon);
      RunOptions opts;
      opts.checkpoints = even_checkpoints(k.horizon, cfg.checkpoints);
      out.runs[i] = simulate(*env, *policy, k.horizon, k.seed, opts);
      out.runs[i].policy = cfg.policies[k.policy].label;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(++done, out.keys.size());
    }
  });

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    const RunKey& k = out.keys[i];
    throw RunFailure("run failed (policy=" + cfg.policies[k.policy].label + ", T=" + std::to_string(k.horizon) +
                     ", rep=" + std::to_string(k.rep) + ", seed=" + std::to_string(k.seed) + "): " + errors[i]);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Output.

inline constexpr const char* kCsvHeader = "policy,instance,T,rep,seed,checkpoint_t,cum_regret,inferior_count";

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const ExperimentResult& res) {
  os << kCsvHeader << '\n';
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const RunResult& r = res.runs[i];
    const RunKey& k = res.keys[i];
    for (std::size_t c = 0; c < r.checkpoints.size(); ++c) {
      os << r.policy << ',' << r.instance << ',' << r.horizon << ',' << k.rep << ',' << r.seed << ','
         << r.checkpoints[c] << ',' << format_double(r.cum_regret[c]) << ',' << r.inferior_count[c] << '\n';
    }
  }
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return m;
}

inline json metadata_to_json(const InstanceMetadata& m) {
  return {{"beta", detail::finite_or_null(m.beta)},     {"L", detail::finite_or_null(m.L)},
          {"L1", detail::finite_or_null(m.L1)},         {"alpha", detail::finite_or_null(m.alpha)},
          {"gamma", detail::finite_or_null(m.gamma)},   {"c0", detail::finite_or_null(m.c0)},
          {"r0", detail::finite_or_null(m.r0)},         {"mu_min", detail::finite_or_null(m.mu_min)},
          {"mu_max", detail::finite_or_null(m.mu_max)}, {"derived", m.derived}};
}

struct TheoryTarget {
  double beta = 2.0;
  double alpha = 0.0;
  double dim = 1.0;
  double exponent = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Default acceptance band around the exponent: [e - 0.15, e + 0.25]; the upper
// side is wider because log factors bias finite-horizon slopes upward.
inline TheoryTarget theory_target(const json& overrides, const InstanceMetadata& meta, std::size_t dim) {
  TheoryTarget t;
  t.beta = std::isfinite(meta.beta) ? meta.beta : 2.0;
  t.alpha = std::isfinite(meta.alpha) ? meta.alpha : 0.0;
  t.dim = static_cast<double>(dim);
  if (overrides.contains("beta")) t.beta = detail::number_field(overrides, "beta", "theory");
  if (overrides.contains("alpha")) t.alpha = detail::number_field(overrides, "alpha", "theory");
  if (overrides.contains("dim")) t.dim = detail::number_field(overrides, "dim", "theory");
  t.exponent = theoretical_exponent(t.beta, t.alpha, t.dim);
  t.lo = t.exponent - 0.15;
  t.hi = t.exponent + 0.25;
  if (overrides.contains("band")) {
    const json& b = overrides["band"];
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
      throw ConfigError("theory.band", "must be [lo, hi]");
    }
    t.lo = b[0].get<double>();
    t.hi = b[1].get<double>();
  }
  return t;
}

inline json summary_json(const ExperimentResult& res, std::size_t dim) {
  const ExperimentConfig& cfg = res.config;
  const TheoryTarget th = theory_target(cfg.theory, res.metadata, dim);
  json groups = json::array();
  json runs = json::array();
  std::size_t i = 0;
  for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
    for (std::size_t T : cfg.horizons) {
      std::vector<double> finals, inferior;
      std::vector<std::vector<double>> at_cp;
      std::vector<std::size_t> cps;
      for (std::size_t r = 0; r < cfg.reps; ++r, ++i) {
        const RunResult& run = res.runs[i];
        finals.push_back(run.final_regret);
        inferior.push_back(static_cast<double>(run.final_inferior));
        if (cps.empty()) {
          cps = run.checkpoints;
          at_cp.assign(cps.size(), {});
        }
        for (std::size_t c = 0; c < cps.size(); ++c) at_cp[c].push_back(run.cum_regret[c]);
        runs.push_back({{"policy", run.policy},
                        {"T", T},
                        {"rep", res.keys[i].rep},
                        {"seed", run.seed},
                        {"final_regret", run.final_regret},
                        {"final_inferior", run.final_inferior},
                        {"epochs", run.diagnostics.epochs.size()},
                        {"degenerate_fits", run.diagnostics.degenerate_fits},
                        {"anomalies", run.diagnostics.anomalies}});
      }
      const MeanSe fr = mean_se(finals);
      const MeanSe fi = mean_se(inferior);
      json mean_curve = json::array();
      json se_curve = json::array();
      for (const auto& v : at_cp) {
        const MeanSe m = mean_se(v);
        mean_curve.push_back(m.mean);
        se_curve.push_back(m.se);
      }
      groups.push_back({{"policy", cfg.policies[p].label},
                        {"instance", res.instance_name},
                        {"T", T},
                        {"reps", cfg.reps},
                        {"mean_final_regret", fr.mean},
                        {"se_final_regret", fr.se},
                        {"mean_inferior", fi.mean},
                        {"se_inferior", fi.se},
                        {"checkpoints", cps},
                        {"mean_cum_regret", mean_curve},
                        {"se_cum_regret", se_curve}});
    }
  }
  json policies = json::array();
  for (const auto& p : cfg.policies) {
    json entry = p.params;
    entry["name"] = p.name;
    entry["label"] = p.label;
    policies.push_back(entry);
  }
  return {{"experiment", cfg.name},
          {"instance", {{"name", res.instance_name}, {"config", cfg.instance}, {"metadata", metadata_to_json(res.metadata)}}},
          {"policies", policies},
          {"horizons", cfg.horizons},
          {"reps", cfg.reps},
          {"base_seed", cfg.base_seed},
          {"theory",
           {{"beta", th.beta}, {"alpha", th.alpha}, {"dim", th.dim}, {"exponent", th.exponent}, {"band", {th.lo, th.hi}}}},
          {"groups", groups},
          {"runs", runs}};
}

struct ExperimentFiles {
  std::filesystem::path csv;
  std::filesystem::path summary;
  std::vector<std::filesystem::path> states;
};

inline std::string file_stem(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

// Writes regret.csv, summary.json and state reports for the first
// `save_states` reps of each lattice-policy group, all under out_dir.
inline ExperimentFiles write_experiment(const ExperimentResult& res, std::size_t dim) {
  const std::filesystem::path dir(res.config.out_dir);
  std::filesystem::create_directories(dir);
  ExperimentFiles files;
  const std::string stem = file_stem(res.config.name);
  files.csv = dir / (stem + "_regret.csv");
  files.summary = dir / (stem + "_summary.json");
  {
    std::ofstream os(files.csv, std::ios::binary);
    write_csv(os, res);
    if (!os) throw std::runtime_error("failed to write " + files.csv.string());
  }
  {
    std::ofstream os(files.summary, std::ios::binary);
    os << summary_json(res, dim).dump(2) << '\n';
    if (!os) throw std::runtime_error("failed to write " + files.summary.string());
  }
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const RunKey& k = res.keys[i];
    const RunResult& r = res.runs[i];
    if (k.rep >= res.config.save_states || r.diagnostics.final_active.empty()) continue;
    const auto path = dir / (stem + "_state_" + file_stem(r.policy) + "_T" + std::to_string(k.horizon) + "_rep" +
                             std::to_string(k.rep) + ".json");
    std::ofstream os(path, std::ios::binary);
    os << state_report(r).dump(2) << '\n';
    if (!os) throw std::runtime_error("failed to write " + path.string());
    files.states.push_back(path);
  }
  return files;
}

// ---------------------------------------------------------------------------
// Rate check on a written summary.

struct RateCheck {
  std::string policy;
  RateFit fit;
  TheoryTarget theory;
  bool pass = false;
};

inline RateCheck rate_check(const json& summary, const std::string& policy = "",
                            std::optional<double> lo = std::nullopt, std::optional<double> hi = std::nullopt) {
  RateCheck rc;
  try {
    const json& th = summary.at("theory");
    rc.theory.beta = th.at("beta").get<double>();
    rc.theory.alpha = th.at("alpha").get<double>();
    rc.theory.dim = th.at("dim").get<double>();
    rc.theory.exponent = theoretical_exponent(rc.theory.beta, rc.theory.alpha, rc.theory.dim);
    rc.theory.lo = th.at("band").at(0).get<double>();
    rc.theory.hi = th.at("band").at(1).get<double>();
    rc.policy = policy;
    if (rc.policy.empty()) {
      for (const auto& g : summary.at("groups")) {
        const std::string p = g.at("policy").get<std::string>();
        if (p.rfind("smooth_bandit", 0) == 0) {
          rc.policy = p;
          break;
        }
      }
      if (rc.policy.empty()) rc.policy = summary.at("groups").at(0).at("policy").get<std::string>();
    }
    std::vector<double> horizons, means;
    std::vector<std::size_t> reps;
    for (const auto& g : summary.at("groups")) {
      if (g.at("policy").get<std::string>() != rc.policy) continue;
      horizons.push_back(g.at("T").get<double>());
      means.push_back(g.at("mean_final_regret").get<double>());
      reps.push_back(g.at("reps").get<std::size_t>());
    }
    if (horizons.empty()) throw ParameterError("no groups for policy '" + rc.policy + "'");
    rc.fit = fit_rate(horizons, means, reps);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed summary: ") + e.what());
  }
  if (lo) rc.theory.lo = *lo;
  if (hi) rc.theory.hi = *hi;
  rc.pass = std::isfinite(rc.fit.slope) && rc.fit.slope >= rc.theory.lo && rc.fit.slope <= rc.theory.hi;
  return rc;
}

// ---------------------------------------------------------------------------
// Instance validation.

struct VerifyLine {
  std::string check;
  bool pass = false;
  std::string detail;
};

inline std::vector<VerifyLine> verify_instance(const Instance& env, const json& opts, std::uint64_t seed) {
  auto num = [&](const char* key, double fallback) {
    return opts.contains(key) ? detail::number_field(opts, key, "verify") : fallback;
  };
  const auto samples = static_cast<std::size_t>(num("samples", 1e6));
  const auto pairs = static_cast<std::size_t>(num("holder_pairs", 2e4));
  const InstanceMetadata& m = env.metadata();
  const double alpha = num("alpha", m.alpha);
  const double gamma = num("gamma", m.gamma);
  const double beta = num("beta", m.beta);
  const double L = num("L", m.L);
  Rng base(seed);
  std::vector<VerifyLine> lines;
  char buf[256];

  if (const auto* lb = dynamic_cast<const LowerBoundInstance*>(&env)) {
    Rng rng = base.fork(1);
    const MarginReport r = verify_margin_step(*lb, samples, rng);
    for (const auto& row : r.rows) {
      std::snprintf(buf, sizeof buf, "t=%.6g observed=%.6g expected=%.6g tol=%.3g", row.t, row.estimate, row.bound,
                    row.half_width);
      lines.push_back({"margin-step", row.pass, buf});
    }
  } else if (std::isfinite(alpha) && std::isfinite(gamma)) {
    std::vector<double> grid;
    if (opts.contains("t_grid")) {
      for (const auto& t : opts["t_grid"]) grid.push_back(t.get<double>());
    } else {
      grid = {0.01, 0.05, 0.1, 0.2, 0.4};
    }
    Rng rng = base.fork(1);
    const MarginReport r = verify_margin(env, alpha, gamma, grid, std::max<std::size_t>(samples, 10000), rng);
    for (const auto& row : r.rows) {
      std::snprintf(buf, sizeof buf, "t=%.4g P(0<|tau|<=t)=%.5g +- %.2g bound=%.5g", row.t, row.estimate,
                    row.half_width, row.bound);
      lines.push_back({"margin", row.pass, buf});
    }
  } else {
    lines.push_back({"margin", true, "skipped: no declared (alpha, gamma)"});
  }

  if (env.has_derivatives() && std::isfinite(beta) && std::isfinite(L)) {
    Rng rng = base.fork(2);
    const HolderReport r = verify_holder(env, beta, L, pairs, rng);
    std::snprintf(buf, sizeof buf, "pairs=%zu max remainder/dist^beta=%.4g L=%.4g", r.pairs, r.max_ratio, L);
    lines.push_back({"holder", r.pass, buf});
  } else {
    lines.push_back({"holder", true, "skipped: no analytic derivatives or declared (beta, L)"});
  }

  {
    Rng rng = base.fork(3);
    const DensityReport r = verify_density(env, samples, rng);
    std::snprintf(buf, sizeof buf, "samples=%zu outside support=%zu", r.n_samples, r.outside_support);
    lines.push_back({"support", r.outside_support == 0, buf});
    for (const auto& row : r.rows) {
      std::snprintf(buf, sizeof buf, "%s observed=%.6g expected=%.6g se=%.3g", row.region.c_str(), row.observed,
                    row.expected, row.standard_error);
      lines.push_back({"density", row.pass, buf});
    }
  }
  return lines;
}

}  // namespace smoothbandit
