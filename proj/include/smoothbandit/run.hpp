#pragma once

// Simulation loop shared by every policy, and the per-run result record.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smoothbandit/environments.hpp"
#include "smoothbandit/random.hpp"

namespace smoothbandit {

// Summary of one epoch of SmoothBandit, recorded at the epoch boundary that
// produced its decision regions.
struct EpochRecord {
  std::size_t epoch = 1;
  std::size_t start = 1;
  std::size_t length = 0;
  double tolerance = 0.5;
  // Per-arm sample counts and bandwidths from the previous epoch.
  std::vector<std::size_t> samples_prev;
  std::vector<double> bandwidth_prev;
  std::vector<std::size_t> screened;
  std::size_t estimated_cubes = 0;
  std::size_t degenerate_fits = 0;
  double min_eigenvalue = 0.0;  // smallest Gram eigenvalue among non-degenerate fits
  std::size_t anomalies = 0;
  std::size_t explore_cubes = 0;
  // Cubes whose active set is exactly {a}.
  std::vector<std::size_t> exploit_cubes;
  bool bandwidth_ok = true;  // H >= sqrt(d) delta for every arm
};

struct RunDiagnostics {
  std::vector<EpochRecord> epochs;
  std::size_t degenerate_fits = 0;
  std::size_t anomalies = 0;
  bool single_truncated_epoch = false;
  // Final decision regions of lattice policies: one active-arm bitmask per cube.
  std::size_t lattice_dim = 0;
  double lattice_delta = 0.0;
  std::size_t cells_per_axis = 0;
  std::vector<std::uint32_t> final_active;
  std::vector<std::uint8_t> support;
};

struct RunResult {
  std::string policy;
  std::string instance;
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  std::vector<std::size_t> checkpoints;
  std::vector<double> cum_regret;
  std::vector<std::size_t> inferior_count;
  double final_regret = 0.0;
  std::size_t final_inferior = 0;
  double wall_seconds = 0.0;
  RunDiagnostics diagnostics;
  // Filled only when RunOptions::record_steps is set.
  std::vector<std::uint8_t> arms;
  std::vector<double> step_regret;
};

struct RunOptions {
  // Steps at which cumulative values are recorded; the horizon is always added.
  std::vector<std::size_t> checkpoints;
  bool record_steps = false;
};

// Interface every simulated policy implements. act() may consume policy
// randomness; observe() receives the realized reward.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual std::size_t act(std::span<const double> x, Rng& rng) = 0;
  virtual void observe(std::span<const double> x, std::size_t arm, double reward) = 0;
  virtual void finish(RunResult& /*result*/) const {}
};

// Evenly spaced checkpoints plus the horizon.
inline std::vector<std::size_t> even_checkpoints(std::size_t horizon, std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i <= count; ++i) out.push_back(std::max<std::size_t>(1, horizon * i / count));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Runs `policy` for `horizon` steps against `env`. Contexts and rewards come
// from one child stream of `seed`, policy randomness from another, so two
// policies that pull the same arms see the same contexts and rewards.
inline RunResult simulate(const Instance& env, Policy& policy, std::size_t horizon, std::uint64_t seed,
                          const RunOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng base(seed);
  Rng env_rng = base.fork(1);
  Rng policy_rng = base.fork(2);

  RunResult r;
  r.policy = policy.name();
  r.instance = env.name();
  r.seed = seed;
  r.horizon = horizon;
  std::vector<std::size_t> cps = options.checkpoints;
  cps.push_back(horizon);
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  cps.erase(std::remove_if(cps.begin(), cps.end(), [&](std::size_t c) { return c == 0 || c > horizon; }), cps.end());
  if (options.record_steps) {
    r.arms.reserve(horizon);
    r.step_regret.reserve(horizon);
  }

  Point x(env.dim());
  double regret = 0.0;
  std::size_t inferior = 0;
  std::size_t next_cp = 0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    env.sample_context(env_rng, x);
    const std::size_t arm = policy.act(x, policy_rng);
    const double y = env.sample_reward(x, arm, env_rng);
    policy.observe(x, arm, y);

    const std::size_t best = oracle_arm(env, x);
    const double inst = env.mean(x, best) - env.mean(x, arm);
    regret += inst;
    if (inst > 0.0) ++inferior;
    if (options.record_steps) {
      r.arms.push_back(static_cast<std::uint8_t>(arm));
      r.step_regret.push_back(inst);
    }
    if (next_cp < cps.size() && t == cps[next_cp]) {
      r.checkpoints.push_back(t);
      r.cum_regret.push_back(regret);
      r.inferior_count.push_back(inferior);
      ++next_cp;
    }
  }
  r.final_regret = regret;
  r.final_inferior = inferior;
  policy.finish(r);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace smoothbandit
