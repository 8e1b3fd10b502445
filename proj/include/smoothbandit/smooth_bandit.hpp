#pragma once

// SmoothBandit: epoch-based elimination over a hypercube lattice with local
// polynomial reward estimates at cube centers. Two-arm and multi-arm variants.
//
// Decision regions are stored as one active arm set per cube. For two arms a
// cube is in the exploration region when both arms are active and in the
// exploitation region of arm a when the set is exactly {a}.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "smoothbandit/environments.hpp"
#include "smoothbandit/errors.hpp"
#include "smoothbandit/geometry.hpp"
#include "smoothbandit/localpoly.hpp"
#include "smoothbandit/random.hpp"
#include "smoothbandit/run.hpp"
#include "smoothbandit/schedule.hpp"

namespace smoothbandit {

using ArmSet = std::uint32_t;

inline ArmSet full_arm_set(std::size_t arms) {
  return arms >= 32 ? ~ArmSet{0} : static_cast<ArmSet>((ArmSet{1} << arms) - 1);
}
inline ArmSet arm_bit(std::size_t arm) { return ArmSet{1} << arm; }
inline bool has_arm(ArmSet s, std::size_t arm) { return (s & arm_bit(arm)) != 0; }
inline std::size_t arm_set_size(ArmSet s) { return static_cast<std::size_t>(std::popcount(s)); }

// The i-th (0-based) member of the set in increasing arm order.
inline std::size_t nth_arm(ArmSet s, std::size_t i) {
  for (; i > 0; --i) s &= s - 1;
  return static_cast<std::size_t>(std::countr_zero(s));
}

struct DecisionState {
  explicit DecisionState(GridLattice grid) : lattice(grid) {}

  std::size_t epoch = 1;
  GridLattice lattice;
  std::size_t arm_count = 2;
  // Cubes with positive context probability.
  std::vector<std::uint8_t> support;
  std::vector<ArmSet> active;
  // Samples of the current epoch, one set per arm.
  std::vector<SampleSet> samples;
  // N_{a,k-1} and H_{a,k-1}; set at each epoch boundary.
  std::vector<std::size_t> prev_counts;
  std::vector<double> bandwidth;

  bool explores(std::size_t flat) const { return arm_set_size(active[flat]) >= 2; }

  std::size_t support_count() const {
    std::size_t n = 0;
    for (auto s : support) n += s;
    return n;
  }
};

inline DecisionState initial_state(const PolicyConfig& cfg, const SupportPredicate& support) {
  cfg.validate();
  DecisionState s(build_lattice(static_cast<double>(cfg.horizon), cfg.beta, cfg.dim));
  s.arm_count = cfg.arm_count;
  s.support = support_cubes(s.lattice, support, cfg.quadrature_resolution, cfg.support_threshold);
  s.active.assign(s.lattice.cube_count(), full_arm_set(cfg.arm_count));
  s.samples.assign(cfg.arm_count, SampleSet(cfg.dim));
  s.prev_counts.assign(cfg.arm_count, 0);
  s.bandwidth.assign(cfg.arm_count, std::numeric_limits<double>::quiet_NaN());
  return s;
}

// Cubes that still randomize (two or more active arms) and include `arm`.
inline bool is_candidate(const DecisionState& s, std::size_t flat, std::size_t arm) {
  return s.support[flat] && s.explores(flat) && has_arm(s.active[flat], arm);
}

// Records N_{a,k-1} = |S_{a,k-1}| and H_{a,k-1} = N^{-1/(2 beta + d)}.
inline void set_bandwidths(DecisionState& s, const PolicyConfig& cfg) {
  const double expo = -1.0 / (2.0 * cfg.beta + static_cast<double>(cfg.dim));
  for (std::size_t a = 0; a < s.arm_count; ++a) {
    s.prev_counts[a] = s.samples[a].size();
    s.bandwidth[a] = s.prev_counts[a] > 0 ? std::pow(static_cast<double>(s.prev_counts[a]), expo)
                                          : std::numeric_limits<double>::infinity();
  }
}

// Inestimable cubes for `arm`: randomizing cubes whose center fails weak
// (c0/2^d, H_a)-regularity of the region where arm a was pulled, intersected
// with the support. With no samples for the arm every candidate is screened.
inline std::vector<std::uint8_t> screen_inestimable(const DecisionState& s, std::size_t arm,
                                                    const SupportPredicate& support, const PolicyConfig& cfg) {
  const std::size_t n = s.lattice.cube_count();
  std::vector<std::uint8_t> screened(n, 0);
  if (s.prev_counts.at(arm) == 0) {
    for (std::size_t f = 0; f < n; ++f) screened[f] = is_candidate(s, f, arm) ? 1 : 0;
    return screened;
  }
  std::vector<std::uint8_t> member(n, 0);
  bool all_members = true;
  for (std::size_t f = 0; f < n; ++f) {
    member[f] = (s.support[f] && has_arm(s.active[f], arm)) ? 1 : 0;
    if (s.support[f] && !member[f]) all_members = false;
  }
  const double h = s.bandwidth[arm];
  const double c = cfg.c0 / std::pow(2.0, static_cast<double>(cfg.dim));
  const CubeUnionRegion region(s.lattice, member, support);
  for (std::size_t f = 0; f < n; ++f) {
    if (!is_candidate(s, f, arm)) continue;
    const Point x = s.lattice.center(f);
    if (all_members && !support) {
      // The region is [0,1]^d; a ball inside it is trivially regular.
      bool inside = true;
      for (double v : x) inside = inside && v - h >= 0.0 && v + h <= 1.0;
      if (inside) continue;
    }
    if (!is_weakly_regular(x, h, c, region, cfg.quadrature_resolution)) screened[f] = 1;
  }
  return screened;
}

// Running statistics over local fits at one epoch boundary.
struct FitStats {
  std::size_t fits = 0;
  std::size_t degenerate = 0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();

  void add(const LocalPolyFit& f) {
    ++fits;
    if (f.degenerate) {
      ++degenerate;
    } else {
      min_eigenvalue = std::min(min_eigenvalue, f.min_eigenvalue);
    }
  }
};

// eta-hat_{a,k-1} at the center of every cube flagged in `cubes`.
inline std::map<std::size_t, double> estimate_arm_at_centers(const DecisionState& s, std::size_t arm,
                                                             const std::vector<std::uint8_t>& cubes,
                                                             const MultiIndexBasis& basis, double eig_tol,
                                                             FitStats* stats = nullptr) {
  std::map<std::size_t, double> out;
  const SlabIndex index(s.samples.at(arm));
  const double h = s.bandwidth.at(arm);
  for (std::size_t f = 0; f < cubes.size(); ++f) {
    if (!cubes[f]) continue;
    const Point x = s.lattice.center(f);
    if (!std::isfinite(h)) {
      out[f] = 0.0;
      if (stats) ++stats->degenerate, ++stats->fits;
      continue;
    }
    auto [value, fit] = local_poly_estimate(x, index, h, basis, eig_tol);
    if (stats) stats->add(fit);
    out[f] = value;
  }
  return out;
}

// Two-arm CATE at the centers of randomizing cubes that neither arm screened.
inline std::map<std::size_t, double> estimate_cate_at_centers(const DecisionState& s,
                                                              const std::vector<std::uint8_t>& screened_plus,
                                                              const std::vector<std::uint8_t>& screened_minus,
                                                              const MultiIndexBasis& basis, double eig_tol,
                                                              FitStats* stats = nullptr) {
  std::vector<std::uint8_t> cubes(s.lattice.cube_count(), 0);
  for (std::size_t f = 0; f < cubes.size(); ++f) {
    cubes[f] = (s.support[f] && s.explores(f) && !screened_plus[f] && !screened_minus[f]) ? 1 : 0;
  }
  const auto plus = estimate_arm_at_centers(s, kArmPlus, cubes, basis, eig_tol, stats);
  const auto minus = estimate_arm_at_centers(s, kArmMinus, cubes, basis, eig_tol, stats);
  std::map<std::size_t, double> tau;
  for (const auto& [f, v] : plus) tau[f] = v - minus.at(f);
  return tau;
}

struct UpdateCounts {
  std::size_t anomalies = 0;
};

// Two-arm region update over the randomizing cubes:
//   E_{a,k} = {a tau-hat > eps} U D_{-a},  R_k = {|tau-hat| <= eps}.
// Cubes screened for both arms stay in R_k and are counted as anomalies.
inline UpdateCounts apply_two_arm_update(DecisionState& s, const std::map<std::size_t, double>& tau,
                                         const std::vector<std::uint8_t>& screened_plus,
                                         const std::vector<std::uint8_t>& screened_minus, double eps) {
  UpdateCounts counts;
  const ArmSet plus = arm_bit(kArmPlus);
  const ArmSet minus = arm_bit(kArmMinus);
  for (std::size_t f = 0; f < s.active.size(); ++f) {
    if (!s.support[f] || !s.explores(f)) continue;
    const bool dp = screened_plus[f] != 0;
    const bool dm = screened_minus[f] != 0;
    if (dp && dm) {
      ++counts.anomalies;
      continue;
    }
    if (dp) {
      s.active[f] = minus;
      continue;
    }
    if (dm) {
      s.active[f] = plus;
      continue;
    }
    auto it = tau.find(f);
    if (it == tau.end()) throw ContractError("missing CATE estimate for a randomizing cube");
    if (it->second > eps) {
      s.active[f] = plus;
    } else if (-it->second > eps) {
      s.active[f] = minus;
    }
  }
  return counts;
}

// Value-returning form of the two-arm update.
inline DecisionState update_regions(DecisionState s, const std::map<std::size_t, double>& tau,
                                    const std::vector<std::uint8_t>& screened_plus,
                                    const std::vector<std::uint8_t>& screened_minus, double eps,
                                    UpdateCounts* counts = nullptr) {
  const UpdateCounts c = apply_two_arm_update(s, tau, screened_plus, screened_minus, eps);
  if (counts) *counts = c;
  ++s.epoch;
  return s;
}

// Multi-arm update: drop arm a from a randomizing cube when the cube is
// inestimable for a, or when some other estimable active arm a' has
// eta-hat_{a'} - eta-hat_a > eps. A set that would become empty is left
// unchanged and counted as an anomaly.
inline UpdateCounts apply_multi_arm_update(DecisionState& s,
                                           const std::vector<std::map<std::size_t, double>>& eta_hat,
                                           const std::vector<std::vector<std::uint8_t>>& screened, double eps) {
  UpdateCounts counts;
  const std::size_t arms = s.arm_count;
  for (std::size_t f = 0; f < s.active.size(); ++f) {
    if (!s.support[f] || !s.explores(f)) continue;
    const ArmSet current = s.active[f];
    ArmSet removed = 0;
    for (std::size_t a = 0; a < arms; ++a) {
      if (!has_arm(current, a)) continue;
      if (screened[a][f]) {
        removed |= arm_bit(a);
        continue;
      }
      const double ea = eta_hat[a].at(f);
      for (std::size_t b = 0; b < arms; ++b) {
        if (b == a || !has_arm(current, b) || screened[b][f]) continue;
        if (eta_hat[b].at(f) - ea > eps) {
          removed |= arm_bit(a);
          break;
        }
      }
    }
    const ArmSet next = current & ~removed;
    if (next == 0) {
      ++counts.anomalies;
      continue;
    }
    s.active[f] = next;
  }
  return counts;
}

// Per-step action: the unique active arm, or a uniform draw from the active set.
// Contexts in a cube outside the support randomize over all arms.
inline std::size_t act(std::span<const double> x, const DecisionState& s, Rng& rng) {
  const std::size_t f = s.lattice.locate(x);
  const ArmSet set = s.support[f] ? s.active[f] : full_arm_set(s.arm_count);
  const std::size_t n = arm_set_size(set);
  if (n == 1) return nth_arm(set, 0);
  return nth_arm(set, static_cast<std::size_t>(rng.uniform_index(n)));
}

enum class SmoothBanditVariant { two_arm, multi_arm };

struct SmoothBanditOptions {
  // Keep a copy of every epoch's active sets in the diagnostics.
  bool record_regions = false;
};

class SmoothBandit final : public Policy {
 public:
  SmoothBandit(PolicyConfig cfg, SupportPredicate support, SmoothBanditVariant variant,
               SmoothBanditOptions options = {})
      : cfg_(std::move(cfg)),
        support_(std::move(support)),
        variant_(variant),
        options_(options),
        schedule_(make_schedule_for(cfg_, variant)),
        state_(initial_state(cfg_, support_)),
        basis_(enumerate_basis(cfg_.dim, holder_degree(cfg_.beta))),
        eig_tol_(cfg_.resolved_eig_tol()) {
    if (variant_ == SmoothBanditVariant::two_arm && cfg_.arm_count != 2) {
      throw ParameterError("the two-arm policy needs exactly two arms");
    }
    diagnostics_.single_truncated_epoch = schedule_.single_truncated_epoch;
    epoch_end_ = schedule_.lengths.front();
    EpochRecord first;
    first.epoch = 1;
    first.start = 1;
    first.length = schedule_.lengths.front();
    first.tolerance = schedule_.tolerances.front();
    fill_region_counts(first);
    diagnostics_.epochs.push_back(first);
    if (options_.record_regions) snapshots_.push_back(state_.active);
  }

  std::string name() const override {
    return variant_ == SmoothBanditVariant::two_arm ? "smooth_bandit" : "smooth_bandit_multi";
  }

  std::size_t act(std::span<const double> x, Rng& rng) override { return smoothbandit::act(x, state_, rng); }

  void observe(std::span<const double> x, std::size_t arm, double reward) override {
    state_.samples[arm].add(x, reward);
    ++t_;
    if (t_ == epoch_end_ && state_.epoch < schedule_.epochs()) advance_epoch();
  }

  void finish(RunResult& r) const override {
    r.diagnostics = diagnostics_;
    r.diagnostics.lattice_dim = state_.lattice.dim();
    r.diagnostics.lattice_delta = state_.lattice.delta();
    r.diagnostics.cells_per_axis = state_.lattice.cells_per_axis();
    r.diagnostics.final_active = state_.active;
    r.diagnostics.support = state_.support;
  }

  const DecisionState& state() const { return state_; }
  const EpochSchedule& schedule() const { return schedule_; }
  const RunDiagnostics& diagnostics() const { return diagnostics_; }
  const std::vector<std::vector<ArmSet>>& region_snapshots() const { return snapshots_; }
  const PolicyConfig& config() const { return cfg_; }

 private:
  static EpochSchedule make_schedule_for(const PolicyConfig& cfg, SmoothBanditVariant v) {
    return make_schedule(cfg, v == SmoothBanditVariant::two_arm ? ScheduleForm::two_arm : ScheduleForm::multi_arm);
  }

  void fill_region_counts(EpochRecord& rec) const {
    rec.exploit_cubes.assign(cfg_.arm_count, 0);
    for (std::size_t f = 0; f < state_.active.size(); ++f) {
      if (!state_.support[f]) continue;
      if (state_.explores(f)) {
        ++rec.explore_cubes;
      } else {
        ++rec.exploit_cubes[nth_arm(state_.active[f], 0)];
      }
    }
  }

  void advance_epoch() {
    const std::size_t k = state_.epoch + 1;
    const double eps_prev = schedule_.tolerances[k - 2];
    set_bandwidths(state_, cfg_);

    EpochRecord rec;
    rec.epoch = k;
    rec.start = t_ + 1;
    rec.length = schedule_.lengths[k - 1];
    rec.tolerance = schedule_.tolerances[k - 1];
    rec.samples_prev = state_.prev_counts;
    rec.bandwidth_prev = state_.bandwidth;
    const double min_h = std::sqrt(static_cast<double>(cfg_.dim)) * state_.lattice.delta();
    for (double h : state_.bandwidth) rec.bandwidth_ok = rec.bandwidth_ok && h >= min_h;

    std::vector<std::vector<std::uint8_t>> screened(cfg_.arm_count);
    for (std::size_t a = 0; a < cfg_.arm_count; ++a) screened[a] = screen_inestimable(state_, a, support_, cfg_);
    rec.screened.assign(cfg_.arm_count, 0);
    for (std::size_t a = 0; a < cfg_.arm_count; ++a) {
      for (auto v : screened[a]) rec.screened[a] += v;
    }

    FitStats stats;
    UpdateCounts counts;
    if (variant_ == SmoothBanditVariant::two_arm) {
      const auto tau = estimate_cate_at_centers(state_, screened[kArmPlus], screened[kArmMinus], basis_, eig_tol_,
                                                &stats);
      rec.estimated_cubes = tau.size();
      counts = apply_two_arm_update(state_, tau, screened[kArmPlus], screened[kArmMinus], eps_prev);
    } else {
      std::vector<std::map<std::size_t, double>> eta(cfg_.arm_count);
      for (std::size_t a = 0; a < cfg_.arm_count; ++a) {
        std::vector<std::uint8_t> cubes(state_.lattice.cube_count(), 0);
        for (std::size_t f = 0; f < cubes.size(); ++f) cubes[f] = is_candidate(state_, f, a) && !screened[a][f];
        eta[a] = estimate_arm_at_centers(state_, a, cubes, basis_, eig_tol_, &stats);
        rec.estimated_cubes += eta[a].size();
      }
      counts = apply_multi_arm_update(state_, eta, screened, eps_prev);
    }
    rec.degenerate_fits = stats.degenerate;
    rec.min_eigenvalue = stats.min_eigenvalue;
    rec.anomalies = counts.anomalies;
    diagnostics_.degenerate_fits += stats.degenerate;
    diagnostics_.anomalies += counts.anomalies;

    for (auto& s : state_.samples) s.clear();
    state_.epoch = k;
    fill_region_counts(rec);
    diagnostics_.epochs.push_back(rec);
    if (options_.record_regions) snapshots_.push_back(state_.active);
    epoch_end_ += schedule_.lengths[k - 1];
  }

  PolicyConfig cfg_;
  SupportPredicate support_;
  SmoothBanditVariant variant_;
  SmoothBanditOptions options_;
  EpochSchedule schedule_;
  DecisionState state_;
  MultiIndexBasis basis_;
  double eig_tol_;
  RunDiagnostics diagnostics_;
  std::vector<std::vector<ArmSet>> snapshots_;
  std::size_t t_ = 0;
  std::size_t epoch_end_ = 0;
};

// Copies dimension and arm count from the environment into the config.
inline PolicyConfig config_for(const Instance& env, PolicyConfig cfg) {
  cfg.dim = env.dim();
  cfg.arm_count = env.arm_count();
  return cfg;
}

inline RunResult run_two_arm(const Instance& env, const PolicyConfig& cfg, std::uint64_t seed,
                             const RunOptions& options = {}) {
  if (env.arm_count() != 2) throw ParameterError("run_two_arm needs a two-arm instance");
  PolicyConfig c = config_for(env, cfg);
  SmoothBandit policy(c, env.support(), SmoothBanditVariant::two_arm);
  return simulate(env, policy, c.horizon, seed, options);
}

inline RunResult run_multi_arm(const Instance& env, const PolicyConfig& cfg, std::uint64_t seed,
                               const RunOptions& options = {}) {
  PolicyConfig c = config_for(env, cfg);
  SmoothBandit policy(c, env.support(), SmoothBanditVariant::multi_arm);
  return simulate(env, policy, c.horizon, seed, options);
}

}  // namespace smoothbandit
