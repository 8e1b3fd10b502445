#pragma once

// Reference policies: binned UCB (independent UCB1 in every bin), uniform
// randomization, and the oracle.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smoothbandit/environments.hpp"
#include "smoothbandit/errors.hpp"
#include "smoothbandit/geometry.hpp"
#include "smoothbandit/random.hpp"
#include "smoothbandit/run.hpp"

namespace smoothbandit {

// Pull counts and reward sums for one independent UCB1 instance.
struct Ucb1 {
  explicit Ucb1(std::size_t arms = 2, double exploration = 2.0)
      : counts(arms, 0), sums(arms, 0.0), exploration(exploration) {}

  std::vector<std::size_t> counts;
  std::vector<double> sums;
  double exploration;

  std::size_t visits() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }

  double mean(std::size_t a) const { return counts[a] ? sums[a] / static_cast<double>(counts[a]) : 0.0; }

  // Untried arms first in id order, then argmax of mean + sqrt(c ln t / n)
  // with t the number of visits to this bin; ties to the smaller id.
  std::size_t choose() const { return choose(visits()); }

  std::size_t choose(std::size_t local_t) const {
    for (std::size_t a = 0; a < counts.size(); ++a) {
      if (counts[a] == 0) return a;
    }
    const double log_t = std::log(static_cast<double>(std::max<std::size_t>(local_t, 1)));
    std::size_t best = 0;
    double best_index = -1.0;
    for (std::size_t a = 0; a < counts.size(); ++a) {
      const double idx = mean(a) + std::sqrt(exploration * log_t / static_cast<double>(counts[a]));
      if (idx > best_index) {
        best = a;
        best_index = idx;
      }
    }
    return best;
  }

  void update(std::size_t arm, double reward) {
    ++counts[arm];
    sums[arm] += reward;
  }
};

struct BinnedUcbConfig {
  std::size_t horizon = 10000;
  std::size_t dim = 1;
  std::size_t arm_count = 2;
  // <= 0 selects T^{-1/(2+d)}.
  double bin_side = 0.0;
  double exploration = 2.0;

  double resolved_bin_side() const {
    if (bin_side > 0.0) return bin_side;
    return std::pow(static_cast<double>(horizon), -1.0 / (2.0 + static_cast<double>(dim)));
  }
};

class BinnedUcb final : public Policy {
 public:
  explicit BinnedUcb(const BinnedUcbConfig& cfg)
      : cfg_(cfg), lattice_(cfg.dim, validated_side(cfg)), bins_(lattice_.cube_count(), Ucb1(cfg.arm_count, cfg.exploration)) {}

  std::string name() const override { return "binned_ucb"; }

  std::size_t act(std::span<const double> x, Rng& /*rng*/) override {
    return bins_[lattice_.locate(x)].choose();
  }

  void observe(std::span<const double> x, std::size_t arm, double reward) override {
    bins_[lattice_.locate(x)].update(arm, reward);
  }

  const GridLattice& lattice() const { return lattice_; }
  const Ucb1& bin(std::size_t flat) const { return bins_.at(flat); }

 private:
  static double validated_side(const BinnedUcbConfig& cfg) {
    if (cfg.dim == 0) throw ParameterError("dimension must be positive");
    if (cfg.arm_count < 2) throw ParameterError("need at least two arms");
    if (!(cfg.exploration > 0.0)) throw ParameterError("exploration coefficient must be positive");
    const double side = cfg.resolved_bin_side();
    if (!(side > 0.0 && side <= 1.0)) throw ParameterError("bin side must lie in (0,1]");
    return side;
  }

  BinnedUcbConfig cfg_;
  GridLattice lattice_;
  std::vector<Ucb1> bins_;
};

class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(std::size_t arms) : arms_(arms) {
    if (arms < 2) throw ParameterError("need at least two arms");
  }
  std::string name() const override { return "uniform"; }
  std::size_t act(std::span<const double>, Rng& rng) override {
    return static_cast<std::size_t>(rng.uniform_index(arms_));
  }
  void observe(std::span<const double>, std::size_t, double) override {}

 private:
  std::size_t arms_;
};

class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(const Instance& env) : env_(&env) {}
  std::string name() const override { return "oracle"; }
  std::size_t act(std::span<const double> x, Rng&) override { return oracle_arm(*env_, x); }
  void observe(std::span<const double>, std::size_t, double) override {}

 private:
  const Instance* env_;
};

inline std::size_t binned_ucb_act(const Ucb1& bin, std::size_t local_t) { return bin.choose(local_t); }
inline std::size_t uniform_act(std::size_t arms, Rng& rng) { return static_cast<std::size_t>(rng.uniform_index(arms)); }
inline std::size_t oracle_act(const Instance& env, std::span<const double> x) { return oracle_arm(env, x); }

}  // namespace smoothbandit
