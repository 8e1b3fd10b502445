#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "smoothbandit/errors.hpp"
#include "smoothbandit/geometry.hpp"
#include "smoothbandit/localpoly.hpp"

namespace smoothbandit {

struct PolicyConfig {
  double beta = 2.0;
  std::size_t dim = 1;
  std::size_t horizon = 10000;
  // Stand-in for the eigenvalue constant in the epoch lengths; smaller means longer epochs.
  double c_epoch = 0.5;
  // Lower bound on the probability that each arm is optimal; an input to the schedule.
  double p = 0.5;
  // Regularity constant of the optimal decision regions.
  double c0 = 1.0;
  std::size_t quadrature_resolution = kDefaultQuadratureResolution;
  // <= 0 selects 1e-8 * M.
  double eig_tol = 0.0;
  std::size_t arm_count = 2;
  double support_threshold = 1e-9;

  void validate() const {
    if (!(beta >= 1.0)) throw ParameterError("beta must be at least 1");
    if (dim == 0) throw ParameterError("dimension must be positive");
    if (horizon < 3) throw ParameterError("horizon must be at least 3");
    if (!(c_epoch > 0.0)) throw ParameterError("c_epoch must be positive");
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p must lie in (0,1]");
    if (!(c0 > 0.0 && c0 <= 1.0)) throw ParameterError("c0 must lie in (0,1]");
    if (quadrature_resolution < 2) throw ParameterError("quadrature resolution must be at least 2");
    if (arm_count < 2 || arm_count > 32) throw ParameterError("arm count must lie in [2, 32]");
  }

  double resolved_eig_tol() const {
    return eig_tol > 0.0 ? eig_tol : default_eig_tol(enumerate_basis(dim, holder_degree(beta)));
  }
};

struct EpochSchedule {
  // Nominal n_k from the length formula.
  std::vector<std::size_t> nominal_lengths;
  // Realized lengths; the last one is truncated so the sum is the horizon.
  std::vector<std::size_t> lengths;
  // epsilon_k = 2^{-k}.
  std::vector<double> tolerances;
  double delta = 0.0;
  // Set when n_1 alone exceeds the horizon: one truncated epoch of pure exploration.
  bool single_truncated_epoch = false;

  std::size_t epochs() const { return lengths.size(); }

  // First step (1-based) of epoch k (1-based).
  std::size_t start(std::size_t k) const {
    std::size_t s = 1;
    for (std::size_t i = 0; i + 1 < k; ++i) s += lengths[i];
    return s;
  }
};

// Nominal length of epoch k for the configured arm count. With two arms this is
// ceil((4/p) (log(T delta^-d) / (c eps_k^2))^{(2b+d)/(2b)} + (2/p^2) log T); the
// multi-arm form uses 2|A|/p and |A|^2/(2 p^2), which coincide at |A| = 2.
enum class ScheduleForm { automatic, two_arm, multi_arm };

inline double nominal_epoch_length(const PolicyConfig& cfg, double delta, std::size_t k,
                                   ScheduleForm form = ScheduleForm::automatic) {
  const double T = static_cast<double>(cfg.horizon);
  const double d = static_cast<double>(cfg.dim);
  const double arms = static_cast<double>(cfg.arm_count);
  const double eps = std::ldexp(1.0, -static_cast<int>(k));
  const double inner = std::log(T * std::pow(delta, -d)) / (cfg.c_epoch * eps * eps);
  const double power = (2.0 * cfg.beta + d) / (2.0 * cfg.beta);
  double lead, tail;
  if (form == ScheduleForm::two_arm && cfg.arm_count != 2) throw ParameterError("two-arm schedule needs two arms");
  const bool two = form == ScheduleForm::two_arm || (form == ScheduleForm::automatic && cfg.arm_count == 2);
  if (two) {
    lead = 4.0 / cfg.p;
    tail = 2.0 / (cfg.p * cfg.p);
  } else {
    lead = 2.0 * arms / cfg.p;
    tail = arms * arms / (2.0 * cfg.p * cfg.p);
  }
  return std::ceil(lead * std::pow(inner, power) + tail * std::log(T));
}

inline EpochSchedule make_schedule(const PolicyConfig& cfg, ScheduleForm form = ScheduleForm::automatic) {
  cfg.validate();
  EpochSchedule s;
  s.delta = lattice_delta(static_cast<double>(cfg.horizon), cfg.beta, cfg.dim);
  const double T = static_cast<double>(cfg.horizon);
  double total = 0.0;
  for (std::size_t k = 1; total < T; ++k) {
    const double n = nominal_epoch_length(cfg, s.delta, k, form);
    const double nominal = std::min(n, 1e18);
    s.nominal_lengths.push_back(static_cast<std::size_t>(nominal));
    s.tolerances.push_back(std::ldexp(1.0, -static_cast<int>(k)));
    const double realized = std::min(nominal, T - total);
    s.lengths.push_back(static_cast<std::size_t>(realized));
    total += realized;
  }
  s.single_truncated_epoch = s.nominal_lengths.front() > cfg.horizon;
  return s;
}

// ceil(beta log T / ((2 beta + d) log 2)); valid for T >= e^{max(c_epoch, 1)}.
inline std::size_t epoch_count_bound(double horizon, double beta, std::size_t dim) {
  const double d = static_cast<double>(dim);
  return static_cast<std::size_t>(std::ceil(beta * std::log(horizon) / ((2.0 * beta + d) * std::log(2.0))));
}

}  // namespace smoothbandit
