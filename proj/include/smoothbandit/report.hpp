#pragma once

// JSON form of run diagnostics and final decision regions.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoothbandit/errors.hpp"
#include "smoothbandit/run.hpp"

namespace smoothbandit {

namespace detail {
// NaN and infinity are not JSON numbers.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double number_or_nan(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace detail

inline nlohmann::json epoch_to_json(const EpochRecord& e) {
  nlohmann::json bw = nlohmann::json::array();
  for (double h : e.bandwidth_prev) bw.push_back(detail::finite_or_null(h));
  return {
      {"epoch", e.epoch},
      {"start", e.start},
      {"length", e.length},
      {"tolerance", e.tolerance},
      {"samples_prev", e.samples_prev},
      {"bandwidth_prev", bw},
      {"screened", e.screened},
      {"estimated_cubes", e.estimated_cubes},
      {"degenerate_fits", e.degenerate_fits},
      {"min_eigenvalue", detail::finite_or_null(e.min_eigenvalue)},
      {"anomalies", e.anomalies},
      {"explore_cubes", e.explore_cubes},
      {"exploit_cubes", e.exploit_cubes},
      {"bandwidth_ok", e.bandwidth_ok},
  };
}

inline EpochRecord epoch_from_json(const nlohmann::json& j) {
  EpochRecord e;
  e.epoch = j.at("epoch").get<std::size_t>();
  e.start = j.at("start").get<std::size_t>();
  e.length = j.at("length").get<std::size_t>();
  e.tolerance = j.at("tolerance").get<double>();
  e.samples_prev = j.at("samples_prev").get<std::vector<std::size_t>>();
  for (const auto& h : j.at("bandwidth_prev")) e.bandwidth_prev.push_back(detail::number_or_nan(h));
  e.screened = j.at("screened").get<std::vector<std::size_t>>();
  e.estimated_cubes = j.at("estimated_cubes").get<std::size_t>();
  e.degenerate_fits = j.at("degenerate_fits").get<std::size_t>();
  e.min_eigenvalue = detail::number_or_nan(j.at("min_eigenvalue"));
  e.anomalies = j.at("anomalies").get<std::size_t>();
  e.explore_cubes = j.at("explore_cubes").get<std::size_t>();
  e.exploit_cubes = j.at("exploit_cubes").get<std::vector<std::size_t>>();
  e.bandwidth_ok = j.at("bandwidth_ok").get<bool>();
  return e;
}

// Full state report of one run: header, per-epoch diagnostics, final regions.
inline nlohmann::json state_report(const RunResult& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.diagnostics.epochs) epochs.push_back(epoch_to_json(e));
  const auto& d = r.diagnostics;
  return {
      {"policy", r.policy},
      {"instance", r.instance},
      {"seed", r.seed},
      {"horizon", r.horizon},
      {"final_regret", r.final_regret},
      {"final_inferior", r.final_inferior},
      {"degenerate_fits", d.degenerate_fits},
      {"anomalies", d.anomalies},
      {"single_truncated_epoch", d.single_truncated_epoch},
      {"lattice", {{"dim", d.lattice_dim}, {"delta", d.lattice_delta}, {"cells_per_axis", d.cells_per_axis}}},
      {"epochs", epochs},
      {"final_active", d.final_active},
      {"support", d.support},
  };
}

struct StateSummary {
  std::string policy;
  std::string instance;
  std::size_t horizon = 0;
  std::vector<EpochRecord> epochs;
  std::size_t support_cubes = 0;
  std::size_t explore_cubes = 0;
  // Cubes whose final active set is exactly {a}, indexed by arm.
  std::vector<std::size_t> exploit_cubes;
};

inline StateSummary summarize_state(const nlohmann::json& j) {
  StateSummary s;
  try {
    s.policy = j.at("policy").get<std::string>();
    s.instance = j.at("instance").get<std::string>();
    s.horizon = j.at("horizon").get<std::size_t>();
    for (const auto& e : j.at("epochs")) s.epochs.push_back(epoch_from_json(e));
    const auto active = j.at("final_active").get<std::vector<std::uint32_t>>();
    const auto support = j.at("support").get<std::vector<std::uint8_t>>();
    if (active.size() != support.size()) throw ParameterError("final_active and support differ in length");
    for (std::size_t f = 0; f < active.size(); ++f) {
      if (!support[f]) continue;
      ++s.support_cubes;
      const std::uint32_t a = active[f];
      if (a == 0) throw ParameterError("support cube with an empty active set");
      if ((a & (a - 1)) != 0) {
        ++s.explore_cubes;
        continue;
      }
      std::size_t arm = 0;
      while (((a >> arm) & 1u) == 0) ++arm;
      if (s.exploit_cubes.size() <= arm) s.exploit_cubes.resize(arm + 1, 0);
      ++s.exploit_cubes[arm];
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed state report: ") + e.what());
  }
  return s;
}

}  // namespace smoothbandit
