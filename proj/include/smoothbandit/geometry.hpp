#pragma once

// Hypercube lattice over [0,1]^d and ball/region volume fractions.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smoothbandit/errors.hpp"

namespace smoothbandit {

using Point = std::vector<double>;

// Membership oracle for the covariate support. An empty function means [0,1]^d.
using SupportPredicate = std::function<bool(std::span<const double>)>;

struct CubeId {
  std::vector<std::size_t> index;

  auto operator<=>(const CubeId&) const = default;
};

class GridLattice {
 public:
  GridLattice(std::size_t dim, double delta) : dim_(dim), delta_(delta) {
    if (dim == 0) throw ParameterError("lattice dimension must be positive");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("lattice delta must be positive and finite");
    cells_ = static_cast<std::size_t>(std::ceil(1.0 / delta));
    if (cells_ == 0) cells_ = 1;
    // ceil() of a rounded quotient can land one short of covering [0,1].
    while (static_cast<double>(cells_) * delta < 1.0) ++cells_;
    double total = 1.0;
    for (std::size_t i = 0; i < dim; ++i) total *= static_cast<double>(cells_);
    if (total > 1e8) throw ParameterError("lattice has too many cubes (" + std::to_string(total) + ")");
    cube_count_ = static_cast<std::size_t>(total);
  }

  std::size_t dim() const { return dim_; }
  double delta() const { return delta_; }
  std::size_t cells_per_axis() const { return cells_; }
  std::size_t cube_count() const { return cube_count_; }

  double center_coord(std::size_t j) const { return (2.0 * static_cast<double>(j) + 1.0) / 2.0 * delta_; }

  // Nearest center along one axis. Ties go to the smaller index, which is the
  // candidate closer to the origin.
  std::size_t axis_index(double x) const {
    const double q = std::floor(x / delta_);
    auto j0 = static_cast<std::ptrdiff_t>(std::clamp(q, 0.0, static_cast<double>(cells_ - 1)));
    std::size_t best = static_cast<std::size_t>(j0);
    double best_dist = std::abs(x - center_coord(best));
    for (std::ptrdiff_t j = j0 - 1; j <= j0 + 1; ++j) {
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(cells_)) continue;
      const double dist = std::abs(x - center_coord(static_cast<std::size_t>(j)));
      if (dist < best_dist || (dist == best_dist && static_cast<std::size_t>(j) < best)) {
        best = static_cast<std::size_t>(j);
        best_dist = dist;
      }
    }
    return best;
  }

  // Flat index of the cube containing x; x must lie in [0,1]^d.
  std::size_t locate(std::span<const double> x) const {
    check_point(x);
    std::size_t flat = 0;
    for (std::size_t i = 0; i < dim_; ++i) flat = flat * cells_ + axis_index(x[i]);
    return flat;
  }

  // Same as locate() but returns npos for points outside [0,1]^d.
  std::size_t locate_or_npos(std::span<const double> x) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (!(x[i] >= 0.0 && x[i] <= 1.0)) return npos;
      flat = flat * cells_ + axis_index(x[i]);
    }
    return flat;
  }

  std::size_t flat_index(const CubeId& id) const {
    if (id.index.size() != dim_) throw ContractError("cube id has wrong dimension");
    std::size_t flat = 0;
    for (std::size_t v : id.index) {
      if (v >= cells_) throw ContractError("cube id out of range");
      flat = flat * cells_ + v;
    }
    return flat;
  }

  CubeId cube_id(std::size_t flat) const {
    CubeId id{std::vector<std::size_t>(dim_)};
    for (std::size_t i = dim_; i-- > 0;) {
      id.index[i] = flat % cells_;
      flat /= cells_;
    }
    return id;
  }

  Point center(std::size_t flat) const {
    Point c(dim_);
    for (std::size_t i = dim_; i-- > 0;) {
      c[i] = center_coord(flat % cells_);
      flat /= cells_;
    }
    return c;
  }

  Point center(const CubeId& id) const { return center(flat_index(id)); }

  void check_point(std::span<const double> x) const {
    if (x.size() != dim_) throw DomainError("point has wrong dimension");
    for (double v : x) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("point coordinate outside [0,1]: " + std::to_string(v));
    }
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  std::size_t dim_;
  double delta_;
  std::size_t cells_ = 1;
  std::size_t cube_count_ = 1;
};

// delta = T^{-beta/(2 beta + d)} / log T.
inline double lattice_delta(double horizon, double beta, std::size_t dim) {
  if (!(horizon >= 3.0)) throw ParameterError("horizon must be at least 3");
  if (!(beta >= 1.0)) throw ParameterError("smoothness beta must be at least 1");
  if (dim == 0) throw ParameterError("dimension must be positive");
  const double d = static_cast<double>(dim);
  return std::pow(horizon, -beta / (2.0 * beta + d)) / std::log(horizon);
}

inline GridLattice build_lattice(double horizon, double beta, std::size_t dim) {
  return GridLattice(dim, lattice_delta(horizon, beta, dim));
}

inline std::pair<CubeId, Point> assign_cube(std::span<const double> x, const GridLattice& lattice) {
  const std::size_t flat = lattice.locate(x);
  return {lattice.cube_id(flat), lattice.center(flat)};
}

inline double unit_ball_volume(std::size_t dim) {
  const double d = static_cast<double>(dim);
  return std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

inline double ball_volume(std::size_t dim, double radius) {
  return unit_ball_volume(dim) * std::pow(radius, static_cast<double>(dim));
}

inline constexpr std::size_t kDefaultQuadratureResolution = 32;

// Visits the midpoints of a resolution^d rectangle rule on the box [lo, hi].
template <typename Visit>
void for_each_midpoint(std::span<const double> lo, std::span<const double> hi, std::size_t resolution, Visit&& visit) {
  const std::size_t d = lo.size();
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> step(d);
  Point p(d);
  for (std::size_t i = 0; i < d; ++i) {
    step[i] = (hi[i] - lo[i]) / static_cast<double>(resolution);
    p[i] = lo[i] + 0.5 * step[i];
  }
  while (true) {
    visit(std::span<const double>(p));
    std::size_t axis = d;
    while (axis-- > 0) {
      if (++idx[axis] < resolution) {
        p[axis] = lo[axis] + (static_cast<double>(idx[axis]) + 0.5) * step[axis];
        break;
      }
      idx[axis] = 0;
      p[axis] = lo[axis] + 0.5 * step[axis];
    }
    if (axis == static_cast<std::size_t>(-1)) break;
  }
}

// Midpoint-rule estimate of Leb[region ∩ B(center, radius)] / Leb[B(center, radius)].
// Numerator and denominator share the same midpoints, so a ball contained in
// the region gives exactly 1.
template <typename Region>
double ball_region_fraction(std::span<const double> center, double radius, Region&& region,
                            std::size_t resolution = kDefaultQuadratureResolution) {
  if (resolution < 2) throw ParameterError("quadrature resolution must be at least 2");
  if (!(radius > 0.0)) throw ParameterError("ball radius must be positive");
  const std::size_t d = center.size();
  Point lo(d), hi(d);
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = center[i] - radius;
    hi[i] = center[i] + radius;
  }
  const double r2 = radius * radius;
  std::size_t in_ball = 0;
  std::size_t in_both = 0;
  for_each_midpoint(lo, hi, resolution, [&](std::span<const double> p) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += (p[i] - center[i]) * (p[i] - center[i]);
    if (s > r2) return;
    ++in_ball;
    if (region(p)) ++in_both;
  });
  if (in_ball == 0) return 0.0;
  return static_cast<double>(in_both) / static_cast<double>(in_ball);
}

template <typename Region>
bool is_weakly_regular(std::span<const double> x, double r, double c, Region&& region,
                       std::size_t resolution = kDefaultQuadratureResolution) {
  if (!(c > 0.0 && c <= 1.0)) throw ParameterError("regularity constant must lie in (0,1]");
  if (!(r > 0.0)) throw ParameterError("regularity radius must be positive");
  return ball_region_fraction(x, r, std::forward<Region>(region), resolution) >= c;
}

inline bool in_unit_cube(std::span<const double> x) {
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return true;
}

// A union of lattice cubes intersected with the covariate support.
class CubeUnionRegion {
 public:
  CubeUnionRegion(const GridLattice& lattice, const std::vector<std::uint8_t>& member, const SupportPredicate& support)
      : lattice_(&lattice), member_(&member), support_(&support) {}

  bool operator()(std::span<const double> p) const {
    const std::size_t flat = lattice_->locate_or_npos(p);
    if (flat == GridLattice::npos || !(*member_)[flat]) return false;
    return !*support_ || (*support_)(p);
  }

 private:
  const GridLattice* lattice_;
  const std::vector<std::uint8_t>* member_;
  const SupportPredicate* support_;
};

// Cubes whose quadrature mass fraction inside the support exceeds `threshold`.
inline std::vector<std::uint8_t> support_cubes(const GridLattice& lattice, const SupportPredicate& support,
                                               std::size_t resolution = kDefaultQuadratureResolution,
                                               double threshold = 1e-9) {
  std::vector<std::uint8_t> out(lattice.cube_count(), 1);
  if (!support) return out;
  if (resolution < 2) throw ParameterError("quadrature resolution must be at least 2");
  const std::size_t d = lattice.dim();
  Point lo(d), hi(d);
  for (std::size_t flat = 0; flat < lattice.cube_count(); ++flat) {
    const Point c = lattice.center(flat);
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::max(0.0, c[i] - lattice.delta() / 2.0);
      hi[i] = std::min(1.0, c[i] + lattice.delta() / 2.0);
    }
    std::size_t hits = 0, total = 0;
    for_each_midpoint(lo, hi, resolution, [&](std::span<const double> p) {
      ++total;
      if (support(p)) ++hits;
    });
    out[flat] = static_cast<double>(hits) / static_cast<double>(total) > threshold ? 1 : 0;
  }
  return out;
}

}  // namespace smoothbandit
