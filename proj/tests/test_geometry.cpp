#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "smoothbandit/geometry.hpp"
#include "smoothbandit/random.hpp"

using namespace smoothbandit;

TEST(BuildLattice, HorizonEFive) {
  const GridLattice g = build_lattice(std::exp(5.0), 1.0, 1);
  // T^{-1/3} / log T with log T = 5.
  EXPECT_NEAR(g.delta(), std::exp(-5.0 / 3.0) / 5.0, 1e-12);
  EXPECT_NEAR(g.delta(), 0.037788, 1e-4);
  EXPECT_EQ(g.cells_per_axis(), 27u);
}

TEST(BuildLattice, SmallestHorizon) {
  const GridLattice g = build_lattice(3.0, 1.0, 1);
  EXPECT_NEAR(g.delta(), 0.6312, 1e-4);
  EXPECT_EQ(g.cells_per_axis(), 2u);
}

TEST(BuildLattice, CoversUnitCube) {
  for (double T : {3.0, 10.0, 148.0, 1e3, 1e4, 1e5, 12345.0}) {
    for (double beta : {1.0, 1.5, 2.0, 3.0}) {
      for (std::size_t d : {1u, 2u}) {
        const GridLattice g = build_lattice(T, beta, d);
        EXPECT_GE(static_cast<double>(g.cells_per_axis()) * g.delta(), 1.0);
        EXPECT_EQ(g.cells_per_axis(), static_cast<std::size_t>(std::ceil(1.0 / g.delta())));
      }
    }
  }
}

TEST(BuildLattice, RejectsInvalidParameters) {
  EXPECT_THROW(build_lattice(2.0, 1.0, 1), ParameterError);
  EXPECT_THROW(build_lattice(100.0, 0.5, 1), ParameterError);
  EXPECT_THROW(build_lattice(100.0, 1.0, 0), ParameterError);
}

TEST(AssignCube, Examples) {
  const GridLattice g(1, 0.5);
  const Point origin{0.0};
  EXPECT_EQ(assign_cube(origin, g).first.index, std::vector<std::size_t>{0});
  const Point mid{0.5};
  auto [id, center] = assign_cube(mid, g);
  EXPECT_EQ(id.index, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(center[0], 0.25);
  const Point p{0.3};
  EXPECT_EQ(assign_cube(p, g).first.index, std::vector<std::size_t>{0});
  const Point one{1.0};
  EXPECT_EQ(assign_cube(one, g).first.index, std::vector<std::size_t>{1});
}

TEST(AssignCube, OriginInHigherDimensions) {
  const GridLattice g(3, 0.1);
  const Point origin{0.0, 0.0, 0.0};
  EXPECT_EQ(assign_cube(origin, g).first.index, (std::vector<std::size_t>{0, 0, 0}));
}

TEST(AssignCube, TiesGoTowardOriginPerAxis) {
  const GridLattice g(2, 0.25);
  const Point p{0.5, 0.25};
  EXPECT_EQ(assign_cube(p, g).first.index, (std::vector<std::size_t>{1, 0}));
}

TEST(AssignCube, OutOfRangeIsDomainError) {
  const GridLattice g(2, 0.25);
  EXPECT_THROW(assign_cube(Point{-0.01, 0.5}, g), DomainError);
  EXPECT_THROW(assign_cube(Point{0.5, 1.01}, g), DomainError);
  EXPECT_THROW(assign_cube(Point{0.5}, g), DomainError);
  EXPECT_EQ(g.locate_or_npos(Point{1.5, 0.5}), GridLattice::npos);
}

TEST(AssignCube, PartitionPropertyOnRandomPoints) {
  Rng rng(123);
  for (std::size_t d : {1u, 2u, 3u}) {
    const GridLattice g = build_lattice(1e4, 2.0, d);
    Point x(d);
    const int n = d == 1 ? 1000000 : 300000;
    for (int i = 0; i < n; ++i) {
      for (double& v : x) v = rng.uniform();
      const std::size_t flat = g.locate(x);
      ASSERT_LT(flat, g.cube_count());
      const Point c = g.center(flat);
      for (std::size_t k = 0; k < d; ++k) ASSERT_LE(std::abs(x[k] - c[k]), g.delta() / 2.0 + 1e-15);
      ASSERT_EQ(g.flat_index(g.cube_id(flat)), flat);
    }
  }
}

TEST(AssignCube, CubeIdRoundTrip) {
  const GridLattice g(3, 0.2);
  for (std::size_t f = 0; f < g.cube_count(); ++f) {
    const CubeId id = g.cube_id(f);
    EXPECT_EQ(g.flat_index(id), f);
    const Point c = g.center(id);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(c[i], (2.0 * id.index[i] + 1.0) / 2.0 * 0.2);
  }
  EXPECT_THROW(g.flat_index(CubeId{{5, 0, 0}}), ContractError);
}

TEST(UnitBallVolume, KnownValues) {
  EXPECT_NEAR(unit_ball_volume(1), 2.0, 1e-14);
  EXPECT_NEAR(unit_ball_volume(2), M_PI, 1e-14);
  EXPECT_NEAR(unit_ball_volume(3), 4.0 * M_PI / 3.0, 1e-14);
  for (std::size_t d = 1; d <= 10; ++d) EXPECT_NEAR(unit_ball_volume(d), oracle::ball_volume(d), 1e-12);
  EXPECT_NEAR(ball_volume(2, 0.5), M_PI / 4.0, 1e-14);
}

namespace {
auto full_region = [](std::span<const double> p) { return in_unit_cube(p); };
auto empty_region = [](std::span<const double>) { return false; };
auto half_region = [](std::span<const double> p) { return in_unit_cube(p) && p[0] <= 0.5; };
}  // namespace

TEST(BallRegionFraction, FullRegionInterior) {
  const Point c{0.5, 0.5};
  EXPECT_NEAR(ball_region_fraction(c, 0.1, full_region), 1.0, 1e-3);
}

TEST(BallRegionFraction, HalfSpace) {
  const Point c{0.5, 0.5};
  EXPECT_NEAR(ball_region_fraction(c, 0.1, half_region), 0.5, 0.01);
}

TEST(BallRegionFraction, EmptyRegion) {
  const Point c{0.5, 0.5};
  EXPECT_EQ(ball_region_fraction(c, 0.1, empty_region), 0.0);
}

TEST(BallRegionFraction, CornerFractionIsTwoToMinusD) {
  for (std::size_t d : {1u, 2u, 3u}) {
    const Point c(d, 0.0);
    const double f = ball_region_fraction(c, 0.3, full_region, 32);
    const double want = std::pow(2.0, -static_cast<double>(d));
    EXPECT_NEAR(f, want, 0.01 * want) << "d=" << d;
  }
}

TEST(BallRegionFraction, RejectsLowResolution) {
  const Point c{0.5};
  EXPECT_THROW(ball_region_fraction(c, 0.1, full_region, 1), ParameterError);
  EXPECT_THROW(ball_region_fraction(c, 0.0, full_region, 8), ParameterError);
}

TEST(BallRegionFraction, QuadratureConvergesOnHalfDisk) {
  // Half-disk cut off-center so the answer is not hit exactly by symmetry:
  // the segment x_1 <= c + a of a unit-radius disk, a = 0.3.
  const double a = 0.3;
  const double exact = (M_PI / 2.0 + a * std::sqrt(1.0 - a * a) + std::asin(a)) / M_PI;
  const Point c{0.0, 0.0};
  auto region = [&](std::span<const double> p) { return p[0] <= a; };
  std::vector<double> err;
  for (std::size_t res : {8u, 16u, 32u, 64u}) err.push_back(std::abs(ball_region_fraction(c, 1.0, region, res) - exact));
  EXPECT_LE(err[2], 0.01);
  EXPECT_LE(err[3], err[0] + 1e-12);
  EXPECT_LE(err[3], 0.01);
}

TEST(BallRegionFraction, ScaleInvariantOnCubeRegions) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Point c{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    const double r = rng.uniform(0.05, 0.2);
    const double side = rng.uniform(0.1, 0.5);
    auto box = [&](double s) {
      return [=](std::span<const double> p) {
        return p[0] >= 0.3 * s && p[0] <= (0.3 + side) * s && p[1] >= 0.2 * s && p[1] <= (0.2 + side) * s;
      };
    };
    const double s = rng.uniform(0.3, 3.0);
    const Point cs{c[0] * s, c[1] * s};
    EXPECT_NEAR(ball_region_fraction(c, r, box(1.0)), ball_region_fraction(cs, r * s, box(s)), 1e-9);
  }
}

TEST(IsWeaklyRegular, Examples) {
  const Point interior{0.5, 0.5};
  EXPECT_TRUE(is_weakly_regular(interior, 0.1, 1.0, full_region));
  EXPECT_FALSE(is_weakly_regular(interior, 0.1, 0.01, empty_region));
  // Boundary point of a half-space keeps half of its ball, well above 1/12.
  EXPECT_TRUE(is_weakly_regular(interior, 0.2, 1.0 / 12.0, half_region));
  EXPECT_THROW(is_weakly_regular(interior, 0.1, 0.0, full_region), ParameterError);
  EXPECT_THROW(is_weakly_regular(interior, 0.1, 1.5, full_region), ParameterError);
}

TEST(CubeUnionRegion, MembershipFollowsCubesAndSupport) {
  const GridLattice g(2, 0.5);
  std::vector<std::uint8_t> member{1, 0, 0, 1};
  const SupportPredicate none;
  const CubeUnionRegion all(g, member, none);
  EXPECT_TRUE(all(Point{0.1, 0.1}));
  EXPECT_FALSE(all(Point{0.1, 0.9}));
  EXPECT_TRUE(all(Point{0.9, 0.9}));
  EXPECT_FALSE(all(Point{1.2, 0.9}));
  const SupportPredicate lower = [](std::span<const double> p) { return p[0] + p[1] <= 1.0; };
  const CubeUnionRegion cut(g, member, lower);
  EXPECT_TRUE(cut(Point{0.1, 0.1}));
  EXPECT_FALSE(cut(Point{0.9, 0.9}));
}

TEST(SupportCubes, DiskSupport) {
  const GridLattice g(2, 0.25);
  const SupportPredicate disk = [](std::span<const double> p) {
    return (p[0] - 0.5) * (p[0] - 0.5) + (p[1] - 0.5) * (p[1] - 0.5) <= 0.2 * 0.2;
  };
  const auto s = support_cubes(g, disk);
  std::size_t count = 0;
  for (auto v : s) count += v;
  // The disk of radius 0.2 at the center touches exactly the four central cubes.
  EXPECT_EQ(count, 4u);
  EXPECT_TRUE(s[g.locate(Point{0.4, 0.4})]);
  EXPECT_FALSE(s[g.locate(Point{0.1, 0.1})]);
  const auto all = support_cubes(g, SupportPredicate{});
  for (auto v : all) EXPECT_EQ(v, 1);
}
