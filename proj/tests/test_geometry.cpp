#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hardylab/family.hpp"
#include "hardylab/field.hpp"
#include "hardylab/geometry.hpp"

using namespace hardylab;

namespace {

GeometryPtr interval(int n, double lo = 0.0, double hi = 1.0) {
  GeometrySpec s;
  s.kind = GeometryKind::interval;
  s.lo = lo;
  s.hi = hi;
  s.resolution = n;
  return build_geometry(s);
}

GeometryPtr radial(int n, int dim, double lo, double hi) {
  GeometrySpec s;
  s.kind = GeometryKind::radial;
  s.dim = dim;
  s.lo = lo;
  s.hi = hi;
  s.resolution = n;
  return build_geometry(s);
}

GeometryPtr box(int nx, int ny) {
  GeometrySpec s;
  s.kind = GeometryKind::box2d;
  s.lo = -1.0;
  s.hi = 1.0;
  s.lo_y = 0.0;
  s.hi_y = 2.0;
  s.resolution = nx;
  s.resolution_y = ny;
  return build_geometry(s);
}

}  // namespace

TEST(Geometry, IntervalCounts) {
  const auto g = interval(10);
  EXPECT_EQ(g->num_nodes(), 11u);
  EXPECT_EQ(g->num_cells(), 10u);
  EXPECT_FALSE(g->is_interior(0));
  EXPECT_FALSE(g->is_interior(10));
  EXPECT_TRUE(g->is_interior(5));
  EXPECT_DOUBLE_EQ(g->node(10).x, 1.0);
  EXPECT_NEAR(g->total_measure(), 1.0, 1e-15);
}

TEST(Geometry, UnitSphereArea) {
  EXPECT_NEAR(unit_sphere_area(1), 2.0, 1e-15);
  EXPECT_NEAR(unit_sphere_area(2), 2.0 * std::numbers::pi, 1e-14);
  EXPECT_NEAR(unit_sphere_area(3), 4.0 * std::numbers::pi, 1e-14);
  EXPECT_NEAR(unit_sphere_area(4), 2.0 * std::numbers::pi * std::numbers::pi, 1e-13);
  EXPECT_THROW(unit_sphere_area(0), DomainError);
}

TEST(Geometry, RadialOriginIsFreeUnlessExcluded) {
  const auto g = radial(8, 3, 0.0, 1.0);
  EXPECT_TRUE(g->is_interior(0));
  EXPECT_FALSE(g->is_interior(8));
  const auto shell = radial(8, 3, 0.5, 1.0);
  EXPECT_FALSE(shell->is_interior(0));
}

TEST(Geometry, RadialMeasureIsExactForTheDisc) {
  // Midpoint rule integrates r exactly.
  const auto g = radial(7, 2, 0.0, 1.0);
  EXPECT_NEAR(g->total_measure(), std::numbers::pi, 1e-14);
  EXPECT_NEAR(g->exact_measure(), std::numbers::pi, 1e-14);
}

TEST(Geometry, RadialMeasureConvergesIn3D) {
  const auto g = radial(1024, 3, 0.0, 1.0);
  EXPECT_NEAR(g->total_measure() / g->exact_measure(), 1.0, 1e-6);
}

TEST(Geometry, BoxLayout) {
  const auto g = box(4, 6);
  EXPECT_EQ(g->num_nodes(), 5u * 7u);
  EXPECT_EQ(g->num_cells(), 24u);
  EXPECT_DOUBLE_EQ(g->hx(), 0.5);
  EXPECT_NEAR(g->hy(), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(g->total_measure(), 4.0, 1e-14);
  std::size_t interior = 0;
  for (std::size_t i = 0; i < g->num_nodes(); ++i) interior += g->is_interior(i);
  EXPECT_EQ(interior, 3u * 5u);
  const CellNodes cn = g->cell_nodes(0);
  EXPECT_EQ(cn.count, 4);
  const Point m = g->cell_midpoint(0);
  EXPECT_NEAR(m.x, -0.75, 1e-15);
  EXPECT_NEAR(m.y, 1.0 / 6.0, 1e-15);
}

TEST(Geometry, RejectsDegenerateSpecs) {
  GeometrySpec s;
  s.resolution = 1;
  EXPECT_THROW(build_geometry(s), ConfigError);
  s.resolution = 4;
  s.hi = s.lo;
  EXPECT_THROW(build_geometry(s), ConfigError);
  GeometrySpec r;
  r.kind = GeometryKind::radial;
  r.dim = 3;
  r.lo = -1.0;
  EXPECT_THROW(build_geometry(r), ConfigError);
}

TEST(Field, SizeMismatchIsUsageError) {
  const auto g = interval(4);
  EXPECT_THROW(ScalarField(g, std::vector<double>(3)), UsageError);
  EXPECT_THROW(CellField(g, std::vector<double>(5)), UsageError);
}

TEST(Field, SamplesCellsAtMidpoints) {
  const auto g = interval(4);
  const CellField f = sample_cells(g, [](const Point& p) { return 1.0 / (p.x * p.x); });
  EXPECT_TRUE(std::isfinite(f[0]));
  EXPECT_DOUBLE_EQ(f[0], 64.0);
}

TEST(Field, CoefficientMustBePositiveDefinite) {
  const auto g = box(2, 2);
  std::vector<CellMatrix> m(g->num_cells(), CellMatrix{1.0, 2.0, 1.0});
  EXPECT_THROW(CoefficientA(g, m), DomainError);
  std::vector<CellMatrix> ok(g->num_cells(), CellMatrix{2.0, 0.5, 1.0});
  const CoefficientA A(g, ok);
  EXPECT_FALSE(A.is_identity());
  EXPECT_GT(A.theta(0), 1.0);
}

TEST(Problem, ValidateChecksU) {
  const auto g = interval(8);
  Problem pr = Problem::make(g, 2.0);
  pr.u = ScalarField(g, 1.0);
  EXPECT_NO_THROW(pr.validate());
  (*pr.u)[3] = 0.0;
  EXPECT_THROW(pr.validate(), DomainError);
  Problem bad = Problem::make(g, 1.0);
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Masks, BallIsInteriorAndDescribed) {
  const auto g = interval(100);
  const SubsetMask m = ball_mask(g, {0.5, 0.0}, 0.1);
  EXPECT_EQ(m.count(), 21u);
  EXPECT_TRUE(m.inside_interior());
  EXPECT_EQ(m.descriptor, "ball(0.5,0.1)");
}

TEST(Masks, ExhaustionIsNested) {
  for (const auto& g : {interval(256), radial(256, 3, 0.0, 1.0), radial(256, 2, 0.5, 1.0), box(32, 32)}) {
    const auto ex = exhaustion(g, 4);
    ASSERT_EQ(ex.size(), 4u);
    for (std::size_t k = 1; k < ex.size(); ++k) {
      EXPECT_TRUE(ex[k - 1].subset_of(ex[k]));
      EXPECT_GT(ex[k].count(), ex[k - 1].count());
    }
    EXPECT_TRUE(ex.back().inside_interior());
  }
}

TEST(Masks, ExhaustionTooCoarse) { EXPECT_THROW(exhaustion(interval(4), 6), ConfigError); }

TEST(Masks, LevelSetsShrinkWithQuantile) {
  const auto g = interval(64);
  const ScalarField f = sample_nodes(g, [](const Point& p) { return std::sin(std::numbers::pi * p.x); });
  const SubsetMask a = level_mask(f, 0.2), b = level_mask(f, 0.7);
  EXPECT_TRUE(b.subset_of(a));
  EXPECT_LT(b.count(), a.count());
  EXPECT_THROW(level_mask(f, 1.0), ConfigError);
}

TEST(Masks, SetFamilyDropsDuplicatesAndEmptySets) {
  const auto g = interval(16);
  const auto fam = set_family(g, BallFamily{{{0.5, 0.0}, {0.53, 0.0}}, {0.01, 0.2, 0.2}});
  EXPECT_EQ(fam.size(), 3u);
  EXPECT_THROW(set_family(g, BallFamily{{{0.53, 0.0}}, {0.01}}), ConfigError);
}
