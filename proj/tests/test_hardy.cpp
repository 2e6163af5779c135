#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "hardylab/family.hpp"
#include "hardylab/hardy.hpp"
#include "hardylab/oracles.hpp"

using namespace hardylab;

namespace {

GeometryPtr interval(int n) {
  GeometrySpec s;
  s.resolution = n;
  return build_geometry(s);
}

GeometryPtr box(int n) {
  GeometrySpec s;
  s.kind = GeometryKind::box2d;
  s.lo = s.lo_y = -1.0;
  s.resolution = n;
  return build_geometry(s);
}

Problem hardy_1d(int n, double p) {
  const auto geo = interval(n);
  Problem pr = Problem::make(geo, p);
  pr.g = sample_cells(geo, [p](const Point& q) { return std::pow(q.x, -p); });
  return pr;
}

/// Smallest generalized eigenvalue of the p = 2 interval discretization,
/// assembled here from the two-node cell formulas.
double dense_hardy_eigenvalue(const Problem& pr) {
  const Geometry& geo = *pr.geometry;
  const int m = static_cast<int>(geo.num_nodes()) - 2;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m), M = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t c = 0; c < geo.num_cells(); ++c) {
    const double h = geo.cell_measure(c);
    const int a = static_cast<int>(c) - 1, b = static_cast<int>(c);
    const int idx[2] = {a, b};
    const double dk[2] = {-1.0 / h, 1.0 / h};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        if (idx[i] < 0 || idx[i] >= m || idx[j] < 0 || idx[j] >= m) continue;
        K(idx[i], idx[j]) += h * dk[i] * dk[j];
        M(idx[i], idx[j]) += h * pr.g[c] * 0.25;
      }
  }
  // The midpoint mass matrix is nearly singular, so factor K instead.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(M, K);
  return 1.0 / es.eigenvalues().maxCoeff();
}

std::vector<SubsetMask> ball_family(const GeometryPtr& geo, const std::vector<Point>& centers,
                                    const std::vector<double>& radii) {
  return set_family(geo, BallFamily{centers, radii});
}

}  // namespace

TEST(Hardy, BestConstantMatchesDenseEigenvalue) {
  for (int n : {64, 256}) {
    const Problem pr = hardy_1d(n, 2.0);
    const VariationalResult r = best_constant(pr);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value / dense_hardy_eigenvalue(pr), 1.0, 1e-8) << "n=" << n;
  }
}

TEST(Hardy, BestConstantIsTheQuotientOfItsMinimizer) {
  for (double p : {1.5, 2.0, 3.0}) {
    const Problem pr = hardy_1d(128, p);
    const VariationalResult r = best_constant(pr);
    const double q = energy_Q(pr, r.minimizer) / weight_integral(pr, r.minimizer);
    EXPECT_NEAR(q, r.value, 1e-12 * r.value) << "p=" << p;
    EXPECT_GE(r.value, hardy_1d_constant(p) * 0.95) << "p=" << p;
    for (double v : r.minimizer.values) EXPECT_GE(v, 0.0);
  }
}

TEST(Hardy, UnreachableConstraint) {
  const auto geo = interval(16);
  Problem pr = Problem::make(geo, 2.0);
  EXPECT_THROW(best_constant(pr), DomainError);
  const SubsetMask far = ball_mask(geo, {0.5, 0.0}, 0.2);
  pr.g = sample_cells(geo, [](const Point& q) { return q.x < 0.1 ? 1.0 : 0.0; });
  EXPECT_THROW(best_constant_on(pr, &far), DomainError);
}

TEST(Hardy, MassBelowCapacityOverBestConstant) {
  const auto geo = box(16);
  Problem pr = Problem::make(geo, 2.0);
  pr.g = sample_cells(geo, [](const Point& q) { return std::pow(std::max(0.0, 1.0 - 4.0 * (q.x * q.x + q.y * q.y)), 2); });
  const ScalarField u(geo, 1.0);
  const double S = best_constant(pr).value;
  for (const SubsetMask& F : ball_family(geo, {{0.0, 0.0}, {0.25, 0.1}}, {0.15, 0.3, 0.5})) {
    const VariationalResult cap = capacity(pr, u, F);
    const double mass = weight_mass(pr, u, F);
    const double G = weight_integral(pr, cap.minimizer);
    EXPECT_LE(mass, G * (1.0 + 1e-12)) << F.descriptor;
    EXPECT_LE(G, cap.value / S * (1.0 + 1e-6)) << F.descriptor;
  }
}

TEST(Hardy, SandwichOnOneDimensionalHardyWeight) {
  const Problem pr = hardy_1d(512, 2.0);
  const auto geo = pr.geometry;
  const HardyReport rep = sandwich_check(pr, ScalarField(geo, 1.0), ball_family(geo, {{0.5, 0.0}}, {0.1, 0.3, 0.45}));
  EXPECT_TRUE(rep.converged);
  EXPECT_TRUE(rep.sandwich_holds);
  EXPECT_GE(rep.sandwich_ratio, 1.0 - 1e-3);
  EXPECT_LE(rep.mazya_norm, rep.best_constant_B * (1.0 + 1e-3));
  EXPECT_GT(rep.per_set_table.size(), 3u);
  EXPECT_FALSE(rep.argmax_set.empty());
}

TEST(Hardy, ZeroWeightSandwich) {
  const auto geo = interval(32);
  const Problem pr = Problem::make(geo, 2.0);
  const HardyReport rep = sandwich_check(pr, ScalarField(geo, 1.0), ball_family(geo, {{0.5, 0.0}}, {0.2}));
  EXPECT_EQ(rep.mazya_norm, 0.0);
  EXPECT_TRUE(rep.sandwich_holds);
}

TEST(Hardy, MazyaNormMonotoneInFamily) {
  const Problem pr = hardy_1d(128, 2.0);
  const auto geo = pr.geometry;
  const ScalarField u(geo, 1.0);
  auto fam = ball_family(geo, {{0.5, 0.0}}, {0.1, 0.2});
  const double small = mazya_norm(pr, u, fam).mazya_norm;
  for (const SubsetMask& m : ball_family(geo, {{0.2, 0.0}, {0.7, 0.0}}, {0.05, 0.15})) fam.push_back(m);
  EXPECT_GE(mazya_norm(pr, u, fam).mazya_norm, small);
}

TEST(Hardy, MazyaNormAxioms) {
  const auto geo = interval(128);
  const ScalarField u(geo, 1.0);
  const auto fam = ball_family(geo, {{0.3, 0.0}, {0.6, 0.0}}, {0.05, 0.1, 0.25});
  Problem p1 = Problem::make(geo, 2.0), p2 = p1, p12 = p1, pc = p1;
  p1.g = sample_cells(geo, [](const Point& q) { return q.x < 0.5 ? 3.0 : 0.0; });
  p2.g = sample_cells(geo, [](const Point& q) { return std::sin(9.0 * q.x); });
  p12.g = CellField(geo);
  pc.g = CellField(geo);
  for (std::size_t c = 0; c < p12.g.size(); ++c) {
    p12.g[c] = p1.g[c] + p2.g[c];
    pc.g[c] = -2.5 * p2.g[c];
  }
  const double n1 = mazya_norm(p1, u, fam).mazya_norm;
  const double n2 = mazya_norm(p2, u, fam).mazya_norm;
  EXPECT_LE(mazya_norm(p12, u, fam).mazya_norm, (n1 + n2) * (1.0 + 1e-10));
  EXPECT_NEAR(mazya_norm(pc, u, fam).mazya_norm, 2.5 * n2, 1e-10 * n2);
}

TEST(Hardy, KpCheck) {
  const auto geo = interval(1024);
  const ScalarField u(geo, 1.0);
  const SubsetMask K1 = box_mask(geo, 0.4, 0.6);
  const auto ex = exhaustion(geo, 6);
  Problem bounded = Problem::make(geo, 2.0);
  bounded.g = CellField(geo, 1.0);
  const KpReport a = kp_necessary_check(bounded, u, K1, ex);
  EXPECT_EQ(a.verdict, "bounded");
  EXPECT_EQ(a.partial_integrals.size(), 6u);
  EXPECT_TRUE(std::is_sorted(a.partial_integrals.begin(), a.partial_integrals.end()));
  Problem singular = Problem::make(geo, 2.0);
  singular.g = sample_cells(geo, [](const Point& q) { return 1.0 / (q.x * q.x); });
  const KpReport b = kp_necessary_check(singular, u, K1, ex);
  EXPECT_EQ(b.verdict, "diverging");
}

TEST(Hardy, EmbeddingForConstantU) {
  const auto geo = box(8);
  const ScalarField u(geo, 2.0);
  const auto sets = ball_family(geo, {{0.0, 0.0}}, {0.5, 0.8});
  const EmbeddingReport rep = weighted_embedding_check(u, 1.0, INFINITY, 2.0, 1.5, sets);
  const double expo = 0.5 - 1.0 / 1.5;
  EXPECT_NEAR(rep.exponent, expo, 1e-15);
  ASSERT_EQ(rep.values.size(), 2u);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    double area = 0.0;
    for (std::size_t c = 0; c < geo->num_cells(); ++c)
      if (sets[k].contains_cell(c)) area += geo->cell_measure(c);
    EXPECT_NEAR(rep.values[k], std::pow(area, expo), 1e-12);
  }
  EXPECT_THROW(weighted_embedding_check(u, 3.0, 2.0, 2.0, 1.5, sets), ConfigError);
  EXPECT_THROW(weighted_embedding_check(u, 1.0, 2.0, 1.0, 1.5, sets), ConfigError);
}

TEST(Hardy, LebesgueEmbeddingSharesOneConstant) {
  const auto geo = box(16);
  const double p = 1.5;
  const ScalarField u(geo, 1.0);
  const auto fam = ball_family(geo, {{0.0, 0.0}, {0.3, -0.2}, {-0.4, 0.3}}, {0.15, 0.3, 0.5});
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> ratios;
  for (int trial = 0; trial < 5; ++trial) {
    Problem pr = Problem::make(geo, p);
    const Point c{d(rng) - 0.5, d(rng) - 0.5};
    const double rad = 0.3 + 0.4 * d(rng), amp = 1.0 + 9.0 * d(rng);
    pr.g = sample_cells(geo, [&](const Point& q) {
      return std::hypot(q.x - c.x, q.y - c.y) < rad ? amp * (0.5 + d(rng)) : 0.0;
    });
    const double norm = lebesgue_norm(pr.g, 2.0 / p);
    ratios.push_back(mazya_norm(pr, u, fam).mazya_norm / norm);
  }
  const double C = *std::max_element(ratios.begin(), ratios.end());
  for (double r : ratios) {
    EXPECT_GT(r, 0.0);
    EXPECT_LE(r, C);
  }
  EXPECT_LT(C / *std::min_element(ratios.begin(), ratios.end()), 10.0);
}
