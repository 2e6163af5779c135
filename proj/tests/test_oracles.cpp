#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hardylab/oracles.hpp"

using namespace hardylab;

TEST(Oracles, FrozenCondenserValues) {
  EXPECT_NEAR(radial_condenser_capacity(2, 2, 0.25, 1), 4.532360141827194, 1e-12);
  EXPECT_NEAR(radial_condenser_capacity(2, 3, 0.5, 1), 12.566370614359172, 1e-12);
  EXPECT_NEAR(radial_condenser_capacity(3, 2, 0.5, 1), 18.310543837086115, 1e-11);
  EXPECT_NEAR(radial_condenser_capacity(1.5, 3, 0.5, 1), 8.22662065016709, 1e-11);
}

TEST(Oracles, CondenserAgreesWithBruteForce) {
  for (double p : {1.5, 2.0, 3.0, 4.0})
    for (int N : {1, 2, 3, 4})
      for (double r : {0.1, 0.5}) {
        const double exact = radial_condenser_capacity(p, N, r, 1.0);
        const double brute = radial_condenser_brute_force(p, N, r, 1.0);
        EXPECT_NEAR(brute / exact, 1.0, 1e-8) << "p=" << p << " N=" << N << " r=" << r;
      }
}

TEST(Oracles, CondenserMonotonicity) {
  for (double p : {1.5, 2.0, 3.0})
    for (int N : {2, 3}) {
      double prev = INFINITY;
      for (double R : {1.0, 2.0, 4.0, 8.0, 64.0}) {
        const double v = radial_condenser_capacity(p, N, 0.5, R);
        EXPECT_LT(v, prev);
        prev = v;
      }
      prev = 0.0;
      for (double r : {0.01, 0.1, 0.3, 0.6, 0.9}) {
        const double v = radial_condenser_capacity(p, N, r, 1.0);
        EXPECT_GT(v, prev);
        prev = v;
      }
    }
}

TEST(Oracles, ContinuityAcrossPEqualsN) {
  for (int N : {2, 3}) {
    const double at = radial_condenser_capacity(N, N, 0.25, 1.0);
    for (double d : {-1e-4, 1e-4}) {
      const double near = radial_condenser_capacity(N + d, N, 0.25, 1.0);
      EXPECT_LE(std::abs(near - at), 1e-3 * at) << "N=" << N << " d=" << d;
    }
  }
}

TEST(Oracles, HardyConstants) {
  EXPECT_DOUBLE_EQ(hardy_1d_constant(2), 0.25);
  EXPECT_NEAR(hardy_1d_constant(3), 8.0 / 27.0, 1e-15);
  EXPECT_DOUBLE_EQ(hardy_radial_constant(2, 3), 0.25);
  EXPECT_NEAR(hardy_radial_constant(3, 2), 1.0 / 27.0, 1e-15);
  EXPECT_THROW(hardy_radial_constant(2, 2), DomainError);
}

TEST(Oracles, HardyConstantsAgreeWithBruteForceQuotient) {
  for (double p : {1.5, 2.0, 3.0}) {
    const double q = hardy_quotient_brute_force(p, 1);
    EXPECT_GE(q, hardy_1d_constant(p) * (1.0 - 1e-9));
    EXPECT_NEAR(q / hardy_1d_constant(p), 1.0, 1e-3) << "p=" << p;
  }
  for (auto [p, N] : {std::pair{2.0, 3.0}, std::pair{3.0, 2.0}, std::pair{1.5, 4.0}}) {
    const double q = hardy_quotient_brute_force(p, N);
    EXPECT_NEAR(q / hardy_radial_constant(p, N), 1.0, 1e-3) << "p=" << p << " N=" << N;
  }
}

TEST(Oracles, Dispatcher) {
  const OracleValue v = evaluate_oracle("radial_condenser_capacity", {{"p", 2}, {"N", 3}, {"r", 0.5}, {"R", 1}});
  EXPECT_NEAR(v.value, 4.0 * std::numbers::pi, 1e-12);
  EXPECT_FALSE(v.formula_note.empty());
  EXPECT_EQ(v.parameters.size(), 4u);
  EXPECT_DOUBLE_EQ(evaluate_oracle("hardy_1d_constant", {{"p", 2}}).value, 0.25);
  EXPECT_THROW(evaluate_oracle("nope", {}), ConfigError);
  EXPECT_THROW(evaluate_oracle("hardy_1d_constant", {}), ConfigError);
  EXPECT_THROW(evaluate_oracle("radial_condenser_capacity", {{"p", 2}, {"N", 3}, {"r", 1}, {"R", 0.5}}), DomainError);
  EXPECT_THROW(evaluate_oracle("hardy_1d_constant", {{"p", 1}}), DomainError);
  EXPECT_THROW(evaluate_oracle("hardy_radial_constant", {{"p", 2}, {"N", 2.5}}), DomainError);
}
