#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "msdc/model.h"
#include "msdc/pade.h"

using namespace msdc;
using cd = std::complex<double>;

TEST(Pade, FirstOrderCoefficients) {
  const auto p = pade(0.5, 1);
  ASSERT_EQ(p.order(), 1);
  EXPECT_DOUBLE_EQ(p.den[0], 4.0);
  EXPECT_DOUBLE_EQ(p.den[1], 1.0);
  EXPECT_DOUBLE_EQ(p.num[0], 4.0);
  EXPECT_DOUBLE_EQ(p.num[1], -1.0);
}

TEST(Pade, ThirdOrderMatchesClosedForm) {
  // (1 - x/2 + x^2/10 - x^3/120) / (1 + x/2 + x^2/10 + x^3/120), x = s tau.
  const double tau = 0.3;
  const auto p = pade(tau, 3);
  for (double w : {0.1, 1.0, 7.0, 30.0}) {
    const cd x(0.0, w * tau);
    const cd ref = (1.0 - x / 2.0 + x * x / 10.0 - x * x * x / 120.0) /
                   (1.0 + x / 2.0 + x * x / 10.0 + x * x * x / 120.0);
    EXPECT_NEAR(std::abs(p(cd(0.0, w)) - ref), 0.0, 1e-13);
  }
}

TEST(Pade, ZeroDelayIsIdentity) {
  const auto p = pade(0.0, 3);
  EXPECT_EQ(p.order(), 0);
  EXPECT_EQ(p(cd(0.3, 2.0)), cd(1.0));
  const auto r = realize(p);
  EXPECT_EQ(r.states(), 0);
  EXPECT_EQ(r.d, 1.0);
}

TEST(Pade, AllPassOnImaginaryAxis) {
  for (int order = 1; order <= 6; ++order) {
    const auto p = pade(0.45, order);
    for (double w = 0.01; w < 200.0; w *= 1.7) {
      EXPECT_NEAR(std::abs(p(cd(0.0, w))), 1.0, 1e-12);
    }
  }
}

TEST(Pade, AccuracyImprovesWithOrder) {
  const double tau = 0.4;
  double prev = 1.0;
  for (int order = 1; order <= 5; ++order) {
    const auto p = pade(tau, order);
    const double err = std::abs(p(cd(0.0, 2.0)) - std::exp(cd(0.0, -2.0 * tau)));
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-8);
}

TEST(Pade, RealizationReproducesTransferFunction) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int order = 1; order <= 5; ++order) {
    for (double tau : {0.05, 0.3, 1.2}) {
      const auto p = pade(tau, order);
      const auto r = realize(p);
      ASSERT_EQ(r.states(), order);
      for (int trial = 0; trial < 5; ++trial) {
        const cd s(u(rng), u(rng) * 5.0);
        const Eigen::MatrixXcd m =
            s * Eigen::MatrixXcd::Identity(order, order) - r.a.cast<cd>();
        const cd h = (r.c.cast<cd>() * m.partialPivLu().solve(r.b.cast<cd>()))(0) + r.d;
        EXPECT_NEAR(std::abs(h - p(s)), 0.0, 1e-9 * std::max(1.0, std::abs(p(s))));
      }
    }
  }
}

TEST(Pade, RejectsInvalidArguments) {
  EXPECT_THROW(pade(0.1, 0), InvalidArgument);
  EXPECT_THROW(pade(-0.1, 3), InvalidArgument);
}
