#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "msdc/identifier.h"
#include "msdc/simulator.h"

using namespace msdc;

namespace {

FleetScenario ident_fleet(double tau) {
  FleetScenario f;
  f.vehicles.assign(3, VehicleParams{});
  const double ks[] = {1.0, 0.8, 1.2};
  const double cs[] = {1.5, 1.2, 1.8};
  for (std::size_t i = 0; i < 3; ++i) {
    auto& p = f.vehicles[i];
    p.m = 1.0;
    p.alpha = 0.1;
    p.beta = 2.5;
    p.k = ks[i];
    p.c = cs[i];
    p.tau = tau;
  }
  f.ghost = WhiteNoiseGhost{20.0, 0.5, 7};
  f.dt = 0.1;
  f.duration = 60.0;
  return f;
}

Eigen::VectorXd true_theta(const FleetScenario& f) {
  Eigen::VectorXd t(2 * static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    t(2 * static_cast<Eigen::Index>(i)) = f.vehicles[i].k;
    t(2 * static_cast<Eigen::Index>(i) + 1) = f.vehicles[i].c;
  }
  return t;
}

std::vector<RegressorSample> random_samples(std::mt19937_64& rng, std::size_t n,
                                            std::size_t count) {
  std::normal_distribution<double> g;
  std::vector<RegressorSample> out(count);
  const auto rows = static_cast<Eigen::Index>(n);
  for (auto& s : out) {
    s.phi = Eigen::MatrixXd::NullaryExpr(rows, 2 * rows, [&] { return g(rng); });
    s.z = Eigen::VectorXd::NullaryExpr(rows, [&] { return g(rng); });
  }
  return out;
}

double rel_dev(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / b.lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST(Regressor, EquilibriumGivesZeroRegressor) {
  auto f = ident_fleet(0.0);
  f.ghost = ConstantGhost{20.0};
  f.duration = 10.0;
  IdentHyperParams hp;
  hp.d = 1;
  const auto stream = build_regressor(simulate(f), hp);
  ASSERT_FALSE(stream.samples.empty());
  for (const auto& s : stream.samples) {
    EXPECT_EQ(s.phi.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.z.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Regressor, SimulatedDataSatisfiesLinearModelExactly) {
  // The Euler step uses the state d_sim steps before the previous sample, so
  // the regressor lag is d_sim + 1.
  for (double tau : {0.0, 0.2, 0.4}) {
    const auto f = ident_fleet(tau);
    IdentHyperParams hp;
    hp.d = delay_steps(tau, f.dt) + 1;
    const auto stream = build_regressor(simulate(f), hp);
    EXPECT_EQ(stream.skipped, hp.d);
    const Eigen::VectorXd theta = true_theta(f);
    for (const auto& s : stream.samples) {
      EXPECT_LT((s.phi * theta - s.z).lpNorm<Eigen::Infinity>(), 1e-9) << "tau " << tau;
    }
  }
}

TEST(Regressor, ZeroAlphaHasNoRearColumns) {
  auto f = ident_fleet(0.0);
  for (auto& p : f.vehicles) p.alpha = 0.0;
  IdentHyperParams hp;
  hp.alpha = 0.0;
  hp.d = 1;
  const auto stream = build_regressor(simulate(f), hp);
  for (const auto& s : stream.samples) {
    for (Eigen::Index r = 0; r < 3; ++r) {
      for (Eigen::Index c = 0; c < 6; ++c) {
        if (c != 2 * r && c != 2 * r + 1) EXPECT_EQ(s.phi(r, c), 0.0);
      }
    }
  }
}

TEST(Regressor, NonFiniteSamplesAreSkipped) {
  auto f = ident_fleet(0.0);
  f.duration = 5.0;
  auto t = simulate(f);
  t.speed[1][20] = std::numeric_limits<double>::quiet_NaN();
  IdentHyperParams hp;
  hp.d = 1;
  const auto clean = build_regressor(simulate(f), hp);
  const auto dirty = build_regressor(t, hp);
  // Sample 20 breaks the accel at 20 and 21 and the lagged inputs at 21.
  EXPECT_EQ(dirty.samples.size() + 2, clean.samples.size());
  for (const auto& s : dirty.samples) {
    EXPECT_TRUE(s.phi.allFinite());
    EXPECT_TRUE(s.z.allFinite());
  }
}

TEST(SrlsIqr, ZeroRegressorLeavesThetaUnchanged) {
  auto st = EstimatorState::initial(4, 100.0);
  st.theta << 1, 2, 3, 4;
  const Eigen::VectorXd before = st.theta;
  const Eigen::MatrixXd s_before = st.S;
  const double e = srls_iqr_step(st, Eigen::VectorXd::Zero(4), 5.0, 0.9);
  EXPECT_EQ(e, 5.0);
  EXPECT_EQ(st.theta, before);
  EXPECT_TRUE(st.S.isApprox(s_before / std::sqrt(0.9), 1e-15));
}

TEST(SrlsIqr, ScalarClosedForm) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const double lambda = 0.93, delta = 10.0;
  auto st = EstimatorState::initial(1, delta);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double x = g(rng), y = 2.0 * x + 0.1 * g(rng);
    srls_iqr_step(st, Eigen::VectorXd::Constant(1, x), y, lambda);
    num = lambda * num + x * y;
    den = lambda * den + x * x;
  }
  const double reg = std::pow(lambda, 50) / (delta * delta);
  EXPECT_NEAR(st.theta(0), num / (den + reg), 1e-12);
}

TEST(SrlsIqr, MatchesBatchOracle) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 6.0);
    const std::size_t count = 1 + static_cast<std::size_t>(u(rng) * 200.0);
    const double lambda = 0.9 + 0.1 * u(rng);
    const auto samples = random_samples(rng, n, count);
    auto st = EstimatorState::initial(2 * n, 100.0);
    for (const auto& s : samples) srls_iqr_epoch(st, s, lambda);
    const auto ref = batch_wls_oracle(samples, 2 * n, lambda, 100.0);
    EXPECT_LE(rel_dev(st.theta, ref.theta), 1e-6) << "n=" << n << " K=" << count;
  }
}

TEST(SrlsIqr, NoSamplesGivesZeroTheta) {
  const auto ref = batch_wls_oracle({}, 4, 0.95, 100.0);
  EXPECT_EQ(ref.theta, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(EstimatorState::initial(4, 100.0).theta, Eigen::VectorXd::Zero(4));
}

TEST(SrlsIqr, RowOrderWithinSampleDoesNotMatter) {
  std::mt19937_64 rng(13);
  const auto samples = random_samples(rng, 4, 60);
  auto permuted = samples;
  const Eigen::Vector4i order(2, 0, 3, 1);
  for (auto& s : permuted) {
    const Eigen::PermutationMatrix<4> p(order);
    s.phi = p * s.phi;
    s.z = p * s.z;
  }
  auto a = EstimatorState::initial(8, 100.0);
  auto b = a;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    srls_iqr_epoch(a, samples[k], 0.95);
    srls_iqr_epoch(b, permuted[k], 0.95);
  }
  EXPECT_LT(rel_dev(b.theta, a.theta), 1e-9);
}

TEST(SrlsIqr, FactorStaysLowerTriangularWithPositiveDiagonal) {
  std::mt19937_64 rng(14);
  const auto samples = random_samples(rng, 3, 200);
  auto st = EstimatorState::initial(6, 100.0);
  for (const auto& s : samples) {
    srls_iqr_epoch(st, s, 0.97);
    for (Eigen::Index i = 0; i < 6; ++i) {
      EXPECT_GT(st.S(i, i), 0.0);
      for (Eigen::Index j = i + 1; j < 6; ++j) EXPECT_EQ(st.S(i, j), 0.0);
    }
  }
}

TEST(SrlsIqr, LongRunStaysFinite) {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g;
  auto st = EstimatorState::initial(6, 100.0);
  Eigen::VectorXd x(6);
  for (int k = 0; k < 100000; ++k) {
    for (Eigen::Index j = 0; j < 6; ++j) x(j) = g(rng);
    srls_iqr_step(st, x, g(rng), 0.95);
  }
  EXPECT_TRUE(st.theta.allFinite());
  EXPECT_TRUE(st.S.allFinite());
  EXPECT_EQ(st.steps, 100000u);
}

TEST(SrlsIqr, ExactRecoveryWithoutForgetting) {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> g;
  Eigen::VectorXd truth(4);
  truth << 1.5, -0.5, 2.0, 0.25;
  auto st = EstimatorState::initial(4, 1e6);
  Eigen::VectorXd x(4);
  for (int k = 0; k < 400; ++k) {
    for (Eigen::Index j = 0; j < 4; ++j) x(j) = g(rng);
    srls_iqr_step(st, x, x.dot(truth), 1.0);
  }
  EXPECT_LT(rel_dev(st.theta, truth), 1e-9);
}

TEST(SrlsIqr, RejectsBadInput) {
  auto st = EstimatorState::initial(2, 100.0);
  EXPECT_THROW(srls_iqr_step(st, Eigen::VectorXd::Zero(3), 1.0, 0.9), InvalidArgument);
  EXPECT_THROW(srls_iqr_step(st, Eigen::VectorXd::Zero(2), 1.0, 1.5), InvalidArgument);
  EXPECT_THROW(EstimatorState::initial(0, 100.0), InvalidArgument);
}

TEST(Oracle, FlagsIllConditioning) {
  std::vector<RegressorSample> samples(5);
  for (auto& s : samples) {
    s.phi = Eigen::MatrixXd::Zero(1, 2);
    s.phi(0, 0) = 1.0;
    s.z = Eigen::VectorXd::Ones(1);
  }
  const auto sol = batch_wls_oracle(samples, 2, 1.0, 1e8);
  EXPECT_TRUE(sol.ill_conditioned);
}

TEST(PredictAndScore, RecoversKnownParameters) {
  auto f = ident_fleet(0.4);
  f.duration = 80.0;
  IdentHyperParams hp;
  hp.d = delay_steps(0.4, f.dt) + 1;
  ASSERT_EQ(hp.d, 5u);
  const auto report = predict_and_score(simulate(f), hp, 100);
  ASSERT_GE(report.theta_history.size(), 300u);
  const Eigen::VectorXd truth = true_theta(f);
  const Eigen::VectorXd& at300 = report.theta_history[299];
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    EXPECT_NEAR(at300(j), truth(j), 0.05 * std::abs(truth(j))) << "parameter " << j;
  }
  EXPECT_LT(report.average_rmse, 1e-3);
  EXPECT_EQ(report.scored, report.samples - 100);
  EXPECT_EQ(report.rmse.size(), 3u);
}

TEST(PredictAndScore, ReportSerialization) {
  auto f = ident_fleet(0.0);
  f.duration = 20.0;
  IdentHyperParams hp;
  hp.d = 1;
  const auto report = predict_and_score(simulate(f), hp, 10);
  std::ostringstream os;
  write_theta_csv(os, report);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,time,k_1,c_1,k_2,c_2,k_3,c_3");
  const auto j = nlohmann::json::parse(report_json(report, "sim"));
  EXPECT_EQ(j["episode"], "sim");
  EXPECT_EQ(j["vehicles"], 3);
  EXPECT_EQ(j["rmse"].size(), 3u);
}
