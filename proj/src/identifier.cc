#include "msdc/identifier.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

namespace msdc {

namespace {

double policy(const IdentHyperParams& hp, double v) {
  if (v < hp.v_lower) return hp.beta * hp.v_lower;
  if (v > hp.v_upper) return hp.beta * hp.v_upper;
  return hp.beta * v;
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void IdentHyperParams::validate() const {
  if (!(M > 0.0) || !finite(M)) throw InvalidArgument("identify: M must be > 0");
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw InvalidArgument("identify: lambda must be in (0, 1]");
  }
  if (!(delta > 0.0) || !finite(delta)) {
    throw InvalidArgument("identify: delta must be > 0");
  }
  if (!(dt > 0.0) || !finite(dt)) throw InvalidArgument("identify: dt must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("identify: alpha must be in [0, 1]");
  }
  if (!(beta > 0.0) || !finite(beta)) {
    throw InvalidArgument("identify: beta must be > 0");
  }
  if (!(v_lower >= 0.0 && v_lower < v_upper) || !finite(v_upper)) {
    throw InvalidArgument("identify: need 0 <= v_lower < v_upper");
  }
}

EstimatorState EstimatorState::initial(std::size_t parameters, double delta) {
  if (parameters == 0) throw InvalidArgument("estimator needs parameters");
  if (!(delta > 0.0)) throw InvalidArgument("estimator delta must be > 0");
  EstimatorState s;
  const auto n = static_cast<Eigen::Index>(parameters);
  s.theta = Eigen::VectorXd::Zero(n);
  s.S = delta * Eigen::MatrixXd::Identity(n, n);
  return s;
}

RegressorStream build_regressor(const TrajectorySet& traj,
                                const IdentHyperParams& hp, AccelSource accel) {
  hp.validate();
  const std::size_t n = traj.vehicles();
  const std::size_t steps = traj.steps();
  if (n == 0) throw InvalidArgument("regressor: trajectory has no vehicles");
  if (traj.ghost.size() != steps || traj.headway.size() != n) {
    throw InvalidArgument("regressor: inconsistent trajectory series");
  }
  if (accel == AccelSource::kTrajectory && traj.accel.size() != n) {
    throw InvalidArgument("regressor: trajectory has no accel series");
  }
  RegressorStream out;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(2 * n);
  const std::size_t first = std::max<std::size_t>(hp.d, 1);

  for (std::size_t k = 0; k < steps; ++k) {
    if (k < first) {
      ++out.skipped;
      continue;
    }
    const std::size_t kd = k - hp.d;
    RegressorSample s;
    s.phi = Eigen::MatrixXd::Zero(rows, cols);
    s.z = Eigen::VectorXd::Zero(rows);
    s.time = traj.time[k];
    s.step = k;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double v_i = traj.speed[i][kd];
      const double v_front = i == 0 ? traj.ghost[kd] : traj.speed[i - 1][kd];
      s.phi(r, 2 * r) = traj.headway[i][kd] - policy(hp, v_i);
      s.phi(r, 2 * r + 1) = v_front - v_i;
      if (i + 1 < n) {
        const double v_rear = traj.speed[i + 1][kd];
        s.phi(r, 2 * r + 2) = -hp.alpha * (traj.headway[i + 1][kd] - policy(hp, v_rear));
        s.phi(r, 2 * r + 3) = -hp.alpha * (v_i - v_rear);
      }
      const double a = accel == AccelSource::kTrajectory
                           ? traj.accel[i][k]
                           : (traj.speed[i][k] - traj.speed[i][k - 1]) / hp.dt;
      s.z(r) = hp.M * a;
      ok = finite(s.z(r)) && s.phi.row(r).allFinite();
    }
    if (!ok) {
      ++out.skipped;
      continue;
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

double srls_iqr_step(EstimatorState& state, const Eigen::VectorXd& x, double y,
                     double lambda) {
  const Eigen::Index n = state.theta.size();
  if (x.size() != n) throw InvalidArgument("srls step: regressor size mismatch");
  if (!x.allFinite() || !finite(y)) {
    throw InvalidArgument("srls step: non-finite input");
  }
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw InvalidArgument("srls step: lambda must be in (0, 1]");
  }
  const double inv_sqrt_lambda = 1.0 / std::sqrt(lambda);
  Eigen::MatrixXd& r = state.S;

  Eigen::VectorXd a = r.triangularView<Eigen::Lower>() * x;
  a *= inv_sqrt_lambda;
  const double e = y - x.dot(state.theta);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  double b_prev = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double b = std::hypot(b_prev, a(i));
    const double c = b_prev / b;
    const double s = a(i) / b;
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double r_old = r(i, j);
      r(i, j) = inv_sqrt_lambda * c * r_old - s * u(j);
      u(j) = c * u(j) + inv_sqrt_lambda * s * r_old;
    }
    b_prev = b;
  }
  state.theta += (e / b_prev) * u;
  ++state.steps;
  return e;
}

void srls_iqr_epoch(EstimatorState& state, const RegressorSample& sample,
                    double lambda) {
  for (Eigen::Index row = 0; row < sample.phi.rows(); ++row) {
    srls_iqr_step(state, sample.phi.row(row).transpose(), sample.z(row),
                  row == 0 ? lambda : 1.0);
  }
}

OracleSolution batch_wls_oracle(const std::vector<RegressorSample>& samples,
                                std::size_t parameters, double lambda,
                                double delta) {
  if (parameters == 0) throw InvalidArgument("oracle needs parameters");
  if (!(lambda > 0.0 && lambda <= 1.0) || !(delta > 0.0)) {
    throw InvalidArgument("oracle: invalid lambda or delta");
  }
  const auto p = static_cast<Eigen::Index>(parameters);
  const auto count = static_cast<double>(samples.size());
  Eigen::MatrixXd normal =
      std::pow(lambda, count) / (delta * delta) * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (s.phi.cols() != p) throw InvalidArgument("oracle: regressor size mismatch");
    const double w = std::pow(lambda, count - 1.0 - static_cast<double>(k));
    normal.noalias() += w * s.phi.transpose() * s.phi;
    rhs.noalias() += w * s.phi.transpose() * s.z;
  }
  OracleSolution out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(normal);
  const auto& sv = svd.singularValues();
  out.condition = sv(0) / sv(sv.size() - 1);
  out.ill_conditioned = !(out.condition < 1e12);
  if (out.ill_conditioned) {
    fmt::print(stderr, "warning: oracle normal matrix condition {:.3g}\n",
               out.condition);
  }
  out.theta = normal.ldlt().solve(rhs);
  return out;
}

PredictionReport predict_and_score(const TrajectorySet& traj,
                                   const IdentHyperParams& hp,
                                   std::size_t warmup, AccelSource accel) {
  const auto stream = build_regressor(traj, hp, accel);
  const std::size_t n = traj.vehicles();
  PredictionReport rep;
  rep.vehicles = n;
  rep.warmup = warmup;
  rep.skipped = stream.skipped;
  rep.samples = stream.samples.size();
  rep.rmse.assign(n, 0.0);

  EstimatorState state = EstimatorState::initial(2 * n, hp.delta);
  std::vector<double> sq(n, 0.0);
  for (std::size_t k = 0; k < stream.samples.size(); ++k) {
    const auto& s = stream.samples[k];
    if (k >= warmup) {
      const Eigen::VectorXd pred = s.phi * state.theta;
      for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double err = (pred(r) - s.z(r)) / hp.M;
        sq[i] += err * err;
      }
      ++rep.scored;
    }
    srls_iqr_epoch(state, s, hp.lambda);
    rep.times.push_back(s.time);
    rep.theta_history.push_back(state.theta);
  }
  if (rep.scored > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      rep.rmse[i] = std::sqrt(sq[i] / static_cast<double>(rep.scored));
    }
    double sum = 0.0;
    for (double r : rep.rmse) sum += r;
    rep.average_rmse = sum / static_cast<double>(n);
    rep.worst_rmse = *std::max_element(rep.rmse.begin(), rep.rmse.end());
  } else {
    rep.average_rmse = rep.worst_rmse = std::numeric_limits<double>::quiet_NaN();
    std::fill(rep.rmse.begin(), rep.rmse.end(), rep.average_rmse);
  }
  rep.final_theta = state.theta;
  return rep;
}

void write_theta_csv(std::ostream& os, const PredictionReport& report) {
  os << "step,time";
  for (std::size_t i = 1; i <= report.vehicles; ++i) {
    fmt::print(os, ",k_{},c_{}", i, i);
  }
  os << '\n';
  for (std::size_t k = 0; k < report.theta_history.size(); ++k) {
    fmt::print(os, "{},{}", k, report.times[k]);
    for (double v : report.theta_history[k]) fmt::print(os, ",{}", v);
    os << '\n';
  }
}

std::string report_json(const PredictionReport& report, const std::string& label) {
  nlohmann::ordered_json j;
  auto num = [](double x) -> nlohmann::ordered_json {
    if (std::isfinite(x)) return x;
    return nullptr;
  };
  j["episode"] = label;
  j["vehicles"] = report.vehicles;
  j["samples"] = report.samples;
  j["scored_samples"] = report.scored;
  j["warmup"] = report.warmup;
  j["skipped"] = report.skipped;
  j["average_rmse"] = num(report.average_rmse);
  j["worst_rmse"] = num(report.worst_rmse);
  auto& per = j["rmse"];
  per = nlohmann::ordered_json::array();
  for (double r : report.rmse) per.push_back(num(r));
  auto& theta = j["final_theta"];
  theta = nlohmann::ordered_json::array();
  for (double t : report.final_theta) theta.push_back(num(t));
  return j.dump(2);
}

}  // namespace msdc
