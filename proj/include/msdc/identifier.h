#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msdc/simulator.h"

namespace msdc {

// Homogeneous model constants assumed by the identifier plus the RLS
// settings. Defaults are the published hyperparameter set.
struct IdentHyperParams {
  double M = 1.0;       // [kg]
  double alpha = 0.1;
  double beta = 2.5;    // [s]
  double lambda = 0.95;
  double delta = 100.0;
  std::size_t d = 5;    // delay [steps]
  double dt = 0.1;      // [s]
  double v_lower = 2.0;
  double v_upper = 40.0;

  void validate() const;
};

// theta = [k_1, c_1, ..., k_N, c_N]; S = R^{-T} is lower triangular and
// P = S^T S is the (scaled) covariance.
struct EstimatorState {
  Eigen::VectorXd theta;
  Eigen::MatrixXd S;
  std::size_t steps = 0;

  static EstimatorState initial(std::size_t parameters, double delta);
  std::size_t parameters() const { return static_cast<std::size_t>(theta.size()); }
};

struct RegressorSample {
  Eigen::MatrixXd phi;  // N x 2N
  Eigen::VectorXd z;    // M * acceleration
  double time = 0.0;
  std::size_t step = 0;  // index into the trajectory
};

enum class AccelSource {
  kFiniteDifference,  // (v(k) - v(k-1)) / dt from the speed series
  kTrajectory,        // the trajectory's own accel series (e.g. filtered)
};

struct RegressorStream {
  std::vector<RegressorSample> samples;
  std::size_t skipped = 0;  // steps without a complete delay horizon
};

// Row i (0-based vehicle), with every input taken d steps back:
//   [2i]   h_i - X(v_i)
//   [2i+1] v_{i-1} - v_i
//   [2i+2] -alpha (h_{i+1} - X(v_{i+1}))   (not for the last vehicle)
//   [2i+3] -alpha (v_i - v_{i+1})
// The trajectory ghost series plays v_{-1}.
RegressorStream build_regressor(const TrajectorySet& traj,
                                const IdentHyperParams& hp,
                                AccelSource accel = AccelSource::kFiniteDifference);

// One inverse-QR RLS update with forgetting factor lambda; returns the
// a-priori error y - x^T theta.
double srls_iqr_step(EstimatorState& state, const Eigen::VectorXd& x, double y,
                     double lambda);

// One step per row of phi. Forgetting is applied on the first row only, so a
// whole sample is discounted by lambda once.
void srls_iqr_epoch(EstimatorState& state, const RegressorSample& sample,
                    double lambda);

struct OracleSolution {
  Eigen::VectorXd theta;
  double condition = 1.0;  // of the regularized normal matrix
  bool ill_conditioned = false;
};

// argmin sum_k lambda^{K-1-k} |z_k - Phi_k theta|^2 + lambda^K delta^{-2} |theta|^2,
// the objective the recursion minimizes exactly.
OracleSolution batch_wls_oracle(const std::vector<RegressorSample>& samples,
                                std::size_t parameters, double lambda,
                                double delta);

struct PredictionReport {
  std::size_t vehicles = 0;
  std::size_t samples = 0;      // regressor samples processed
  std::size_t scored = 0;       // samples after the warm-up
  std::size_t warmup = 0;
  std::size_t skipped = 0;
  std::vector<double> rmse;     // per vehicle [m/s^2]
  double average_rmse = 0.0;
  double worst_rmse = 0.0;
  std::vector<double> times;                 // per processed sample
  std::vector<Eigen::VectorXd> theta_history;  // after each update
  Eigen::VectorXd final_theta;
};

// One-step-ahead prediction a^(k) = Phi(k) theta(k-1) / M, then update.
PredictionReport predict_and_score(const TrajectorySet& traj,
                                   const IdentHyperParams& hp,
                                   std::size_t warmup = 100,
                                   AccelSource accel = AccelSource::kFiniteDifference);

void write_theta_csv(std::ostream& os, const PredictionReport& report);
std::string report_json(const PredictionReport& report, const std::string& label);

}  // namespace msdc
