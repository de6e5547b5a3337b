#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msdc/model.h"

namespace msdc {

// Perturbation dynamics about the uniform-flow equilibrium:
//   x'(t) = A0 x(t) + sum_i A_i x(t - tau_i) + b_now u(t) + b_delayed u(t - tau_1)
//   y(t)  = C x(t)
// with x = [h~_{0,1}, v~_1, ..., h~_{N-1,N}, v~_N] and u = v~_0. The ghost
// enters vehicle 1's headway kinematics undelayed and its damper delayed.
struct LinearizedSystem {
  Eigen::MatrixXd a0;
  std::vector<Eigen::MatrixXd> a_delayed;
  Eigen::VectorXd b_now;
  Eigen::VectorXd b_delayed;
  Eigen::MatrixXd c;
  std::vector<double> delays;

  std::size_t vehicles() const { return delays.size(); }
  std::size_t states() const { return 2 * delays.size(); }
};

LinearizedSystem linearize(const std::vector<VehicleParams>& vehicles);
LinearizedSystem linearize(const FleetScenario& fleet);

// jw is (numerically) a characteristic root.
class PoleOnAxis : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EigenSolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense complex solve of (jwI - A0 - sum A_i e^{-jw tau_i}) X = B(jw);
// returns C X. Delays are exact.
std::vector<std::complex<double>> freq_response(const LinearizedSystem& sys,
                                                double omega);

struct OmegaGrid {
  double lo = 1e-3;
  double hi = 1e2;
  std::size_t points = 2000;
  bool refine = true;  // golden-section refinement around interior peaks

  std::vector<double> values() const;  // logarithmic spacing
  void validate() const;
};

struct StringStability {
  bool stable = false;
  bool pole_on_axis = false;
  // Flagged when the peak is at an interior frequency and within 1e-4 of
  // unit gain; the strict rule still decides `stable`.
  bool boundary = false;
  std::vector<double> sup_gain;      // per vehicle
  std::vector<double> peak_omega;    // per vehicle
  std::size_t worst_vehicle = 0;     // 1-based
  double worst_gain = 0.0;
};

inline constexpr double kDefaultStringTol = 1e-6;
inline constexpr double kBoundaryBand = 1e-4;

// sup_w |G_i(jw)| <= 1 + tol for every vehicle.
StringStability string_stable(const LinearizedSystem& sys,
                              const OmegaGrid& grid = {},
                              double tol = kDefaultStringTol);

// Delay-free augmentation: each delayed channel a_i^T x(t - tau_i) is
// replaced by a Pade realization of the given order.
Eigen::MatrixXd augmented_matrix(const LinearizedSystem& sys, int pade_order);

inline constexpr double kStabilityMargin = 1e-9;

struct PlantStability {
  bool stable = false;
  double spectral_abscissa = 0.0;  // max Re(lambda) of the augmented matrix
};

// Eigenvalues of the Pade-augmented matrix; stable iff every real part is
// below -kStabilityMargin. Throws EigenSolverFailure on non-convergence.
PlantStability plant_stable(const LinearizedSystem& sys, int pade_order = 3);

enum class CellClass {
  kPlantUnstable,
  kPlantStableStringUnstable,
  kStringStable,
  kUnknown,
};

const char* to_string(CellClass c);

struct StabilityCell {
  double k_tilde = 0.0;
  double c_tilde = 0.0;
  CellClass cls = CellClass::kUnknown;
  std::size_t worst_vehicle = 0;  // 0 when string stability was not evaluated
  double sup_gain = 0.0;          // NaN when not evaluated
  bool boundary = false;
  std::string error;
};

struct GridAxis {
  double lo = -10.0;
  double hi = 10.0;
  double step = 0.1;
  bool open = true;  // exclude the end points

  std::vector<double> values() const;
};

enum class PlantMethod { kArgumentPrinciple, kEigenvalues };

struct SweepSpec {
  GridAxis k_axis;
  GridAxis c_axis;
  // One entry (broadcast to every vehicle) or one per vehicle.
  std::vector<double> delays{0.0};
  int pade_order = 3;
  OmegaGrid omega;
  double tol = kDefaultStringTol;
  PlantMethod plant_method = PlantMethod::kArgumentPrinciple;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate(std::size_t vehicles) const;
};

struct ClassCounts {
  std::size_t plant_unstable = 0;
  std::size_t string_unstable = 0;
  std::size_t string_stable = 0;
  std::size_t unknown = 0;
  std::size_t boundary = 0;
};

class StabilityMap {
 public:
  StabilityMap(std::vector<double> k_axis, std::vector<double> c_axis);

  const std::vector<double>& k_axis() const { return k_axis_; }
  const std::vector<double>& c_axis() const { return c_axis_; }
  std::size_t size() const { return cells_.size(); }

  // Row-major with k as the slow index.
  const StabilityCell& at(std::size_t ik, std::size_t ic) const;
  const std::vector<StabilityCell>& cells() const { return cells_; }
  // Rejects a STRING_STABLE cell that is not plant stable by throwing.
  void set(std::size_t ik, std::size_t ic, StabilityCell cell);

  ClassCounts counts() const;

 private:
  std::vector<double> k_axis_;
  std::vector<double> c_axis_;
  std::vector<StabilityCell> cells_;
};

// Classifies one (k~, c~) cell of a fleet with uniform parameters.
StabilityCell classify_cell(const std::vector<VehicleParams>& vehicles,
                            double k_tilde, double c_tilde,
                            const SweepSpec& spec);

// The template provides m, alpha, beta and the chain length; k and c of
// every vehicle are set to k~ m and c~ m per cell. Cells are independent
// and evaluated in parallel.
StabilityMap sweep(const FleetScenario& tmpl, const SweepSpec& spec);

std::vector<VehicleParams> with_delays(std::vector<VehicleParams> vehicles,
                                       const std::vector<double>& delays);

void write_stability_csv(std::ostream& os, const StabilityMap& map);

}  // namespace msdc
