#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace msdc {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Driver/vehicle tuple of the mass-spring-damper-clutch model. The spacing
// policy saturates at beta*v_lower below v_lower and at beta*v_upper above
// v_upper, so it is continuous in speed.
struct VehicleParams {
  double m = 1.0;      // [kg]
  double k = 1.0;      // spring stiffness [N/m]
  double c = 1.0;      // damping [N s/m]
  double alpha = 0.2;  // rear-coupling scaling, in [0, 1]
  double beta = 1.0;   // desired time headway [s]
  double tau = 0.0;    // reaction delay [s]
  double v_lower = 2.0;
  double v_upper = 40.0;

  double x_min() const { return beta * v_lower; }
  double x_max() const { return beta * v_upper; }
  bool in_linear_region(double v) const {
    return v >= v_lower && v <= v_upper;
  }

  // Throws InvalidArgument naming the first violated invariant.
  void validate() const;
};

struct ConstantGhost {
  double v0 = 20.0;
};

struct SinusoidGhost {
  double v0 = 20.0;
  double amplitude = 1.0;  // [m/s]
  double omega = 1.0;      // [rad/s]
};

struct WhiteNoiseGhost {
  double v0 = 20.0;
  double std = 0.5;  // [m/s]
  std::uint64_t seed = 1;
};

// Speeds sampled on the simulation grid, starting at t = 0.
struct RecordedGhost {
  std::vector<double> speeds;
};

using GhostSignal =
    std::variant<ConstantGhost, SinusoidGhost, WhiteNoiseGhost, RecordedGhost>;

struct FleetScenario {
  std::vector<VehicleParams> vehicles;  // front to rear
  GhostSignal ghost = ConstantGhost{};
  double dt = 0.1;
  double duration = 60.0;
  double initial_speed = 20.0;
  // Interleaved [h~_{0,1}, v~_1, ..., h~_{N-1,N}, v~_N] added to the
  // equilibrium at t = 0. Empty means start exactly at equilibrium.
  std::vector<double> initial_perturbation;

  std::size_t size() const { return vehicles.size(); }
  void validate() const;
};

// Headways h[i] = h_{i-1,i} (vehicle 0 of the arrays is the first follower)
// and speeds v[i].
struct ChainState {
  std::vector<double> h;
  std::vector<double> v;
  double time = 0.0;

  std::size_t size() const { return v.size(); }
};

struct ChainDerivative {
  std::vector<double> h_dot;
  std::vector<double> v_dot;
};

double spacing_policy(const VehicleParams& p, double v);

// Right-hand side of the delayed equations of motion. `delayed[i]` is the
// chain snapshot at t - tau_i, used for every term of vehicle i's force
// balance; `ghost_delayed` is v_0(t - tau_1).
ChainDerivative eom_rhs(const std::vector<VehicleParams>& vehicles,
                        const ChainState& now,
                        const std::vector<ChainState>& delayed,
                        double ghost_now, double ghost_delayed);

// Force balance of vehicle i alone, evaluated on one snapshot.
double vehicle_acceleration(const std::vector<VehicleParams>& vehicles,
                            std::size_t i, const ChainState& snapshot,
                            double ghost_speed);

ChainState equilibrium(const std::vector<VehicleParams>& vehicles,
                       double v0_star);

std::vector<double> to_perturbation(const ChainState& state,
                                    const ChainState& eq);
ChainState from_perturbation(const std::vector<double>& x,
                             const ChainState& eq);

}  // namespace msdc
