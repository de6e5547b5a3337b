#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdc/model.h"

namespace msdc {

// Raised when the explicit integration leaves the physically meaningful
// range; `time()` is the first sample at which the guard tripped.
class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(double time, const std::string& what)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

// Fixed-depth ring of chain snapshots and ghost speeds. `at(lag)` returns
// the entry pushed `lag` steps ago; before enough pushes the initial entry
// is returned, which models a constant pre-history.
class HistoryBuffer {
 public:
  HistoryBuffer(std::size_t max_lag, const ChainState& initial,
                double initial_ghost);

  void push(const ChainState& state, double ghost);
  const ChainState& state_at(std::size_t lag) const;
  double ghost_at(std::size_t lag) const;
  std::size_t depth() const { return states_.size(); }

 private:
  std::size_t index(std::size_t lag) const;

  std::vector<ChainState> states_;
  std::vector<double> ghosts_;
  std::size_t head_ = 0;
};

std::size_t delay_steps(double tau, double dt);

// Time grid t_k = k*dt, k = 0..steps, with steps = round(duration/dt).
std::vector<double> make_time_grid(double dt, double duration);

std::vector<double> make_ghost(const GhostSignal& signal,
                               const std::vector<double>& time_grid);

// Ghost equilibrium speed v0* of the signal (NaN for recorded traces).
double ghost_nominal_speed(const GhostSignal& signal);

struct TrajectorySet {
  std::vector<double> time;
  std::vector<double> ghost;                  // v_0 [m/s]
  std::vector<std::vector<double>> headway;   // [vehicle][step]
  std::vector<std::vector<double>> speed;     // [vehicle][step]
  std::vector<std::vector<double>> accel;     // [vehicle][step]

  std::size_t vehicles() const { return speed.size(); }
  std::size_t steps() const { return time.size(); }
  double dt() const { return time.size() > 1 ? time[1] - time[0] : 0.0; }
};

// a_i(k) = (v_i(k) - v_i(k-1))/dt with a_i(0) = 0 (constant pre-history).
std::vector<double> finite_difference_accel(const std::vector<double>& speed,
                                            double dt);

// Explicit Euler integration of the delayed equations of motion. Vehicle i
// reads its force-balance inputs round(tau_i/dt) steps back.
TrajectorySet simulate(const FleetScenario& fleet);

}  // namespace msdc
