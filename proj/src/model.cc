#include "msdc/model.h"

#include <cmath>

#include <fmt/core.h>

namespace msdc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void VehicleParams::validate() const {
  require(finite(m) && m > 0.0, fmt::format("vehicle mass must be > 0 (got {})", m));
  require(finite(k) && finite(c), "vehicle k and c must be finite");
  require(finite(beta) && beta > 0.0,
          fmt::format("beta must be > 0 (got {})", beta));
  require(finite(tau) && tau >= 0.0,
          fmt::format("tau must be >= 0 (got {})", tau));
  require(finite(alpha) && alpha >= 0.0 && alpha <= 1.0,
          fmt::format("alpha must lie in [0, 1] (got {})", alpha));
  require(finite(v_lower) && finite(v_upper) && v_lower >= 0.0 &&
              v_lower < v_upper,
          fmt::format("speed thresholds need 0 <= v_lower < v_upper (got {}, {})",
                      v_lower, v_upper));
}

void FleetScenario::validate() const {
  require(!vehicles.empty(), "fleet needs at least one vehicle");
  for (const auto& v : vehicles) v.validate();
  require(finite(dt) && dt > 0.0, "dt must be > 0");
  require(finite(duration) && duration >= dt, "duration must be >= dt");
  require(finite(initial_speed), "initial speed must be finite");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    require(vehicles[i].in_linear_region(initial_speed),
            fmt::format("initial speed {} outside the linear spacing region of "
                        "vehicle {}",
                        initial_speed, i + 1));
  }
  require(initial_perturbation.empty() ||
              initial_perturbation.size() == 2 * vehicles.size(),
          "initial perturbation must have 2N entries");
  for (double x : initial_perturbation) {
    require(finite(x), "initial perturbation must be finite");
  }
}

double spacing_policy(const VehicleParams& p, double v) {
  if (!std::isfinite(v)) throw InvalidArgument("spacing_policy: non-finite speed");
  if (v < p.v_lower) return p.x_min();
  if (v <= p.v_upper) return p.beta * v;
  return p.x_max();
}

double vehicle_acceleration(const std::vector<VehicleParams>& vehicles,
                            std::size_t i, const ChainState& s,
                            double ghost_speed) {
  const VehicleParams& p = vehicles[i];
  const double v_front = i == 0 ? ghost_speed : s.v[i - 1];
  double force = p.k * (s.h[i] - spacing_policy(p, s.v[i])) +
                 p.c * (v_front - s.v[i]);
  if (i + 1 < vehicles.size()) {
    const VehicleParams& rear = vehicles[i + 1];
    force -= p.alpha * rear.k * (s.h[i + 1] - spacing_policy(rear, s.v[i + 1]));
    force -= p.alpha * rear.c * (s.v[i] - s.v[i + 1]);
  }
  return force / p.m;
}

ChainDerivative eom_rhs(const std::vector<VehicleParams>& vehicles,
                        const ChainState& now,
                        const std::vector<ChainState>& delayed,
                        double ghost_now, double ghost_delayed) {
  const std::size_t n = vehicles.size();
  if (now.size() != n || now.h.size() != n || delayed.size() != n) {
    throw InvalidArgument("eom_rhs: state size does not match fleet");
  }
  if (!std::isfinite(ghost_now) || !std::isfinite(ghost_delayed)) {
    throw InvalidArgument("eom_rhs: non-finite ghost speed");
  }
  ChainDerivative d{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double v_front = i == 0 ? ghost_now : now.v[i - 1];
    d.h_dot[i] = v_front - now.v[i];
    d.v_dot[i] = vehicle_acceleration(vehicles, i, delayed[i], ghost_delayed);
  }
  return d;
}

ChainState equilibrium(const std::vector<VehicleParams>& vehicles,
                       double v0_star) {
  if (!std::isfinite(v0_star)) {
    throw InvalidArgument("equilibrium: non-finite speed");
  }
  ChainState eq;
  eq.h.reserve(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& p = vehicles[i];
    if (!p.in_linear_region(v0_star)) {
      throw InvalidArgument(fmt::format(
          "equilibrium: speed {} outside linear spacing region [{}, {}] of "
          "vehicle {}",
          v0_star, p.v_lower, p.v_upper, i + 1));
    }
    eq.h.push_back(p.beta * v0_star);
  }
  eq.v.assign(vehicles.size(), v0_star);
  return eq;
}

std::vector<double> to_perturbation(const ChainState& state,
                                    const ChainState& eq) {
  if (state.size() != eq.size() || state.h.size() != eq.h.size()) {
    throw InvalidArgument("to_perturbation: size mismatch");
  }
  std::vector<double> x(2 * state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    x[2 * i] = state.h[i] - eq.h[i];
    x[2 * i + 1] = state.v[i] - eq.v[i];
  }
  return x;
}

ChainState from_perturbation(const std::vector<double>& x,
                             const ChainState& eq) {
  if (x.size() != 2 * eq.size()) {
    throw InvalidArgument("from_perturbation: size mismatch");
  }
  ChainState s = eq;
  for (std::size_t i = 0; i < eq.size(); ++i) {
    s.h[i] = eq.h[i] + x[2 * i];
    s.v[i] = eq.v[i] + x[2 * i + 1];
  }
  return s;
}

}  // namespace msdc
