#include "msdc/simulator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/core.h>

namespace msdc {

namespace {

constexpr double kDivergenceSpeed = 1e3;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

HistoryBuffer::HistoryBuffer(std::size_t max_lag, const ChainState& initial,
                             double initial_ghost)
    : states_(max_lag + 1, initial), ghosts_(max_lag + 1, initial_ghost) {}

std::size_t HistoryBuffer::index(std::size_t lag) const {
  if (lag >= states_.size()) {
    throw InvalidArgument(
        fmt::format("history lag {} exceeds depth {}", lag, states_.size()));
  }
  return (head_ + states_.size() - lag) % states_.size();
}

void HistoryBuffer::push(const ChainState& state, double ghost) {
  head_ = (head_ + 1) % states_.size();
  states_[head_] = state;
  ghosts_[head_] = ghost;
}

const ChainState& HistoryBuffer::state_at(std::size_t lag) const {
  return states_[index(lag)];
}

double HistoryBuffer::ghost_at(std::size_t lag) const {
  return ghosts_[index(lag)];
}

std::size_t delay_steps(double tau, double dt) {
  return static_cast<std::size_t>(std::llround(tau / dt));
}

std::vector<double> make_time_grid(double dt, double duration) {
  if (!(dt > 0.0) || !std::isfinite(duration) || duration < 0.0) {
    throw InvalidArgument("time grid needs dt > 0 and duration >= 0");
  }
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

std::vector<double> make_ghost(const GhostSignal& signal,
                               const std::vector<double>& time_grid) {
  const std::size_t n = time_grid.size();
  return std::visit(
      Overloaded{
          [&](const ConstantGhost& g) { return std::vector<double>(n, g.v0); },
          [&](const SinusoidGhost& g) {
            if (!(g.amplitude >= 0.0)) {
              throw InvalidArgument("sinusoid amplitude must be >= 0");
            }
            std::vector<double> out(n);
            for (std::size_t k = 0; k < n; ++k) {
              out[k] = g.v0 + g.amplitude * std::sin(g.omega * time_grid[k]);
            }
            return out;
          },
          [&](const WhiteNoiseGhost& g) {
            if (!(g.std >= 0.0)) {
              throw InvalidArgument("white-noise std must be >= 0");
            }
            std::mt19937_64 rng(g.seed);
            std::normal_distribution<double> noise(0.0, 1.0);
            std::vector<double> out(n);
            for (std::size_t k = 0; k < n; ++k) {
              out[k] = g.v0 + g.std * noise(rng);
            }
            return out;
          },
          [&](const RecordedGhost& g) {
            if (g.speeds.size() < n) {
              throw InvalidArgument(fmt::format(
                  "recorded ghost trace has {} samples, grid needs {}",
                  g.speeds.size(), n));
            }
            return std::vector<double>(g.speeds.begin(),
                                       g.speeds.begin() + static_cast<long>(n));
          }},
      signal);
}

double ghost_nominal_speed(const GhostSignal& signal) {
  return std::visit(
      Overloaded{[](const ConstantGhost& g) { return g.v0; },
                 [](const SinusoidGhost& g) { return g.v0; },
                 [](const WhiteNoiseGhost& g) { return g.v0; },
                 [](const RecordedGhost&) {
                   return std::numeric_limits<double>::quiet_NaN();
                 }},
      signal);
}

std::vector<double> finite_difference_accel(const std::vector<double>& speed,
                                            double dt) {
  std::vector<double> a(speed.size(), 0.0);
  for (std::size_t k = 1; k < speed.size(); ++k) {
    a[k] = (speed[k] - speed[k - 1]) / dt;
  }
  return a;
}

TrajectorySet simulate(const FleetScenario& fleet) {
  fleet.validate();
  const std::size_t n = fleet.size();
  TrajectorySet out;
  out.time = make_time_grid(fleet.dt, fleet.duration);
  if (out.time.size() < 3) {
    throw InvalidArgument("simulate: duration/dt must be >= 2");
  }
  out.ghost = make_ghost(fleet.ghost, out.time);

  std::vector<std::size_t> lags(n);
  std::size_t max_lag = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lags[i] = delay_steps(fleet.vehicles[i].tau, fleet.dt);
    max_lag = std::max(max_lag, lags[i]);
  }

  const ChainState eq = equilibrium(fleet.vehicles, fleet.initial_speed);
  ChainState state = fleet.initial_perturbation.empty()
                         ? eq
                         : from_perturbation(fleet.initial_perturbation, eq);
  // Before t = 0 the chain sits at its initial condition behind a ghost
  // cruising at the equilibrium speed.
  HistoryBuffer history(max_lag, state, fleet.initial_speed);

  const std::size_t steps = out.time.size();
  out.headway.assign(n, std::vector<double>(steps));
  out.speed.assign(n, std::vector<double>(steps));
  for (std::size_t i = 0; i < n; ++i) {
    out.headway[i][0] = state.h[i];
    out.speed[i][0] = state.v[i];
  }

  // The sample at index 0 replaces the pre-history entry at lag 0.
  history.push(state, out.ghost[0]);
  ChainState next = state;
  for (std::size_t k = 0; k + 1 < steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v_front = i == 0 ? out.ghost[k] : state.v[i - 1];
      const ChainState& lagged = history.state_at(lags[i]);
      const double ghost_lagged = history.ghost_at(lags[0]);
      next.h[i] = state.h[i] + fleet.dt * (v_front - state.v[i]);
      next.v[i] = state.v[i] + fleet.dt * vehicle_acceleration(
                                              fleet.vehicles, i, lagged,
                                              ghost_lagged);
    }
    const double t = out.time[k + 1];
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(next.v[i]) || !std::isfinite(next.h[i]) ||
          std::abs(next.v[i] - fleet.initial_speed) > kDivergenceSpeed) {
        throw SimulationDiverged(
            t, fmt::format("simulation diverged at t = {} s (vehicle {})", t,
                           i + 1));
      }
    }
    next.time = t;
    state = next;
    history.push(state, out.ghost[k + 1]);
    for (std::size_t i = 0; i < n; ++i) {
      out.headway[i][k + 1] = state.h[i];
      out.speed[i][k + 1] = state.v[i];
    }
  }

  out.accel.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.accel[i] = finite_difference_accel(out.speed[i], fleet.dt);
  }
  return out;
}

}  // namespace msdc
