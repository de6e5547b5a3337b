#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "msdc/model.h"

namespace msdc {

struct LinearizedSystem;

// Per-vehicle coefficients of the delayed force balance, already divided by
// the mass. For vehicle 0, `v_front` is the coefficient of the ghost speed.
struct ChainRow {
  double v_front = 0.0;
  double h_own = 0.0;
  double v_own = 0.0;
  double h_rear = 0.0;
  double v_rear = 0.0;
  double tau = 0.0;
};

// Eliminating the headway states through s*h_i = v_{i-1} - v_i turns the
// 2N-state perturbation dynamics into a tridiagonal N x N system in the
// speeds. `ChainStructure` evaluates that system at a complex frequency,
// with each delay either exact or replaced by its Pade approximant.
class ChainStructure {
 public:
  explicit ChainStructure(std::vector<ChainRow> rows);

  static ChainStructure from_vehicles(const std::vector<VehicleParams>& vehicles);
  // Returns nullopt when the matrices do not have the chain sparsity
  // pattern (kinematic headway rows, one delayed force row per vehicle).
  static std::optional<ChainStructure> from_system(const LinearizedSystem& sys);

  std::size_t size() const { return rows_.size(); }
  const std::vector<ChainRow>& rows() const { return rows_; }

  // G_i(s) = V_i(s)/V_0(s) with exact delays. Returns nullopt if the
  // elimination hits a vanishing pivot (caller falls back to a dense solve).
  std::optional<std::vector<std::complex<double>>> transfer(
      std::complex<double> s) const;

  // Number of roots with real part > -shift of the characteristic
  // polynomial det(sI - A_e) of the Pade-augmented system, counted by the
  // argument principle along the shifted imaginary axis. Returns nullopt
  // if phase tracking cannot resolve a root too close to the axis.
  std::optional<int> count_unstable_roots(int pade_order, double shift) const;

 private:
  void delay_factors(std::complex<double> s, int pade_order,
                     std::vector<std::complex<double>>& out) const;

  std::vector<ChainRow> rows_;
  std::vector<double> distinct_taus_;
  std::vector<std::size_t> tau_index_;
};

}  // namespace msdc
