#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace msdc {

// [n/n] Pade approximant of exp(-s*tau). Coefficients are ascending powers
// of s; the denominator is normalized monic.
struct PadeApproximant {
  double tau = 0.0;
  std::vector<double> num;
  std::vector<double> den;

  int order() const { return static_cast<int>(den.size()) - 1; }
  std::complex<double> operator()(std::complex<double> s) const;
};

PadeApproximant pade(double tau, int order);

// Minimal controllable-canonical realization (A, B, C, D) of a Pade delay.
// State dimension equals the order; for tau = 0 it is empty with D = 1.
struct DelayRealization {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::RowVectorXd c;
  double d = 1.0;

  int states() const { return static_cast<int>(a.rows()); }
};

DelayRealization realize(const PadeApproximant& p);

}  // namespace msdc
