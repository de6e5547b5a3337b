#include "msdc/pade.h"

#include <cmath>

#include "msdc/model.h"

namespace msdc {

namespace {

// c_j = (2n-j)! n! / ((2n)! j! (n-j)!), built by the ratio recurrence
// c_{j+1}/c_j = (n-j) / ((j+1)(2n-j)).
std::vector<double> pade_coefficients(int n) {
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  c[0] = 1.0;
  for (int j = 0; j < n; ++j) {
    c[j + 1] = c[j] * static_cast<double>(n - j) /
               (static_cast<double>(j + 1) * static_cast<double>(2 * n - j));
  }
  return c;
}

std::complex<double> horner(const std::vector<double>& coeff,
                            std::complex<double> s) {
  std::complex<double> acc = 0.0;
  for (auto it = coeff.rbegin(); it != coeff.rend(); ++it) acc = acc * s + *it;
  return acc;
}

}  // namespace

std::complex<double> PadeApproximant::operator()(std::complex<double> s) const {
  return horner(num, s) / horner(den, s);
}

PadeApproximant pade(double tau, int order) {
  if (order < 1) throw InvalidArgument("pade order must be >= 1");
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("pade delay must be finite and >= 0");
  }
  PadeApproximant p;
  p.tau = tau;
  if (tau == 0.0) {
    p.num = {1.0};
    p.den = {1.0};
    return p;
  }
  const auto c = pade_coefficients(order);
  // In s: coefficient of s^j is c_j tau^j; normalize by the leading term.
  const double lead = c[order] * std::pow(tau, order);
  p.num.resize(c.size());
  p.den.resize(c.size());
  double tau_pow = 1.0;
  for (int j = 0; j <= order; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    p.den[j] = c[j] * tau_pow / lead;
    p.num[j] = sign * c[j] * tau_pow / lead;
    tau_pow *= tau;
  }
  return p;
}

DelayRealization realize(const PadeApproximant& p) {
  DelayRealization r;
  const int n = p.order();
  if (n == 0) {
    r.a.resize(0, 0);
    r.b.resize(0);
    r.c.resize(0);
    r.d = p.num[0] / p.den[0];
    return r;
  }
  // Work in sigma = s*tau so the companion entries stay O(1), then rescale:
  // A = A_sigma / tau, B = B_sigma / tau.
  const double tau = p.tau;
  std::vector<double> den_sigma(n + 1), num_sigma(n + 1);
  double tau_pow = 1.0;
  for (int j = 0; j <= n; ++j) {
    den_sigma[j] = p.den[j] / tau_pow;
    num_sigma[j] = p.num[j] / tau_pow;
    tau_pow *= tau;
  }
  const double lead = den_sigma[n];
  for (int j = 0; j <= n; ++j) {
    den_sigma[j] /= lead;
    num_sigma[j] /= lead;
  }
  r.d = num_sigma[n];
  r.a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) r.a(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) r.a(n - 1, j) = -den_sigma[j];
  r.b = Eigen::VectorXd::Zero(n);
  r.b(n - 1) = 1.0;
  r.c.resize(n);
  for (int j = 0; j < n; ++j) r.c(j) = num_sigma[j] - r.d * den_sigma[j];
  r.a /= tau;
  r.b /= tau;
  return r;
}

}  // namespace msdc
