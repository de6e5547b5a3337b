#include "msdc/filter.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "msdc/model.h"

namespace msdc {

namespace {

using cd = std::complex<double>;

// Steady-state delay-line contents for a unit input.
std::array<double, 2> unit_state(const Biquad& q) {
  const double g = (q.b[0] + q.b[1] + q.b[2]) / (1.0 + q.a[1] + q.a[2]);
  const double z2 = q.b[2] - q.a[2] * g;
  const double z1 = g - q.b[0];
  return {z1, z2};
}

double dc_gain(const Biquad& q) {
  return (q.b[0] + q.b[1] + q.b[2]) / (1.0 + q.a[1] + q.a[2]);
}

std::vector<double> run(const std::vector<Biquad>& sos, std::vector<double> x,
                        bool steady_start) {
  if (x.empty()) return x;
  double scale = x[0];
  for (const auto& q : sos) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_start) {
      const auto zi = unit_state(q);
      z1 = zi[0] * scale;
      z2 = zi[1] * scale;
      scale *= dc_gain(q);
    }
    for (double& v : x) {
      const double in = v;
      const double y = q.b[0] * in + z1;
      z1 = q.b[1] * in - q.a[1] * y + z2;
      z2 = q.b[2] * in - q.a[2] * y;
      v = y;
    }
  }
  return x;
}

}  // namespace

std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz,
                                        double sample_hz) {
  if (order < 1) throw InvalidArgument("butterworth order must be >= 1");
  if (!(sample_hz > 0.0) || !std::isfinite(sample_hz)) {
    throw InvalidArgument("sample rate must be > 0");
  }
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_hz)) {
    throw InvalidArgument("cutoff must lie strictly between 0 and Nyquist");
  }
  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * sample_hz;
  const double wc = fs2 * std::tan(pi * cutoff_hz / sample_hz);
  std::vector<Biquad> sos;
  for (int k = 0; k < order / 2; ++k) {
    const cd p = wc * std::exp(cd(0.0, pi * (2.0 * k + order + 1) / (2.0 * order)));
    const cd z = (fs2 + p) / (fs2 - p);
    Biquad q;
    q.a = {1.0, -2.0 * z.real(), std::norm(z)};
    const double g = (1.0 + q.a[1] + q.a[2]) / 4.0;
    q.b = {g, 2.0 * g, g};
    sos.push_back(q);
  }
  if (order % 2 == 1) {
    const double z = (fs2 - wc) / (fs2 + wc);
    Biquad q;
    q.a = {1.0, -z, 0.0};
    const double g = (1.0 - z) / 2.0;
    q.b = {g, g, 0.0};
    sos.push_back(q);
  }
  return sos;
}

double magnitude_response(const std::vector<Biquad>& sos, double f_hz,
                          double sample_hz) {
  const cd zinv = std::exp(cd(0.0, -2.0 * std::numbers::pi * f_hz / sample_hz));
  cd h = 1.0;
  for (const auto& q : sos) {
    h *= (q.b[0] + zinv * (q.b[1] + zinv * q.b[2])) /
         (1.0 + zinv * (q.a[1] + zinv * q.a[2]));
  }
  return std::abs(h);
}

std::vector<double> sosfilt(const std::vector<Biquad>& sos,
                            const std::vector<double>& x) {
  return run(sos, x, false);
}

std::vector<double> filtfilt(const std::vector<Biquad>& sos,
                             const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return x;
  std::size_t pad = 3 * (2 * sos.size() + 1);
  pad = std::min(pad, n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t j = pad; j >= 1; --j) ext.push_back(2.0 * x[0] - x[j]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t j = 1; j <= pad; ++j) ext.push_back(2.0 * x[n - 1] - x[n - 1 - j]);

  auto y = run(sos, ext, true);
  std::reverse(y.begin(), y.end());
  y = run(sos, y, true);
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad),
          y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> lowpass_accel(const std::vector<double>& series, double dt,
                                  double cutoff_hz, int order) {
  if (!(dt > 0.0)) throw InvalidArgument("lowpass: dt must be > 0");
  const double fs = 1.0 / dt;
  if (!(cutoff_hz < 0.5 * fs)) {
    throw InvalidArgument("lowpass: cutoff at or above Nyquist");
  }
  return filtfilt(butterworth_lowpass(order, cutoff_hz, fs), series);
}

}  // namespace msdc
