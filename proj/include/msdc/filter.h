#pragma once

#include <array>
#include <vector>

namespace msdc {

// Normalized second-order section: b0 + b1 z^-1 + b2 z^-2 over
// 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  std::array<double, 3> b{1.0, 0.0, 0.0};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

// Digital Butterworth low-pass by the prewarped bilinear transform, as a
// cascade of sections with unit DC gain.
std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz,
                                        double sample_hz);

// |H(e^{jw})| of a section cascade at frequency f.
double magnitude_response(const std::vector<Biquad>& sos, double f_hz,
                          double sample_hz);

// Single forward pass, direct form II transposed, from rest.
std::vector<double> sosfilt(const std::vector<Biquad>& sos,
                            const std::vector<double>& x);

// Forward-backward pass with odd reflection padding and steady-state initial
// conditions; zero phase, squared magnitude.
std::vector<double> filtfilt(const std::vector<Biquad>& sos,
                             const std::vector<double>& x);

// Zero-phase Butterworth smoothing of an acceleration series sampled at dt.
std::vector<double> lowpass_accel(const std::vector<double>& series, double dt,
                                  double cutoff_hz, int order = 2);

}  // namespace msdc
