// Mapping between frequency, cents and the 360-bin activation space:
// Gaussian training targets and local-weighted-average decoding.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "deepf0/errors.hpp"

namespace deepf0 {

inline constexpr double kFRefHz = 10.0;        // anchor of the cents scale
inline constexpr double kGridMinHz = 32.70;
inline constexpr std::size_t kGridBins = 360;
inline constexpr double kGridSpacingCents = 20.0;
inline constexpr double kTargetSigmaCents = 25.0;

inline double hz_to_cents(double f_hz) {
  if (!(f_hz > 0.0)) {
    throw DomainError("hz_to_cents: frequency must be positive, got " +
                      std::to_string(f_hz));
  }
  return 1200.0 * std::log2(f_hz / kFRefHz);
}

inline double cents_to_hz(double cents) {
  return kFRefHz * std::exp2(cents / 1200.0);
}

// The fixed pitch-bin grid: 360 centers, 20 cents apart, anchored at
// 32.70 Hz. (With that anchor and spacing the top bin lands near 2068 Hz.)
struct CentsGrid {
  std::vector<double> bin_centers;

  CentsGrid() {
    bin_centers.resize(kGridBins);
    const double base = hz_to_cents(kGridMinHz);
    for (std::size_t i = 0; i < kGridBins; ++i) {
      bin_centers[i] = base + kGridSpacingCents * static_cast<double>(i);
    }
  }

  std::size_t size() const { return bin_centers.size(); }
};

struct PitchEstimate {
  double cents = 0.0;
  double hz = 0.0;
  double confidence = 0.0;  // peak activation
};

// Gaussian target centered on the true pitch: y_i = exp(-(c_i-c)^2 / (2 s^2))
// with s = 25 cents.
template <typename T = float>
std::vector<T> make_target(double f0_hz, const CentsGrid& grid) {
  const double c_true = hz_to_cents(f0_hz);  // throws on f0 <= 0
  const double denom = 2.0 * kTargetSigmaCents * kTargetSigmaCents;
  std::vector<T> y(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = grid.bin_centers[i] - c_true;
    y[i] = static_cast<T>(std::exp(-d * d / denom));
  }
  return y;
}

// Local weighted average of bin centers around the activation peak:
//   m = argmax y (lowest index on ties)
//   c = sum_{i=m-4..m+4} y_i c_i / sum y_i, window clipped to the grid.
template <typename T>
PitchEstimate decode(const std::vector<T>& activations,
                     const CentsGrid& grid) {
  if (activations.size() != grid.size()) {
    throw ShapeError("decode: expected " + std::to_string(grid.size()) +
                     " activations, got " + std::to_string(activations.size()));
  }
  std::size_t m = 0;
  double peak = -1.0;
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const double a = static_cast<double>(activations[i]);
    if (!std::isfinite(a)) throw NumericError("decode: non-finite activation");
    if (a > peak) {
      peak = a;
      m = i;
    }
  }
  if (!(peak > 0.0)) {
    throw DomainError("decode: no activation peak (degenerate input)");
  }

  const std::size_t lo = m >= 4 ? m - 4 : 0;
  const std::size_t hi = std::min(m + 4, grid.size() - 1);
  double num = 0.0, den = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) {
    const double a = static_cast<double>(activations[i]);
    num = std::fma(a, grid.bin_centers[i], num);  // pinned rounding
    den += a;
  }

  PitchEstimate est;
  est.cents = num / den;
  est.hz = cents_to_hz(est.cents);
  est.confidence = peak;
  return est;
}

}  // namespace deepf0
