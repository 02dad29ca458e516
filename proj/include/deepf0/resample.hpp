// Polyphase windowed-sinc resampler: Kaiser window (beta = 14), 64 taps per
// phase, per-phase DC normalization. Same-rate input passes through
// bit-identical.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/wav.hpp"

namespace deepf0 {

inline constexpr int kResampleTaps = 64;
inline constexpr double kKaiserBeta = 14.0;

namespace detail {

// Zeroth-order modified Bessel function of the first kind (series form).
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < sum * 1e-16) break;
  }
  return sum;
}

inline double kaiser(double t, double half_width) {
  const double u = t / half_width;
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return bessel_i0(kKaiserBeta * std::sqrt(1.0 - u * u)) /
         bessel_i0(kKaiserBeta);
}

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = 3.14159265358979323846 * x;
  return std::sin(px) / px;
}

}  // namespace detail

// Resample to `out_rate`. Tap j of phase r sits at input offset
// (j - taps/2 + 1) - r/L from the anchor sample; the low-pass cutoff is the
// narrower of the two Nyquist limits.
inline AudioClip resample(const AudioClip& in, std::uint32_t out_rate) {
  if (in.sample_rate == 0) throw DomainError("resample: zero sample rate");
  if (in.sample_rate == out_rate || in.samples.empty()) {
    AudioClip out = in;
    out.sample_rate = out_rate;
    return out;
  }

  const std::uint64_t g = std::gcd<std::uint64_t>(out_rate, in.sample_rate);
  const std::uint64_t up = out_rate / g;          // L
  const std::uint64_t down = in.sample_rate / g;  // M

  const double cutoff =
      0.5 * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double half_width = kResampleTaps / 2.0;

  // Per-phase filter table, each phase normalized to unit DC gain.
  std::vector<double> table(up * kResampleTaps);
  for (std::uint64_t r = 0; r < up; ++r) {
    const double frac = static_cast<double>(r) / static_cast<double>(up);
    double* taps = table.data() + r * kResampleTaps;
    double sum = 0.0;
    for (int j = 0; j < kResampleTaps; ++j) {
      const double t = (j - kResampleTaps / 2 + 1) - frac;
      taps[j] = 2.0 * cutoff * detail::sinc(2.0 * cutoff * t) *
                detail::kaiser(t, half_width);
      sum += taps[j];
    }
    for (int j = 0; j < kResampleTaps; ++j) taps[j] /= sum;
  }

  const std::uint64_t n_in = in.samples.size();
  const std::uint64_t n_out = n_in * up / down;
  AudioClip out;
  out.sample_rate = out_rate;
  out.samples.resize(n_out);

  for (std::uint64_t n = 0; n < n_out; ++n) {
    const std::uint64_t num = n * down;
    const std::int64_t anchor = static_cast<std::int64_t>(num / up);
    const std::uint64_t phase = num % up;
    const double* taps = table.data() + phase * kResampleTaps;
    double acc = 0.0;
    for (int j = 0; j < kResampleTaps; ++j) {
      const std::int64_t idx = anchor + (j - kResampleTaps / 2 + 1);
      if (idx >= 0 && idx < static_cast<std::int64_t>(n_in)) {
        acc += taps[j] * in.samples[static_cast<std::size_t>(idx)];
      }
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

inline AudioClip resample_16k(const AudioClip& in) {
  return resample(in, kTargetRateHz);
}

}  // namespace deepf0
