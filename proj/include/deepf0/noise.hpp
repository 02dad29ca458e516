// SNR-controlled mixing of an interference signal into clean audio, and
// measurement of the achieved SNR.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/rng.hpp"

namespace deepf0 {

struct SnrSpec {
  double snr_db = 0.0;
  std::uint64_t seed = 0;  // noise-segment selection
};

// Mean of squared samples.
inline double rms_power(const std::vector<float>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc / static_cast<double>(x.size());
}

namespace detail {

// Noise segment of the signal's length. Longer noise is trimmed from a
// seed-chosen offset; shorter noise is looped from a seed-chosen offset.
// Equal lengths pass through unshifted.
inline std::vector<float> noise_segment(const std::vector<float>& noise,
                                        std::size_t length,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> seg(length);
  if (noise.size() >= length) {
    const std::size_t offset =
        static_cast<std::size_t>(rng.below(noise.size() - length + 1));
    std::copy(noise.begin() + static_cast<std::ptrdiff_t>(offset),
              noise.begin() + static_cast<std::ptrdiff_t>(offset + length),
              seg.begin());
  } else {
    const std::size_t offset =
        static_cast<std::size_t>(rng.below(noise.size()));
    for (std::size_t i = 0; i < length; ++i) {
      seg[i] = noise[(offset + i) % noise.size()];
    }
  }
  return seg;
}

}  // namespace detail

// mixed = signal + alpha * noise, alpha = sqrt(P_s / (P_n * 10^(snr/10))),
// with P_n taken over the exact noise segment used. The output is not
// re-normalized; samples may leave [-1, 1].
inline std::vector<float> mix_at_snr(const std::vector<float>& signal,
                                     const std::vector<float>& noise,
                                     const SnrSpec& spec) {
  if (signal.empty() || noise.empty()) {
    throw DomainError("mix_at_snr: empty signal or noise");
  }
  if (!std::isfinite(spec.snr_db)) {
    throw DomainError("mix_at_snr: non-finite SNR");
  }
  const double p_signal = rms_power(signal);
  if (!(p_signal > 0.0)) throw DomainError("mix_at_snr: silent signal");

  std::vector<float> seg =
      detail::noise_segment(noise, signal.size(), spec.seed);
  const double p_noise = rms_power(seg);
  if (!(p_noise > 0.0)) throw DomainError("mix_at_snr: silent noise");

  const double alpha =
      std::sqrt(p_signal / (p_noise * std::pow(10.0, spec.snr_db / 10.0)));
  std::vector<float> mixed(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    mixed[i] = static_cast<float>(static_cast<double>(signal[i]) +
                                  alpha * static_cast<double>(seg[i]));
  }
  return mixed;
}

// 10 log10(P_clean / P_residual) with residual = mixed - clean.
// A zero residual reports +inf.
inline double measure_snr(const std::vector<float>& clean,
                          const std::vector<float>& mixed) {
  if (clean.size() != mixed.size()) {
    throw ShapeError("measure_snr: length mismatch");
  }
  if (clean.empty()) throw DomainError("measure_snr: empty input");
  double p_clean = 0.0, p_res = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double c = clean[i];
    const double r = static_cast<double>(mixed[i]) - c;
    p_clean += c * c;
    p_res += r * r;
  }
  if (p_res == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(p_clean / p_res);
}

}  // namespace deepf0
