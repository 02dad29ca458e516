// Raw pitch accuracy and raw chroma accuracy over frame-aligned
// reference/estimate tracks. Both ignore voicing errors: only
// reference-voiced frames are scored.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "deepf0/errors.hpp"

namespace deepf0 {

struct EvalPair {
  std::vector<double> ref_cents;
  std::vector<bool> ref_voiced;
  std::vector<double> est_cents;

  void check() const {
    if (ref_cents.size() != est_cents.size() ||
        ref_cents.size() != ref_voiced.size()) {
      throw ShapeError("EvalPair: frame count mismatch");
    }
  }
};

inline constexpr double kDefaultThresholdCents = 50.0;

// Octave fold bounded to |k| <= 6, which covers the full grid span.
inline double chroma_distance(double est, double ref) {
  double best = std::abs(est - ref);
  for (int k = -6; k <= 6; ++k) {
    best = std::min(best, std::abs(est - ref - 1200.0 * k));
  }
  return best;
}

inline double raw_pitch_accuracy(const EvalPair& pair,
                                 double threshold_cents = kDefaultThresholdCents) {
  pair.check();
  std::size_t voiced = 0, hits = 0;
  for (std::size_t i = 0; i < pair.ref_cents.size(); ++i) {
    if (!pair.ref_voiced[i]) continue;
    ++voiced;
    if (std::abs(pair.est_cents[i] - pair.ref_cents[i]) <= threshold_cents) {
      ++hits;
    }
  }
  if (voiced == 0) {
    throw DomainError("raw_pitch_accuracy: no voiced reference frames");
  }
  return static_cast<double>(hits) / static_cast<double>(voiced);
}

inline double raw_chroma_accuracy(const EvalPair& pair,
                                  double threshold_cents = kDefaultThresholdCents) {
  pair.check();
  std::size_t voiced = 0, hits = 0;
  for (std::size_t i = 0; i < pair.ref_cents.size(); ++i) {
    if (!pair.ref_voiced[i]) continue;
    ++voiced;
    if (chroma_distance(pair.est_cents[i], pair.ref_cents[i]) <=
        threshold_cents) {
      ++hits;
    }
  }
  if (voiced == 0) {
    throw DomainError("raw_chroma_accuracy: no voiced reference frames");
  }
  return static_cast<double>(hits) / static_cast<double>(voiced);
}

}  // namespace deepf0
