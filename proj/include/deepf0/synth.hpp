// Harmonic oracle-signal synthesis: phase-continuous tones and glides with
// exact labels, used to build desk-scale datasets with known ground truth.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/framing.hpp"
#include "deepf0/wav.hpp"

namespace deepf0 {

inline constexpr double kSynthMinF0 = 32.7;
inline constexpr double kSynthMaxF0 = 1975.5;
inline constexpr double kSynthPeak = 0.9;

namespace detail {

// Instantaneous f0 from a label track: linear between two voiced neighbors,
// held otherwise; 0 in unvoiced spans.
inline double f0_at(const LabelTrack& track, double t) {
  const auto& ts = track.times_s;
  if (ts.empty()) return 0.0;
  if (t <= ts.front()) return track.f0_hz.front();
  if (t >= ts.back()) return track.f0_hz.back();
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  const double fa = track.f0_hz[lo], fb = track.f0_hz[hi];
  if (fa > 0.0 && fb > 0.0) {
    const double u = (t - ts[lo]) / (ts[hi] - ts[lo]);
    return fa + u * (fb - fa);
  }
  return fa;  // hold across a voicing boundary until the next label
}

}  // namespace detail

// Sum of `harmonics` sine partials, amplitude of partial h scaled by
// decay^(h-1), peak-normalized to 0.9. Harmonics above Nyquist are dropped.
// Unvoiced spans are silent; phases freeze there.
inline std::pair<AudioClip, LabelTrack> synth_harmonic(
    const LabelTrack& f0_track, double duration_s, std::size_t harmonics,
    double decay) {
  if (harmonics < 1) throw DomainError("synth: harmonics must be >= 1");
  for (double f0 : f0_track.f0_hz) {
    if (f0 != 0.0 && (f0 < kSynthMinF0 || f0 > kSynthMaxF0)) {
      throw DomainError("synth: f0 " + std::to_string(f0) +
                        " outside [32.7, 1975.5] Hz");
    }
  }

  AudioClip clip;
  clip.sample_rate = kTargetRateHz;
  const std::size_t n =
      static_cast<std::size_t>(std::llround(duration_s * kTargetRateHz));
  clip.samples.resize(n, 0.0f);
  if (n == 0) return {clip, f0_track};

  const double nyquist = kTargetRateHz / 2.0;
  const double two_pi = 2.0 * 3.14159265358979323846;
  std::vector<double> phase(harmonics, 0.0);
  float peak = 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kTargetRateHz;
    const double f0 = detail::f0_at(f0_track, t);
    if (f0 <= 0.0) continue;
    double acc = 0.0;
    double amp = 1.0;
    for (std::size_t h = 0; h < harmonics; ++h, amp *= decay) {
      const double fh = f0 * static_cast<double>(h + 1);
      if (fh >= nyquist) break;
      phase[h] += two_pi * fh / kTargetRateHz;
      acc += amp * std::sin(phase[h]);
    }
    clip.samples[i] = static_cast<float>(acc);
    peak = std::max(peak, std::abs(clip.samples[i]));
  }
  if (peak > 0.0f) {
    const float scale = static_cast<float>(kSynthPeak) / peak;
    for (float& s : clip.samples) s *= scale;
  }
  return {clip, f0_track};
}

// ---------------------------------------------------------------------------
// Desk-scale corpus description

struct SynthTrackSpec {
  std::string name;
  std::string group;
  double duration_s = 1.0;
  std::string kind = "tone";  // "tone" or "glide"
  double f0_start = 440.0;
  double f0_end = 440.0;  // glide target
  std::size_t harmonics = 4;
  double decay = 0.6;
};

// Labels on the 10 ms hop grid. Glides are log-linear in frequency
// (a straight line in cents).
inline LabelTrack synth_track_labels(const SynthTrackSpec& spec) {
  LabelTrack track;
  const double hop_s =
      static_cast<double>(kHopSamples) / static_cast<double>(kTargetRateHz);
  const std::size_t n_labels =
      static_cast<std::size_t>(std::floor(spec.duration_s / hop_s)) + 1;
  for (std::size_t i = 0; i < n_labels; ++i) {
    const double t = static_cast<double>(i) * hop_s;
    double f0;
    if (spec.kind == "glide") {
      const double u = spec.duration_s > 0.0 ? t / spec.duration_s : 0.0;
      f0 = spec.f0_start * std::pow(spec.f0_end / spec.f0_start, u);
    } else if (spec.kind == "tone") {
      f0 = spec.f0_start;
    } else {
      throw ConfigError("synth: unknown track kind '" + spec.kind + "'");
    }
    track.times_s.push_back(t);
    track.f0_hz.push_back(f0);
  }
  return track;
}

inline std::pair<AudioClip, LabelTrack> synth_track(
    const SynthTrackSpec& spec) {
  LabelTrack labels = synth_track_labels(spec);
  auto [clip, out_labels] =
      synth_harmonic(labels, spec.duration_s, spec.harmonics, spec.decay);
  return {std::move(clip), std::move(out_labels)};
}

// One track per line:
//   name,group,duration_s,kind,f0_start,f0_end,harmonics,decay
inline std::vector<SynthTrackSpec> parse_synth_spec(std::istream& is,
                                                    const std::string& origin) {
  std::vector<SynthTrackSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line_no == 1 && line.find("name") != std::string::npos) continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 8) {
      throw FormatError(origin + ":" + std::to_string(line_no) +
                        ": expected 8 fields, got " +
                        std::to_string(fields.size()));
    }
    SynthTrackSpec s;
    s.name = fields[0];
    s.group = fields[1];
    try {
      s.duration_s = std::stod(fields[2]);
      s.kind = fields[3];
      s.f0_start = std::stod(fields[4]);
      s.f0_end = std::stod(fields[5]);
      s.harmonics = static_cast<std::size_t>(std::stoul(fields[6]));
      s.decay = std::stod(fields[7]);
    } catch (const std::exception&) {
      throw FormatError(origin + ":" + std::to_string(line_no) +
                        ": non-numeric field");
    }
    specs.push_back(std::move(s));
  }
  return specs;
}

}  // namespace deepf0
