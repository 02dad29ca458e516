// Frame extraction and label handling: 1024-sample frames on a 10 ms hop,
// centered, zero-padded at clip edges, normalized to zero mean / unit
// variance per frame.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/wav.hpp"

namespace deepf0 {

inline constexpr std::size_t kFrameLength = 1024;
inline constexpr std::size_t kHopSamples = 160;  // 10 ms at 16 kHz
inline constexpr double kVarianceFloor = 1e-8;
inline constexpr double kLabelAlignWindowS = 0.010;

// Time-stamped reference f0 values; f0 = 0 denotes unvoiced.
struct LabelTrack {
  std::vector<double> times_s;
  std::vector<double> f0_hz;

  std::size_t size() const { return times_s.size(); }
};

struct FrameSeries {
  std::vector<std::vector<float>> frames;  // each kFrameLength long
  std::vector<double> centers_s;
  std::vector<bool> has_label;
  std::vector<double> label_f0;  // valid where has_label; 0 = unvoiced
};

// "time_sec,f0_hz" per line, '#' comments, strictly increasing times.
inline LabelTrack parse_labels(std::istream& is, const std::string& origin) {
  LabelTrack track;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    // skip blanks (and a possible header row)
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line_no == 1 && line.find("time") != std::string::npos) continue;

    std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(line_no) +
                        ": expected 'time_sec,f0_hz'");
    }
    double t, f0;
    try {
      std::size_t used = 0;
      t = std::stod(line.substr(0, comma), &used);
      f0 = std::stod(line.substr(comma + 1), &used);
    } catch (const std::exception&) {
      throw FormatError(origin + ":" + std::to_string(line_no) +
                        ": non-numeric field");
    }
    if (f0 < 0.0) {
      throw FormatError(origin + ":" + std::to_string(line_no) +
                        ": negative f0");
    }
    if (!track.times_s.empty() && t <= track.times_s.back()) {
      throw FormatError(origin + ":" + std::to_string(line_no) +
                        ": non-increasing time");
    }
    track.times_s.push_back(t);
    track.f0_hz.push_back(f0);
  }
  return track;
}

inline LabelTrack parse_labels(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("labels: cannot open: " + path);
  return parse_labels(is, path);
}

inline void write_labels(const LabelTrack& track, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("labels: cannot open for writing: " + path);
  os << "time_sec,f0_hz\n";
  char buf[64];
  for (std::size_t i = 0; i < track.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", track.times_s[i],
                  track.f0_hz[i]);
    os << buf;
  }
}

namespace detail {

// Nearest label timestamp within the alignment window, if any.
inline std::optional<std::size_t> nearest_label(const LabelTrack& labels,
                                                double t) {
  if (labels.size() == 0) return std::nullopt;
  const auto& ts = labels.times_s;
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  std::size_t best = ts.size();
  double best_d = kLabelAlignWindowS + 1e-9;
  if (it != ts.end()) {
    double d = std::abs(*it - t);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(it - ts.begin());
    }
  }
  if (it != ts.begin()) {
    double d = std::abs(*(it - 1) - t);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(it - 1 - ts.begin());
    }
  }
  if (best == ts.size()) return std::nullopt;
  return best;
}

}  // namespace detail

// Cuts frames centered at t_i = i * hop / 16000, normalizes each to zero
// mean and unit variance (variance floor 1e-8), and assigns the nearest
// label within 10 ms when labels are given.
inline FrameSeries frame_clip(const AudioClip& clip,
                              const LabelTrack* labels = nullptr) {
  if (clip.sample_rate != kTargetRateHz && !clip.samples.empty()) {
    throw DomainError("frame_clip: clip must be resampled to 16 kHz first");
  }
  FrameSeries series;
  if (clip.samples.empty()) return series;

  const std::size_t n = clip.samples.size();
  const std::size_t n_frames = n / kHopSamples + 1;
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kFrameLength) / 2;

  series.frames.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(i * kHopSamples);
    std::vector<float> frame(kFrameLength, 0.0f);
    double mean = 0.0;
    for (std::size_t k = 0; k < kFrameLength; ++k) {
      const std::ptrdiff_t j = center - half + static_cast<std::ptrdiff_t>(k);
      if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) {
        frame[k] = clip.samples[static_cast<std::size_t>(j)];
      }
      mean += frame[k];
    }
    mean /= static_cast<double>(kFrameLength);
    double var = 0.0;
    for (float v : frame) {
      const double d = v - mean;
      var += d * d;
    }
    var /= static_cast<double>(kFrameLength);
    const double inv_std = 1.0 / std::sqrt(std::max(var, kVarianceFloor));
    for (float& v : frame) {
      v = static_cast<float>((v - mean) * inv_std);
    }

    const double t = static_cast<double>(i * kHopSamples) / kTargetRateHz;
    series.frames.push_back(std::move(frame));
    series.centers_s.push_back(t);
    if (labels != nullptr) {
      auto idx = detail::nearest_label(*labels, t);
      series.has_label.push_back(idx.has_value());
      series.label_f0.push_back(idx ? labels->f0_hz[*idx] : 0.0);
    } else {
      series.has_label.push_back(false);
      series.label_f0.push_back(0.0);
    }
  }
  return series;
}

}  // namespace deepf0
