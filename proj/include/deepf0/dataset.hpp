// Dataset directory layout: <name>.wav + <name>.f0.csv per track, plus
// groups.csv mapping file name to group id (artist / speaker / instrument).
#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/framing.hpp"
#include "deepf0/noise.hpp"
#include "deepf0/resample.hpp"
#include "deepf0/wav.hpp"

namespace deepf0 {

struct Track {
  std::string name;
  std::string group;
  AudioClip clip;       // 16 kHz after loading
  LabelTrack labels;
  FrameSeries frames;   // filled by frame_tracks()
};

struct Dataset {
  std::vector<Track> tracks;

  std::vector<std::string> group_names() const {
    std::vector<std::string> names;
    for (const auto& t : tracks) {
      if (std::find(names.begin(), names.end(), t.group) == names.end()) {
        names.push_back(t.group);
      }
    }
    return names;
  }
};

inline std::map<std::string, std::string> read_groups_csv(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("dataset: cannot open " + path);
  std::map<std::string, std::string> groups;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line_no == 1 && line.find("file") != std::string::npos) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected 'file,group'");
    }
    std::string file = line.substr(0, comma);
    std::string group = line.substr(comma + 1);
    while (!group.empty() && (group.back() == '\r' || group.back() == ' ')) {
      group.pop_back();
    }
    groups[file] = group;
  }
  return groups;
}

// Loads every track listed in groups.csv, resampling audio to 16 kHz.
inline Dataset load_dataset(const std::string& dir,
                            ChannelSelect select = ChannelSelect::kMix) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root)) {
    throw ConfigError("dataset: not a directory: " + dir);
  }
  const fs::path groups_path = root / "groups.csv";
  if (!fs::exists(groups_path)) {
    throw ConfigError("dataset: missing groups.csv in " + dir);
  }
  Dataset ds;
  for (const auto& [name, group] : read_groups_csv(groups_path.string())) {
    Track t;
    t.name = name;
    t.group = group;
    const fs::path wav_path = root / (name + ".wav");
    const fs::path f0_path = root / (name + ".f0.csv");
    if (!fs::exists(wav_path)) {
      throw ConfigError("dataset: missing audio file " + wav_path.string());
    }
    if (!fs::exists(f0_path)) {
      throw ConfigError("dataset: missing label file " + f0_path.string());
    }
    t.clip = resample_16k(load_wav(wav_path.string(), select));
    t.labels = parse_labels(f0_path.string());
    ds.tracks.push_back(std::move(t));
  }
  if (ds.tracks.empty()) throw ConfigError("dataset: no tracks in " + dir);
  return ds;
}

// Optionally corrupts each clip with noise at a fixed SNR before framing.
// Noise tracks are drawn round-robin from `noise_clips`.
inline void frame_tracks(Dataset& ds,
                         const std::vector<AudioClip>* noise_clips = nullptr,
                         const SnrSpec* snr = nullptr) {
  for (std::size_t i = 0; i < ds.tracks.size(); ++i) {
    Track& t = ds.tracks[i];
    if (noise_clips != nullptr && snr != nullptr && !noise_clips->empty()) {
      const AudioClip& noise = (*noise_clips)[i % noise_clips->size()];
      SnrSpec per_track = *snr;
      per_track.seed = snr->seed + i;
      AudioClip mixed;
      mixed.sample_rate = t.clip.sample_rate;
      mixed.samples = mix_at_snr(t.clip.samples, noise.samples, per_track);
      t.frames = frame_clip(mixed, &t.labels);
    } else {
      t.frames = frame_clip(t.clip, &t.labels);
    }
  }
}

inline void write_track(const std::string& dir, const std::string& name,
                        const AudioClip& clip, const LabelTrack& labels) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_wav_pcm16(clip, (fs::path(dir) / (name + ".wav")).string());
  write_labels(labels, (fs::path(dir) / (name + ".f0.csv")).string());
}

inline void write_groups_csv(const std::string& dir,
                             const std::vector<std::pair<std::string, std::string>>&
                                 file_groups) {
  namespace fs = std::filesystem;
  std::ofstream os(fs::path(dir) / "groups.csv");
  if (!os) throw FormatError("dataset: cannot write groups.csv in " + dir);
  os << "file,group\n";
  for (const auto& [file, group] : file_groups) {
    os << file << "," << group << "\n";
  }
}

}  // namespace deepf0
