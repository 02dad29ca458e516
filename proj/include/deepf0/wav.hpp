// Minimal RIFF/WAVE reader and writer: PCM 16-bit and IEEE-float 32-bit,
// mono or stereo. Stereo collapses to mono via an explicit channel choice
// (some corpora carry voice on one channel and accompaniment on the other).
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "deepf0/errors.hpp"

namespace deepf0 {

// Pipeline sample rate; everything downstream of ingest runs at 16 kHz.
inline constexpr std::uint32_t kTargetRateHz = 16000;

struct AudioClip {
  std::vector<float> samples;   // mono, nominally in [-1, 1]
  std::uint32_t sample_rate = 0;

  double duration_s() const {
    return sample_rate == 0
               ? 0.0
               : static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class ChannelSelect { kMix, kLeft, kRight };

namespace detail {

inline std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline AudioClip load_wav(const std::string& path,
                          ChannelSelect select = ChannelSelect::kMix) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("wav: cannot open: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("wav: not a RIFF/WAVE file: " + path);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;
  bool have_data = false;

  // Walk the chunk list; chunks are word-aligned.
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + off;
    std::uint32_t chunk_size = detail::rd_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (off + 8 + chunk_size > bytes.size()) {
      throw FormatError("wav: chunk overruns file: " + path);
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("wav: short fmt chunk");
      format = detail::rd_u16(body);
      channels = detail::rd_u16(body + 2);
      rate = detail::rd_u32(body + 4);
      bits = detail::rd_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_size = chunk_size;
      have_data = true;
    }
    off += 8 + chunk_size + (chunk_size & 1);
  }
  if (!have_fmt || !have_data) {
    throw FormatError("wav: missing fmt or data chunk: " + path);
  }
  if (channels != 1 && channels != 2) {
    throw FormatError("wav: unsupported channel count " +
                      std::to_string(channels));
  }
  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32) {
    throw FormatError("wav: unsupported codec (format=" +
                      std::to_string(format) + ", bits=" +
                      std::to_string(bits) + "); PCM16 or float32 only");
  }

  const std::uint32_t bytes_per_sample = bits / 8;
  const std::uint32_t stride = bytes_per_sample * channels;
  const std::uint32_t n_frames = stride == 0 ? 0 : data_size / stride;

  auto sample_at = [&](std::uint32_t frame, std::uint16_t ch) -> float {
    const unsigned char* p = data + frame * stride + ch * bytes_per_sample;
    if (pcm16) {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<float>(v) / 32768.0f;
    }
    float v;
    std::memcpy(&v, p, 4);
    return v;
  };

  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n_frames);
  for (std::uint32_t i = 0; i < n_frames; ++i) {
    if (channels == 1) {
      clip.samples[i] = sample_at(i, 0);
    } else {
      switch (select) {
        case ChannelSelect::kLeft:
          clip.samples[i] = sample_at(i, 0);
          break;
        case ChannelSelect::kRight:
          clip.samples[i] = sample_at(i, 1);
          break;
        case ChannelSelect::kMix:
          clip.samples[i] = 0.5f * (sample_at(i, 0) + sample_at(i, 1));
          break;
      }
    }
  }
  return clip;
}

// Writes mono 16-bit PCM. Samples outside [-1, 1] are clamped; the number of
// clamped samples is returned so callers can warn.
inline std::size_t save_wav_pcm16(const AudioClip& clip,
                                  const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("wav: cannot open for writing: " + path);

  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_size = n * 2;
  auto wr_u32 = [&os](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  auto wr_u16 = [&os](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
  };

  os.write("RIFF", 4);
  wr_u32(36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  wr_u32(16);
  wr_u16(1);  // PCM
  wr_u16(1);  // mono
  wr_u32(clip.sample_rate);
  wr_u32(clip.sample_rate * 2);  // byte rate
  wr_u16(2);                     // block align
  wr_u16(16);
  os.write("data", 4);
  wr_u32(data_size);

  std::size_t clipped = 0;
  for (float s : clip.samples) {
    float c = s;
    if (c > 32767.0f / 32768.0f) {
      c = 32767.0f / 32768.0f;
      ++clipped;
    } else if (c < -1.0f) {
      c = -1.0f;
      ++clipped;
    }
    wr_u16(static_cast<std::uint16_t>(
        static_cast<std::int16_t>(std::lround(c * 32768.0f))));
  }
  if (!os) throw FormatError("wav: write failed: " + path);
  return clipped;
}

}  // namespace deepf0
