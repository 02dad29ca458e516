// Weight file format ("DF0W"): magic, format version, config block, shape
// table, then the parameter payload as little-endian 32-bit IEEE-754 floats
// in declared tensor order. Round-trips are bit-exact.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/model.hpp"

namespace deepf0 {

inline constexpr char kWeightMagic[4] = {'D', 'F', '0', 'W'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("weights: truncated file");
  }
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
  std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

// Shapes in declared tensor order, derived from the config alone.
inline std::vector<std::vector<std::uint32_t>> tensor_shapes(
    const DeepF0Config& c) {
  std::vector<std::vector<std::uint32_t>> shapes;
  auto conv = [&shapes](std::size_t ic, std::size_t oc, std::size_t k) {
    shapes.push_back({static_cast<std::uint32_t>(oc),
                      static_cast<std::uint32_t>(ic),
                      static_cast<std::uint32_t>(k)});
    shapes.push_back({static_cast<std::uint32_t>(oc)});
    shapes.push_back({static_cast<std::uint32_t>(oc)});
  };
  conv(1, c.channels, c.first_kernel);
  for (std::size_t i = 0; i < c.dilations.size(); ++i) {
    conv(c.channels, c.channels, c.block_kernel);
    conv(c.channels, c.channels, 1);
  }
  shapes.push_back({static_cast<std::uint32_t>(c.bins),
                    static_cast<std::uint32_t>(c.dense_in())});
  shapes.push_back({static_cast<std::uint32_t>(c.bins)});
  return shapes;
}

}  // namespace detail

inline void save_weights(const ModelParams<float>& params,
                         const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("weights: cannot open for writing: " + path);

  const DeepF0Config& c = params.config;
  os.write(kWeightMagic, 4);
  detail::write_u32(os, kWeightFormatVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(c.frame_length));
  detail::write_u32(os, static_cast<std::uint32_t>(c.channels));
  detail::write_u32(os, static_cast<std::uint32_t>(c.first_kernel));
  detail::write_u32(os, static_cast<std::uint32_t>(c.block_kernel));
  detail::write_u32(os, static_cast<std::uint32_t>(c.pool));
  detail::write_u32(os, static_cast<std::uint32_t>(c.bins));
  std::uint32_t flags = (c.use_residual ? 1u : 0u) | (c.use_dropout ? 2u : 0u);
  detail::write_u32(os, flags);
  detail::write_f32(os, static_cast<float>(c.dropout_rate));
  detail::write_u32(os, static_cast<std::uint32_t>(c.dilations.size()));
  for (std::size_t d : c.dilations) {
    detail::write_u32(os, static_cast<std::uint32_t>(d));
  }

  const auto shapes = detail::tensor_shapes(c);
  detail::write_u32(os, static_cast<std::uint32_t>(shapes.size()));
  for (const auto& s : shapes) {
    detail::write_u32(os, static_cast<std::uint32_t>(s.size()));
    for (std::uint32_t dim : s) detail::write_u32(os, dim);
  }

  for_each_tensor(params, [&os](const std::vector<float>& t) {
    for (float v : t) detail::write_f32(os, v);
  });
  if (!os) throw FormatError("weights: write failed: " + path);
}

inline ModelParams<float> load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("weights: cannot open: " + path);

  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kWeightMagic, 4) != 0) {
    throw FormatError("weights: bad magic in " + path);
  }
  std::uint32_t version = detail::read_u32(is);
  if (version != kWeightFormatVersion) {
    throw FormatError("weights: unsupported format version " +
                      std::to_string(version));
  }
  DeepF0Config c;
  c.frame_length = detail::read_u32(is);
  c.channels = detail::read_u32(is);
  c.first_kernel = detail::read_u32(is);
  c.block_kernel = detail::read_u32(is);
  c.pool = detail::read_u32(is);
  c.bins = detail::read_u32(is);
  std::uint32_t flags = detail::read_u32(is);
  c.use_residual = (flags & 1u) != 0;
  c.use_dropout = (flags & 2u) != 0;
  c.dropout_rate = detail::read_f32(is);
  std::uint32_t n_dil = detail::read_u32(is);
  c.dilations.clear();
  for (std::uint32_t i = 0; i < n_dil; ++i) {
    c.dilations.push_back(detail::read_u32(is));
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("weights: invalid config block: ") +
                      e.what());
  }

  const auto expected = detail::tensor_shapes(c);
  std::uint32_t n_tensors = detail::read_u32(is);
  if (n_tensors != expected.size()) {
    throw FormatError("weights: shape table has " + std::to_string(n_tensors) +
                      " tensors, config implies " +
                      std::to_string(expected.size()));
  }
  for (const auto& s : expected) {
    std::uint32_t ndims = detail::read_u32(is);
    if (ndims != s.size()) {
      throw FormatError("weights: shape table rank mismatch");
    }
    for (std::uint32_t dim : s) {
      if (detail::read_u32(is) != dim) {
        throw FormatError("weights: shape table mismatch vs config block");
      }
    }
  }

  // Allocate from the config, then fill the payload in declared order.
  ModelParams<float> params = build<float>(c, 0);
  for_each_tensor(params, [&is](std::vector<float>& t) {
    for (float& v : t) v = detail::read_f32(is);
  });
  // Trailing garbage is as much a format violation as truncation.
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("weights: trailing bytes after payload");
  }
  return params;
}

}  // namespace deepf0
