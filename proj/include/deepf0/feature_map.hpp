// FeatureMap: a (channels x time) activation grid, plus the two hot
// inner-loop primitives (axpy, dot) the convolution kernels are built from.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "deepf0/errors.hpp"

namespace deepf0 {

// Row-major (channel, time) grid. A row is one channel, contiguous in time,
// which is what keeps the convolution inner loops stride-1.
template <typename T>
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<T> data;  // size = channels * length

  FeatureMap() = default;
  FeatureMap(std::size_t ch, std::size_t len)
      : channels(ch), length(len), data(ch * len, T(0)) {}

  T* row(std::size_t c) { return data.data() + c * length; }
  const T* row(std::size_t c) const { return data.data() + c * length; }

  T& at(std::size_t c, std::size_t t) { return data[c * length + t]; }
  T at(std::size_t c, std::size_t t) const { return data[c * length + t]; }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }
};

namespace detail {

// y[i] += a * x[i]. Stride-1 FMA loop; compilers vectorize this as-is.
template <typename T>
inline void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Dot product. The simd pragma licenses the lane-parallel reduction for
// this loop alone; the lane count is fixed at compile time, so results are
// reproducible run to run for a given build.
template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  T acc = T(0);
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace detail
}  // namespace deepf0
