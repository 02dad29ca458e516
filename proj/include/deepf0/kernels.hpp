// Differentiable numeric kernels: causal dilated convolution with weight
// normalization, activations, pooling, dense layer and BCE loss. Every
// forward op has a hand-written analytic backward next to it.
//
// Everything is templated on the scalar type: float in production, double
// in the finite-difference test suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "deepf0/errors.hpp"
#include "deepf0/feature_map.hpp"

namespace deepf0 {

// Convolution parameters in weight-normalized form: the effective kernel is
// w[oc] = gain[oc] * direction[oc] / ||direction[oc]||, per output channel.
template <typename T>
struct ConvParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 0;
  std::size_t dilation = 1;
  std::vector<T> direction;  // (oc, ic, k) row-major
  std::vector<T> gain;       // (oc)
  std::vector<T> bias;       // (oc)

  ConvParams() = default;
  ConvParams(std::size_t ic, std::size_t oc, std::size_t k, std::size_t d)
      : in_channels(ic),
        out_channels(oc),
        kernel_size(k),
        dilation(d),
        direction(oc * ic * k, T(0)),
        gain(oc, T(0)),
        bias(oc, T(0)) {}

  std::size_t taps() const { return in_channels * kernel_size; }
  std::size_t left_pad() const { return (kernel_size - 1) * dilation; }
};

// Gradients mirror the parameter layout.
template <typename T>
struct ConvGrads {
  std::vector<T> direction;
  std::vector<T> gain;
  std::vector<T> bias;

  explicit ConvGrads(const ConvParams<T>& p)
      : direction(p.direction.size(), T(0)),
        gain(p.gain.size(), T(0)),
        bias(p.bias.size(), T(0)) {}
};

// ---------------------------------------------------------------------------
// Weight normalization

// Effective weights w[oc] = g[oc] * v[oc] / ||v[oc]||_2, the norm taken over
// all (in_channel, tap) entries of output channel oc.
template <typename T>
std::vector<T> weight_norm_effective(const ConvParams<T>& p) {
  const std::size_t taps = p.taps();
  std::vector<T> w(p.direction.size());
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    const T* v = p.direction.data() + oc * taps;
    T norm = std::sqrt(detail::dot(v, v, taps));
    if (!(norm > T(0))) {
      throw NumericError("weight_norm: zero-norm direction in channel " +
                         std::to_string(oc));
    }
    T scale = p.gain[oc] / norm;
    T* wrow = w.data() + oc * taps;
    for (std::size_t j = 0; j < taps; ++j) wrow[j] = scale * v[j];
  }
  return w;
}

// Chain rule from grad w.r.t. effective weights back to (v, g):
//   dg = <dw, v> / ||v||
//   dv = g/||v|| * dw - g * <dw, v> / ||v||^3 * v
template <typename T>
void weight_norm_backward(const ConvParams<T>& p, const std::vector<T>& grad_w,
                          std::vector<T>& grad_v, std::vector<T>& grad_g) {
  const std::size_t taps = p.taps();
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    const T* v = p.direction.data() + oc * taps;
    const T* dw = grad_w.data() + oc * taps;
    T norm = std::sqrt(detail::dot(v, v, taps));
    T s = detail::dot(dw, v, taps);  // <dw, v>
    grad_g[oc] += s / norm;
    T a = p.gain[oc] / norm;
    T b = p.gain[oc] * s / (norm * norm * norm);
    T* dv = grad_v.data() + oc * taps;
    for (std::size_t j = 0; j < taps; ++j) dv[j] += a * dw[j] - b * v[j];
  }
}

// ---------------------------------------------------------------------------
// Causal dilated convolution

namespace detail {

// Input with (kernel_size-1)*dilation zeros prepended per channel, so the
// kernel loops never branch on boundaries. Tap k of the kernel reads
// xpad[t + k*d]; tap k = K-1 lands on the current sample.
template <typename T>
FeatureMap<T> left_pad(const FeatureMap<T>& x, std::size_t pad) {
  FeatureMap<T> xp(x.channels, x.length + pad);
  for (std::size_t c = 0; c < x.channels; ++c) {
    std::copy(x.row(c), x.row(c) + x.length, xp.row(c) + pad);
  }
  return xp;
}

}  // namespace detail

namespace detail {

// Accumulates a 4-output-channel, 4-tap tile: the four shifted input reads
// are shared across the four output rows, which is what keeps this kernel
// compute-bound instead of store-bound.
template <typename T>
inline void conv_tile_4x4(const T* xr, std::size_t d, std::size_t k0,
                          const T* w0, const T* w1, const T* w2, const T* w3,
                          T* o0, T* o1, T* o2, T* o3, std::size_t len) {
  const T w00 = w0[k0], w01 = w0[k0 + 1], w02 = w0[k0 + 2], w03 = w0[k0 + 3];
  const T w10 = w1[k0], w11 = w1[k0 + 1], w12 = w1[k0 + 2], w13 = w1[k0 + 3];
  const T w20 = w2[k0], w21 = w2[k0 + 1], w22 = w2[k0 + 2], w23 = w2[k0 + 3];
  const T w30 = w3[k0], w31 = w3[k0 + 1], w32 = w3[k0 + 2], w33 = w3[k0 + 3];
  const T* xa = xr + k0 * d;
  const T* xb = xa + d;
  const T* xc = xb + d;
  const T* xd = xc + d;
#pragma omp simd
  for (std::size_t t = 0; t < len; ++t) {
    const T v0 = xa[t], v1 = xb[t], v2 = xc[t], v3 = xd[t];
    o0[t] += w00 * v0 + w01 * v1 + w02 * v2 + w03 * v3;
    o1[t] += w10 * v0 + w11 * v1 + w12 * v2 + w13 * v3;
    o2[t] += w20 * v0 + w21 * v1 + w22 * v2 + w23 * v3;
    o3[t] += w30 * v0 + w31 * v1 + w32 * v2 + w33 * v3;
  }
}

}  // namespace detail

// Length-preserving causal convolution: output at time t depends only on
// inputs at times <= t.
template <typename T>
FeatureMap<T> conv1d_causal(const FeatureMap<T>& x, const ConvParams<T>& p) {
  if (x.channels != p.in_channels) {
    throw ShapeError("conv1d_causal: input has " + std::to_string(x.channels) +
                     " channels, kernel expects " +
                     std::to_string(p.in_channels));
  }
  if (!x.all_finite()) throw NumericError("conv1d_causal: non-finite input");

  const std::vector<T> w = weight_norm_effective(p);
  const std::size_t len = x.length;
  const std::size_t d = p.dilation;
  const std::size_t K = p.kernel_size;
  const FeatureMap<T> xpad = detail::left_pad(x, p.left_pad());

  FeatureMap<T> out(p.out_channels, len);
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    std::fill(out.row(oc), out.row(oc) + len, p.bias[oc]);
  }

  std::size_t oc = 0;
  for (; oc + 4 <= p.out_channels; oc += 4) {
    T* o0 = out.row(oc);
    T* o1 = out.row(oc + 1);
    T* o2 = out.row(oc + 2);
    T* o3 = out.row(oc + 3);
    for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
      const T* xr = xpad.row(ic);
      const T* w0 = w.data() + (oc + 0) * p.taps() + ic * K;
      const T* w1 = w.data() + (oc + 1) * p.taps() + ic * K;
      const T* w2 = w.data() + (oc + 2) * p.taps() + ic * K;
      const T* w3 = w.data() + (oc + 3) * p.taps() + ic * K;
      std::size_t k = 0;
      for (; k + 4 <= K; k += 4) {
        detail::conv_tile_4x4(xr, d, k, w0, w1, w2, w3, o0, o1, o2, o3, len);
      }
      for (; k < K; ++k) {
        detail::axpy(w0[k], xr + k * d, o0, len);
        detail::axpy(w1[k], xr + k * d, o1, len);
        detail::axpy(w2[k], xr + k * d, o2, len);
        detail::axpy(w3[k], xr + k * d, o3, len);
      }
    }
  }
  for (; oc < p.out_channels; ++oc) {
    T* orow = out.row(oc);
    const T* wrow = w.data() + oc * p.taps();
    for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
      const T* xrow = xpad.row(ic);
      for (std::size_t k = 0; k < K; ++k) {
        detail::axpy(wrow[ic * K + k], xrow + k * d, orow, len);
      }
    }
  }
  return out;
}

namespace detail {

// 16 simultaneous dot products: grad_w for a 4-output-channel, 4-tap tile.
template <typename T>
inline void gradw_tile_4x4(const T* xr, std::size_t d, std::size_t k0,
                           const T* g0, const T* g1, const T* g2, const T* g3,
                           T* gw0, T* gw1, T* gw2, T* gw3, std::size_t len) {
  T a00{}, a01{}, a02{}, a03{}, a10{}, a11{}, a12{}, a13{};
  T a20{}, a21{}, a22{}, a23{}, a30{}, a31{}, a32{}, a33{};
  const T* xa = xr + k0 * d;
  const T* xb = xa + d;
  const T* xc = xb + d;
  const T* xd = xc + d;
#pragma omp simd reduction(+ : a00, a01, a02, a03, a10, a11, a12, a13, a20, \
                               a21, a22, a23, a30, a31, a32, a33)
  for (std::size_t t = 0; t < len; ++t) {
    const T v0 = xa[t], v1 = xb[t], v2 = xc[t], v3 = xd[t];
    const T u0 = g0[t], u1 = g1[t], u2 = g2[t], u3 = g3[t];
    a00 += u0 * v0;
    a01 += u0 * v1;
    a02 += u0 * v2;
    a03 += u0 * v3;
    a10 += u1 * v0;
    a11 += u1 * v1;
    a12 += u1 * v2;
    a13 += u1 * v3;
    a20 += u2 * v0;
    a21 += u2 * v1;
    a22 += u2 * v2;
    a23 += u2 * v3;
    a30 += u3 * v0;
    a31 += u3 * v1;
    a32 += u3 * v2;
    a33 += u3 * v3;
  }
  gw0[k0] += a00;
  gw0[k0 + 1] += a01;
  gw0[k0 + 2] += a02;
  gw0[k0 + 3] += a03;
  gw1[k0] += a10;
  gw1[k0 + 1] += a11;
  gw1[k0 + 2] += a12;
  gw1[k0 + 3] += a13;
  gw2[k0] += a20;
  gw2[k0 + 1] += a21;
  gw2[k0 + 2] += a22;
  gw2[k0 + 3] += a23;
  gw3[k0] += a30;
  gw3[k0 + 1] += a31;
  gw3[k0 + 2] += a32;
  gw3[k0 + 3] += a33;
}

// Input-gradient tile in gather form: gx_ic[s] += sum_k w[k] * gpad[s + pad
// - k*d] over a right-zero-padded upstream gradient row. Four destination
// rows (input channels) share the four shifted source reads.
template <typename T>
inline void gradx_tile_4x4(const T* gpad, std::size_t pad, std::size_t d,
                           std::size_t k0, const T* w0, const T* w1,
                           const T* w2, const T* w3, T* x0, T* x1, T* x2,
                           T* x3, std::size_t len) {
  const T w00 = w0[k0], w01 = w0[k0 + 1], w02 = w0[k0 + 2], w03 = w0[k0 + 3];
  const T w10 = w1[k0], w11 = w1[k0 + 1], w12 = w1[k0 + 2], w13 = w1[k0 + 3];
  const T w20 = w2[k0], w21 = w2[k0 + 1], w22 = w2[k0 + 2], w23 = w2[k0 + 3];
  const T w30 = w3[k0], w31 = w3[k0 + 1], w32 = w3[k0 + 2], w33 = w3[k0 + 3];
  const T* ga = gpad + pad - k0 * d;
  const T* gb = ga - d;
  const T* gc = gb - d;
  const T* gd = gc - d;
#pragma omp simd
  for (std::size_t s = 0; s < len; ++s) {
    const T v0 = ga[s], v1 = gb[s], v2 = gc[s], v3 = gd[s];
    x0[s] += w00 * v0 + w01 * v1 + w02 * v2 + w03 * v3;
    x1[s] += w10 * v0 + w11 * v1 + w12 * v2 + w13 * v3;
    x2[s] += w20 * v0 + w21 * v1 + w22 * v2 + w23 * v3;
    x3[s] += w30 * v0 + w31 * v1 + w32 * v2 + w33 * v3;
  }
}

}  // namespace detail

// Exact analytic gradients of conv1d_causal, including the chain through the
// weight-norm reparameterization. grad_x is computed only when requested
// (the first layer of the network has no upstream input gradient).
template <typename T>
void conv1d_backward(const FeatureMap<T>& x, const ConvParams<T>& p,
                     const FeatureMap<T>& grad_out, ConvGrads<T>& grads,
                     FeatureMap<T>* grad_x) {
  if (x.channels != p.in_channels) {
    throw ShapeError("conv1d_backward: input channel mismatch");
  }
  if (grad_out.channels != p.out_channels || grad_out.length != x.length) {
    throw ShapeError("conv1d_backward: grad_out shape mismatch");
  }

  const std::size_t len = x.length;
  const std::size_t d = p.dilation;
  const std::size_t K = p.kernel_size;
  const std::size_t pad = p.left_pad();
  const std::size_t taps = p.taps();
  const FeatureMap<T> xpad = detail::left_pad(x, pad);

  // d(loss)/d(effective weights) and bias.
  std::vector<T> grad_w(p.direction.size(), T(0));
  std::size_t oc = 0;
  for (; oc + 4 <= p.out_channels; oc += 4) {
    const T* g0 = grad_out.row(oc);
    const T* g1 = grad_out.row(oc + 1);
    const T* g2 = grad_out.row(oc + 2);
    const T* g3 = grad_out.row(oc + 3);
    for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
      const T* xr = xpad.row(ic);
      T* gw0 = grad_w.data() + (oc + 0) * taps + ic * K;
      T* gw1 = grad_w.data() + (oc + 1) * taps + ic * K;
      T* gw2 = grad_w.data() + (oc + 2) * taps + ic * K;
      T* gw3 = grad_w.data() + (oc + 3) * taps + ic * K;
      std::size_t k = 0;
      for (; k + 4 <= K; k += 4) {
        detail::gradw_tile_4x4(xr, d, k, g0, g1, g2, g3, gw0, gw1, gw2, gw3,
                               len);
      }
      for (; k < K; ++k) {
        gw0[k] += detail::dot(g0, xr + k * d, len);
        gw1[k] += detail::dot(g1, xr + k * d, len);
        gw2[k] += detail::dot(g2, xr + k * d, len);
        gw3[k] += detail::dot(g3, xr + k * d, len);
      }
    }
  }
  for (; oc < p.out_channels; ++oc) {
    const T* grow = grad_out.row(oc);
    T* gw = grad_w.data() + oc * taps;
    for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
      const T* xrow = xpad.row(ic);
      for (std::size_t k = 0; k < K; ++k) {
        gw[ic * K + k] += detail::dot(grow, xrow + k * d, len);
      }
    }
  }
  for (std::size_t c = 0; c < p.out_channels; ++c) {
    const T* grow = grad_out.row(c);
    T acc = T(0);
#pragma omp simd reduction(+ : acc)
    for (std::size_t t = 0; t < len; ++t) acc += grow[t];
    grads.bias[c] += acc;
  }
  weight_norm_backward(p, grad_w, grads.direction, grads.gain);

  if (grad_x != nullptr) {
    const std::vector<T> w = weight_norm_effective(p);
    *grad_x = FeatureMap<T>(p.in_channels, len);
    // Upstream gradient rows, zero-padded on the right, so the gather form
    // gx[s] = sum_k w[k] * gpad[s + pad - k*d] never branches on bounds.
    std::vector<T> gpad(len + pad);
    for (std::size_t c = 0; c < p.out_channels; ++c) {
      std::copy(grad_out.row(c), grad_out.row(c) + len, gpad.begin());
      std::fill(gpad.begin() + static_cast<std::ptrdiff_t>(len), gpad.end(),
                T(0));
      std::size_t ic = 0;
      for (; ic + 4 <= p.in_channels; ic += 4) {
        const T* w0 = w.data() + c * taps + (ic + 0) * K;
        const T* w1 = w.data() + c * taps + (ic + 1) * K;
        const T* w2 = w.data() + c * taps + (ic + 2) * K;
        const T* w3 = w.data() + c * taps + (ic + 3) * K;
        std::size_t k = 0;
        for (; k + 4 <= K; k += 4) {
          detail::gradx_tile_4x4(gpad.data(), pad, d, k, w0, w1, w2, w3,
                                 grad_x->row(ic), grad_x->row(ic + 1),
                                 grad_x->row(ic + 2), grad_x->row(ic + 3),
                                 len);
        }
        for (; k < K; ++k) {
          detail::axpy(w0[k], gpad.data() + pad - k * d, grad_x->row(ic), len);
          detail::axpy(w1[k], gpad.data() + pad - k * d, grad_x->row(ic + 1),
                       len);
          detail::axpy(w2[k], gpad.data() + pad - k * d, grad_x->row(ic + 2),
                       len);
          detail::axpy(w3[k], gpad.data() + pad - k * d, grad_x->row(ic + 3),
                       len);
        }
      }
      for (; ic < p.in_channels; ++ic) {
        const T* wrow = w.data() + c * taps + ic * K;
        for (std::size_t k = 0; k < K; ++k) {
          detail::axpy(wrow[k], gpad.data() + pad - k * d, grad_x->row(ic),
                       len);
        }
      }
    }
  }
}

template <typename T>
void conv1d_backward(const FeatureMap<T>& x, const ConvParams<T>& p,
                     const FeatureMap<T>& grad_out, ConvGrads<T>& grads) {
  conv1d_backward(x, p, grad_out, grads, static_cast<FeatureMap<T>*>(nullptr));
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
void relu_inplace(FeatureMap<T>& x) {
  for (T& v : x.data) v = v > T(0) ? v : T(0);
}

// grad_x = grad_y where the forward input was positive, 0 elsewhere.
// Needs the forward *input* (or equivalently the pre-activation sign).
template <typename T>
void relu_backward_inplace(const FeatureMap<T>& input, FeatureMap<T>& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(input.data[i] > T(0))) grad.data[i] = T(0);
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
std::vector<T> sigmoid(const std::vector<T>& x) {
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
  return y;
}

// d(sigmoid)/dx expressed through the forward output: y * (1 - y).
template <typename T>
std::vector<T> sigmoid_backward(const std::vector<T>& y,
                                const std::vector<T>& grad_y) {
  std::vector<T> gx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    gx[i] = grad_y[i] * y[i] * (T(1) - y[i]);
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Average pooling (non-overlapping windows)

template <typename T>
FeatureMap<T> avg_pool(const FeatureMap<T>& x, std::size_t pool) {
  if (pool == 0 || x.length % pool != 0) {
    throw ShapeError("avg_pool: length " + std::to_string(x.length) +
                     " not divisible by pool " + std::to_string(pool));
  }
  const std::size_t out_len = x.length / pool;
  const T inv = T(1) / static_cast<T>(pool);
  FeatureMap<T> y(x.channels, out_len);
  for (std::size_t c = 0; c < x.channels; ++c) {
    const T* xr = x.row(c);
    T* yr = y.row(c);
    for (std::size_t t = 0; t < out_len; ++t) {
      T acc = T(0);
      for (std::size_t j = 0; j < pool; ++j) acc += xr[t * pool + j];
      yr[t] = acc * inv;
    }
  }
  return y;
}

template <typename T>
FeatureMap<T> avg_pool_backward(const FeatureMap<T>& grad_y, std::size_t pool,
                                std::size_t in_length) {
  if (grad_y.length * pool != in_length) {
    throw ShapeError("avg_pool_backward: shape mismatch");
  }
  const T inv = T(1) / static_cast<T>(pool);
  FeatureMap<T> gx(grad_y.channels, in_length);
  for (std::size_t c = 0; c < grad_y.channels; ++c) {
    const T* gy = grad_y.row(c);
    T* gr = gx.row(c);
    for (std::size_t t = 0; t < grad_y.length; ++t) {
      T g = gy[t] * inv;
      for (std::size_t j = 0; j < pool; ++j) gr[t * pool + j] = g;
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Dense layer

template <typename T>
struct DenseParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<T> weight;  // (out, in) row-major
  std::vector<T> bias;    // (out)

  DenseParams() = default;
  DenseParams(std::size_t in, std::size_t out)
      : in_dim(in), out_dim(out), weight(out * in, T(0)), bias(out, T(0)) {}
};

template <typename T>
struct DenseGrads {
  std::vector<T> weight;
  std::vector<T> bias;

  explicit DenseGrads(const DenseParams<T>& p)
      : weight(p.weight.size(), T(0)), bias(p.bias.size(), T(0)) {}
};

template <typename T>
std::vector<T> dense(const std::vector<T>& x, const DenseParams<T>& p) {
  if (x.size() != p.in_dim) {
    throw ShapeError("dense: input dim " + std::to_string(x.size()) +
                     " != " + std::to_string(p.in_dim));
  }
  std::vector<T> y(p.out_dim);
  for (std::size_t o = 0; o < p.out_dim; ++o) {
    y[o] = p.bias[o] + detail::dot(p.weight.data() + o * p.in_dim, x.data(),
                                   p.in_dim);
  }
  return y;
}

template <typename T>
std::vector<T> dense_backward(const std::vector<T>& x, const DenseParams<T>& p,
                              const std::vector<T>& grad_y,
                              DenseGrads<T>& grads) {
  if (grad_y.size() != p.out_dim || x.size() != p.in_dim) {
    throw ShapeError("dense_backward: shape mismatch");
  }
  std::vector<T> grad_x(p.in_dim, T(0));
  for (std::size_t o = 0; o < p.out_dim; ++o) {
    const T g = grad_y[o];
    grads.bias[o] += g;
    const T* wrow = p.weight.data() + o * p.in_dim;
    T* gwrow = grads.weight.data() + o * p.in_dim;
    for (std::size_t i = 0; i < p.in_dim; ++i) {
      gwrow[i] += g * x[i];
      grad_x[i] += g * wrow[i];
    }
  }
  return grad_x;
}

// ---------------------------------------------------------------------------
// Binary cross-entropy

// Predictions are clamped to [eps, 1-eps] before the logs; the gradient is
// exactly the gradient of the clamped function (zero in the clamped region).
inline constexpr double kBceEps = 1e-7;

template <typename T>
T bce_loss(const std::vector<T>& y_hat, const std::vector<T>& y) {
  if (y_hat.size() != y.size() || y.empty()) {
    throw ShapeError("bce_loss: size mismatch");
  }
  const T eps = static_cast<T>(kBceEps);
  T acc = T(0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= T(0) && y[i] <= T(1))) {
      throw DomainError("bce_loss: target outside [0,1]");
    }
    T p = std::clamp(y_hat[i], eps, T(1) - eps);
    acc -= y[i] * std::log(p) + (T(1) - y[i]) * std::log(T(1) - p);
  }
  return acc / static_cast<T>(y.size());
}

template <typename T>
std::vector<T> bce_loss_grad(const std::vector<T>& y_hat,
                             const std::vector<T>& y) {
  if (y_hat.size() != y.size() || y.empty()) {
    throw ShapeError("bce_loss_grad: size mismatch");
  }
  const T eps = static_cast<T>(kBceEps);
  const T inv_n = T(1) / static_cast<T>(y.size());
  std::vector<T> g(y.size(), T(0));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y_hat[i] <= eps || y_hat[i] >= T(1) - eps) continue;  // clamped: flat
    g[i] = (-y[i] / y_hat[i] + (T(1) - y[i]) / (T(1) - y_hat[i])) * inv_n;
  }
  return g;
}

}  // namespace deepf0
