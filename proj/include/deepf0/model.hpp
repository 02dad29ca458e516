// The DeepF0 network: a first wide convolution, a stack of dilated causal
// residual blocks, average pooling and a dense + sigmoid head producing
// 360 pitch-bin activations per 1024-sample frame.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "deepf0/adam.hpp"
#include "deepf0/errors.hpp"
#include "deepf0/feature_map.hpp"
#include "deepf0/kernels.hpp"
#include "deepf0/rng.hpp"

namespace deepf0 {

struct DeepF0Config {
  std::size_t frame_length = 1024;
  std::size_t channels = 128;
  std::size_t first_kernel = 64;
  std::size_t block_kernel = 64;
  std::vector<std::size_t> dilations = {1, 2, 4, 8};
  std::size_t pool = 64;
  std::size_t bins = 360;
  bool use_residual = true;
  bool use_dropout = false;
  double dropout_rate = 0.25;

  std::size_t pooled_length() const { return frame_length / pool; }
  std::size_t dense_in() const { return channels * pooled_length(); }

  void validate() const {
    if (frame_length == 0 || channels == 0 || first_kernel == 0 ||
        block_kernel == 0 || pool == 0 || bins == 0) {
      throw ConfigError("config: all dimensions must be positive");
    }
    if (frame_length % pool != 0) {
      throw ConfigError("config: frame_length " +
                        std::to_string(frame_length) +
                        " not divisible by pool " + std::to_string(pool));
    }
    for (std::size_t d : dilations) {
      if (d == 0) throw ConfigError("config: dilation must be positive");
    }
    if (use_dropout && !(dropout_rate > 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("config: dropout_rate must be in (0,1)");
    }
  }
};

template <typename T>
struct ResidualBlockParams {
  ConvParams<T> dilated;    // channels -> channels, block_kernel, dilation d
  ConvParams<T> pointwise;  // channels -> channels, 1x1
};

template <typename T>
struct ModelParams {
  DeepF0Config config;
  ConvParams<T> first_conv;  // 1 -> channels
  std::vector<ResidualBlockParams<T>> blocks;
  DenseParams<T> dense;
};

template <typename T>
struct ModelGrads {
  ConvGrads<T> first_conv;
  std::vector<std::pair<ConvGrads<T>, ConvGrads<T>>> blocks;
  DenseGrads<T> dense;

  explicit ModelGrads(const ModelParams<T>& p)
      : first_conv(p.first_conv), dense(p.dense) {
    blocks.reserve(p.blocks.size());
    for (const auto& b : p.blocks) {
      blocks.emplace_back(ConvGrads<T>(b.dilated), ConvGrads<T>(b.pointwise));
    }
  }
};

template <typename B>
auto& block_conv_a(B& b) {
  if constexpr (requires { b.dilated; }) {
    return b.dilated;
  } else {
    return b.first;
  }
}

template <typename B>
auto& block_conv_b(B& b) {
  if constexpr (requires { b.pointwise; }) {
    return b.pointwise;
  } else {
    return b.second;
  }
}

// Visits every parameter tensor in a fixed order. This order defines the
// optimizer slot layout and the weight-file payload layout. Works for both
// ModelParams (dilated/pointwise) and ModelGrads (pair) blocks.
template <typename MP, typename F>
void for_each_tensor(MP&& params, F&& fn) {
  fn(params.first_conv.direction);
  fn(params.first_conv.gain);
  fn(params.first_conv.bias);
  for (auto&& b : params.blocks) {
    fn(block_conv_a(b).direction);
    fn(block_conv_a(b).gain);
    fn(block_conv_a(b).bias);
    fn(block_conv_b(b).direction);
    fn(block_conv_b(b).gain);
    fn(block_conv_b(b).bias);
  }
  fn(params.dense.weight);
  fn(params.dense.bias);
}

// ---------------------------------------------------------------------------
// Construction

namespace detail {

// He-uniform fan-in fill: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
void he_uniform(std::vector<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (T& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
}

// Directions get He-uniform values; the gain starts at the direction norm so
// that the initial effective weights equal the direction tensor itself.
template <typename T>
void init_conv(ConvParams<T>& p, Rng& rng) {
  he_uniform(p.direction, p.taps(), rng);
  const std::size_t taps = p.taps();
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    const T* v = p.direction.data() + oc * taps;
    p.gain[oc] = std::sqrt(detail::dot(v, v, taps));
  }
  // biases stay zero
}

}  // namespace detail

template <typename T>
ModelParams<T> build(const DeepF0Config& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams<T> m;
  m.config = config;
  m.first_conv = ConvParams<T>(1, config.channels, config.first_kernel, 1);
  detail::init_conv(m.first_conv, rng);
  for (std::size_t d : config.dilations) {
    ResidualBlockParams<T> b;
    b.dilated = ConvParams<T>(config.channels, config.channels,
                              config.block_kernel, d);
    detail::init_conv(b.dilated, rng);
    b.pointwise = ConvParams<T>(config.channels, config.channels, 1, 1);
    detail::init_conv(b.pointwise, rng);
    m.blocks.push_back(std::move(b));
  }
  m.dense = DenseParams<T>(config.dense_in(), config.bins);
  detail::he_uniform(m.dense.weight, config.dense_in(), rng);
  return m;
}

// ---------------------------------------------------------------------------
// Introspection

inline std::size_t param_count(const DeepF0Config& c) {
  c.validate();
  auto conv_count = [](std::size_t ic, std::size_t oc, std::size_t k) {
    return oc * ic * k + oc + oc;  // direction + gain + bias
  };
  std::size_t n = conv_count(1, c.channels, c.first_kernel);
  for (std::size_t i = 0; i < c.dilations.size(); ++i) {
    n += conv_count(c.channels, c.channels, c.block_kernel);
    n += conv_count(c.channels, c.channels, 1);
  }
  n += c.dense_in() * c.bins + c.bins;
  return n;
}

// Samples of input history reachable from one output position of the last
// block: the first kernel plus (k-1)*d per dilated block.
inline std::size_t receptive_field(const DeepF0Config& c) {
  c.validate();
  std::size_t rf = c.first_kernel;
  for (std::size_t d : c.dilations) rf += (c.block_kernel - 1) * d;
  return rf;
}

// ---------------------------------------------------------------------------
// Forward / backward

// Activations retained for the backward pass. Dropout masks are already
// divided by the keep probability (inverted dropout).
template <typename T>
struct ForwardCache {
  FeatureMap<T> input;       // 1 x frame_length
  FeatureMap<T> first_out;   // input to block 0
  struct BlockCache {
    FeatureMap<T> in;        // block input x
    FeatureMap<T> dilated_out;
    FeatureMap<T> relu1;
    FeatureMap<T> pointwise_out;
    FeatureMap<T> relu2;     // F(x)
    FeatureMap<T> out;       // ReLU(x + F(x)) or F(x), post-dropout
    std::vector<T> dropout_mask;  // empty when dropout is off
  };
  std::vector<BlockCache> blocks;
  FeatureMap<T> pooled;
  std::vector<T> flat;
  std::vector<T> logits;
  std::vector<T> probs;
};

namespace detail {

// Flatten channel-major: flat[c * pooled_length + t].
template <typename T>
std::vector<T> flatten(const FeatureMap<T>& x) {
  return x.data;
}

template <typename T>
FeatureMap<T> unflatten(const std::vector<T>& flat, std::size_t channels,
                        std::size_t length) {
  FeatureMap<T> m(channels, length);
  m.data = flat;
  return m;
}

}  // namespace detail

// Full forward pass. When `dropout_rng` is non-null and the config enables
// dropout, a fresh mask is drawn per block (training mode); inference passes
// null and runs the identity instead.
template <typename T>
std::vector<T> forward_cached(const ModelParams<T>& params,
                              const std::vector<T>& frame,
                              ForwardCache<T>& cache,
                              Rng* dropout_rng = nullptr) {
  const DeepF0Config& cfg = params.config;
  if (frame.size() != cfg.frame_length) {
    throw ShapeError("forward: frame length " + std::to_string(frame.size()) +
                     " != " + std::to_string(cfg.frame_length));
  }
  cache.input = FeatureMap<T>(1, cfg.frame_length);
  std::copy(frame.begin(), frame.end(), cache.input.row(0));

  cache.first_out = conv1d_causal(cache.input, params.first_conv);
  cache.blocks.clear();
  cache.blocks.resize(params.blocks.size());

  const FeatureMap<T>* x = &cache.first_out;
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    auto& bc = cache.blocks[i];
    const auto& bp = params.blocks[i];
    bc.in = *x;
    bc.dilated_out = conv1d_causal(bc.in, bp.dilated);
    bc.relu1 = bc.dilated_out;
    relu_inplace(bc.relu1);
    bc.pointwise_out = conv1d_causal(bc.relu1, bp.pointwise);
    bc.relu2 = bc.pointwise_out;
    relu_inplace(bc.relu2);

    if (cfg.use_residual) {
      bc.out = bc.relu2;
      for (std::size_t j = 0; j < bc.out.data.size(); ++j) {
        bc.out.data[j] += bc.in.data[j];
      }
      relu_inplace(bc.out);
    } else {
      bc.out = bc.relu2;
    }

    if (cfg.use_dropout && dropout_rng != nullptr) {
      const T keep = static_cast<T>(1.0 - cfg.dropout_rate);
      bc.dropout_mask.resize(bc.out.data.size());
      for (std::size_t j = 0; j < bc.out.data.size(); ++j) {
        bc.dropout_mask[j] =
            dropout_rng->uniform() < cfg.dropout_rate ? T(0) : T(1) / keep;
        bc.out.data[j] *= bc.dropout_mask[j];
      }
    }
    x = &bc.out;
  }

  cache.pooled = avg_pool(*x, cfg.pool);
  cache.flat = detail::flatten(cache.pooled);
  cache.logits = dense(cache.flat, params.dense);
  cache.probs = sigmoid(cache.logits);
  return cache.probs;
}

// Inference-only forward.
template <typename T>
std::vector<T> forward(const ModelParams<T>& params,
                       const std::vector<T>& frame) {
  ForwardCache<T> cache;
  return forward_cached(params, frame, cache, nullptr);
}

// Backward from d(loss)/d(probs); accumulates into `grads`.
template <typename T>
void backward(const ModelParams<T>& params, const ForwardCache<T>& cache,
              const std::vector<T>& grad_probs, ModelGrads<T>& grads) {
  const DeepF0Config& cfg = params.config;
  std::vector<T> grad_logits = sigmoid_backward(cache.probs, grad_probs);
  std::vector<T> grad_flat =
      dense_backward(cache.flat, params.dense, grad_logits, grads.dense);
  FeatureMap<T> grad_pooled =
      detail::unflatten(grad_flat, cfg.channels, cfg.pooled_length());
  FeatureMap<T> grad_out =
      avg_pool_backward(grad_pooled, cfg.pool, cfg.frame_length);

  for (std::size_t i = params.blocks.size(); i-- > 0;) {
    const auto& bc = cache.blocks[i];
    const auto& bp = params.blocks[i];

    if (!bc.dropout_mask.empty()) {
      for (std::size_t j = 0; j < grad_out.data.size(); ++j) {
        grad_out.data[j] *= bc.dropout_mask[j];
      }
    }

    FeatureMap<T> grad_residual;  // gradient flowing to the block input
    if (cfg.use_residual) {
      // out = ReLU(in + F); gate on out > 0, then split into the identity
      // branch and the F branch.
      FeatureMap<T> pre_gate = grad_out;
      // Reconstruct the gate from the pre-dropout sum: relu output is
      // positive exactly where in + F was. Dropout may have zeroed entries
      // of bc.out, so gate on in + relu2 instead.
      for (std::size_t j = 0; j < pre_gate.data.size(); ++j) {
        if (!(bc.in.data[j] + bc.relu2.data[j] > T(0))) {
          pre_gate.data[j] = T(0);
        }
      }
      grad_residual = pre_gate;
      grad_out = std::move(pre_gate);
    }

    // grad_out now targets F(x) = relu2.
    relu_backward_inplace(bc.pointwise_out, grad_out);
    FeatureMap<T> grad_relu1;
    conv1d_backward(bc.relu1, bp.pointwise, grad_out, grads.blocks[i].second,
                    &grad_relu1);
    relu_backward_inplace(bc.dilated_out, grad_relu1);
    FeatureMap<T> grad_in;
    conv1d_backward(bc.in, bp.dilated, grad_relu1, grads.blocks[i].first,
                    &grad_in);

    if (cfg.use_residual) {
      for (std::size_t j = 0; j < grad_in.data.size(); ++j) {
        grad_in.data[j] += grad_residual.data[j];
      }
    }
    grad_out = std::move(grad_in);
  }

  conv1d_backward(cache.input, params.first_conv, grad_out, grads.first_conv);
}

// ---------------------------------------------------------------------------
// Optimizer plumbing

template <typename T>
struct ModelAdam {
  AdamConfig<T> cfg;
  long step_count = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  ModelAdam(const ModelParams<T>& params, AdamConfig<T> c) : cfg(c) {
    for_each_tensor(params, [this](const std::vector<T>& t) {
      first_moment.emplace_back(t.size(), T(0));
      second_moment.emplace_back(t.size(), T(0));
    });
  }
};

// One optimizer step over every tensor of the model; the shared step count
// advances exactly once.
template <typename T>
void model_adam_step(ModelParams<T>& params, const ModelGrads<T>& grads,
                     ModelAdam<T>& opt) {
  opt.step_count += 1;
  std::vector<std::vector<T>*> ptensors;
  std::vector<const std::vector<T>*> gtensors;
  for_each_tensor(params,
                  [&](std::vector<T>& t) { ptensors.push_back(&t); });
  for_each_tensor(grads,
                  [&](const std::vector<T>& t) { gtensors.push_back(&t); });
  for (std::size_t i = 0; i < ptensors.size(); ++i) {
    adam_apply(ptensors[i]->data(), gtensors[i]->data(),
               opt.first_moment[i].data(), opt.second_moment[i].data(),
               ptensors[i]->size(), opt.cfg, opt.step_count);
  }
}

template <typename T>
void add_grads(ModelGrads<T>& into, const ModelGrads<T>& from) {
  std::vector<std::vector<T>*> a;
  std::vector<const std::vector<T>*> b;
  for_each_tensor(into, [&](std::vector<T>& t) { a.push_back(&t); });
  for_each_tensor(from, [&](const std::vector<T>& t) { b.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i]->size(); ++j) {
      (*a[i])[j] += (*b[i])[j];
    }
  }
}

template <typename T>
void scale_grads(ModelGrads<T>& g, T s) {
  for_each_tensor(g, [s](std::vector<T>& t) {
    for (auto& x : t) x *= s;
  });
}

}  // namespace deepf0
