#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "deepf0/adam.hpp"
#include "deepf0/kernels.hpp"
#include "deepf0/rng.hpp"
#include "support/gradcheck.hpp"

using namespace deepf0;
using Catch::Approx;
using testsupport::central_diff;
using testsupport::rel_err;

namespace {

// Brute-force causal convolution oracle: literal evaluation of
//   out[oc][t] = bias[oc] + sum_{ic,k} w[oc][ic][k] * x[ic][t - (K-1-k)*d]
// with out-of-range inputs treated as zero.
FeatureMap<double> oracle_conv(const FeatureMap<double>& x,
                               const std::vector<double>& w,
                               const std::vector<double>& bias,
                               std::size_t out_ch, std::size_t kernel,
                               std::size_t dilation) {
  FeatureMap<double> out(out_ch, x.length);
  for (std::size_t oc = 0; oc < out_ch; ++oc) {
    for (std::size_t t = 0; t < x.length; ++t) {
      double acc = bias[oc];
      for (std::size_t ic = 0; ic < x.channels; ++ic) {
        for (std::size_t k = 0; k < kernel; ++k) {
          const long src = static_cast<long>(t) -
                           static_cast<long>((kernel - 1 - k) * dilation);
          if (src < 0) continue;
          acc += w[(oc * x.channels + ic) * kernel + k] *
                 x.at(ic, static_cast<std::size_t>(src));
        }
      }
      out.at(oc, t) = acc;
    }
  }
  return out;
}

ConvParams<double> random_conv(std::size_t ic, std::size_t oc, std::size_t k,
                               std::size_t d, Rng& rng) {
  ConvParams<double> p(ic, oc, k, d);
  for (auto& v : p.direction) v = rng.uniform(-1.0, 1.0);
  for (auto& g : p.gain) g = rng.uniform(0.5, 1.5);
  for (auto& b : p.bias) b = rng.uniform(-0.5, 0.5);
  return p;
}

FeatureMap<double> random_map(std::size_t ch, std::size_t len, Rng& rng) {
  FeatureMap<double> x(ch, len);
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("conv1d_causal identity kernel") {
  ConvParams<double> p(1, 1, 1, 1);
  p.direction = {1.0};
  p.gain = {1.0};
  p.bias = {0.0};
  FeatureMap<double> x(1, 5);
  x.data = {0.5, -1.0, 2.0, 0.0, 3.0};
  auto y = conv1d_causal(x, p);
  REQUIRE(y.data == x.data);
}

TEST_CASE("conv1d_causal dilated two-tap example") {
  // effective weights [1, 1], dilation 2, over [1,2,3,4]
  ConvParams<double> p(1, 1, 2, 2);
  p.direction = {1.0, 1.0};
  p.gain = {std::sqrt(2.0)};  // ||v|| = sqrt(2), so w = v
  p.bias = {0.0};
  FeatureMap<double> x(1, 4);
  x.data = {1.0, 2.0, 3.0, 4.0};
  auto y = conv1d_causal(x, p);
  REQUIRE(y.data[0] == Approx(1.0));
  REQUIRE(y.data[1] == Approx(2.0));
  REQUIRE(y.data[2] == Approx(4.0));
  REQUIRE(y.data[3] == Approx(6.0));

  auto ref = oracle_conv(x, {1.0, 1.0}, {0.0}, 1, 2, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(y.data[i] == Approx(ref.data[i]));
  }
}

TEST_CASE("conv1d_causal matches brute-force oracle on random configs") {
  Rng rng(101);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t ic = 1 + rng.below(3);
    const std::size_t oc = 1 + rng.below(3);
    const std::size_t k = 1 + rng.below(4);
    const std::size_t d = 1 + rng.below(3);
    const std::size_t len = 4 + rng.below(12);
    auto p = random_conv(ic, oc, k, d, rng);
    auto x = random_map(ic, len, rng);
    auto y = conv1d_causal(x, p);
    auto ref = oracle_conv(x, weight_norm_effective(p), p.bias, oc, k, d);
    REQUIRE(y.channels == oc);
    REQUIRE(y.length == len);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      REQUIRE(y.data[i] == Approx(ref.data[i]).margin(1e-12));
    }
  }
}

TEST_CASE("conv1d_causal zero input gives zero output") {
  Rng rng(7);
  auto p = random_conv(2, 3, 3, 2, rng);
  for (auto& b : p.bias) b = 0.0;
  FeatureMap<double> x(2, 8);
  auto y = conv1d_causal(x, p);
  for (double v : y.data) REQUIRE(v == 0.0);
}

TEST_CASE("conv1d_causal error paths") {
  Rng rng(8);
  auto p = random_conv(2, 2, 3, 1, rng);
  FeatureMap<double> wrong(3, 8);
  REQUIRE_THROWS_AS(conv1d_causal(wrong, p), ShapeError);

  FeatureMap<double> bad(2, 8);
  bad.data[5] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(conv1d_causal(bad, p), NumericError);
}

TEST_CASE("causality: future perturbations never reach past outputs") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 16;
    auto p = random_conv(2, 2, 3, 1 + rng.below(3), rng);
    auto x = random_map(2, len, rng);
    auto y = conv1d_causal(x, p);

    const std::size_t t = rng.below(len - 1);
    auto x2 = x;
    for (std::size_t c = 0; c < x2.channels; ++c) {
      for (std::size_t s = t + 1; s < len; ++s) {
        x2.at(c, s) += rng.uniform(-10.0, 10.0);
      }
    }
    auto y2 = conv1d_causal(x2, p);
    for (std::size_t c = 0; c < y.channels; ++c) {
      for (std::size_t s = 0; s <= t; ++s) {
        REQUIRE(y.at(c, s) == y2.at(c, s));  // bit-identical
      }
    }
  }
}

TEST_CASE("weight_norm_effective 3-4-5 example") {
  ConvParams<double> p(1, 1, 2, 1);
  p.direction = {3.0, 4.0};
  p.gain = {1.0};
  auto w = weight_norm_effective(p);
  REQUIRE(w[0] == Approx(0.6));
  REQUIRE(w[1] == Approx(0.8));
}

TEST_CASE("weight_norm_effective scale invariance in v") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_conv(2, 3, 3, 1, rng);
    auto w1 = weight_norm_effective(p);
    const double alpha = rng.uniform(0.01, 100.0);
    auto p2 = p;
    for (auto& v : p2.direction) v *= alpha;
    auto w2 = weight_norm_effective(p2);
    for (std::size_t i = 0; i < w1.size(); ++i) {
      REQUIRE(std::abs(w1[i] - w2[i]) < 1e-12);
    }
  }
}

TEST_CASE("weight_norm_effective zero gain and zero norm") {
  ConvParams<double> p(1, 1, 2, 1);
  p.direction = {3.0, 4.0};
  p.gain = {0.0};
  for (double w : weight_norm_effective(p)) REQUIRE(w == 0.0);

  p.direction = {0.0, 0.0};
  REQUIRE_THROWS_AS(weight_norm_effective(p), NumericError);
}

TEST_CASE("conv1d_backward finite differences") {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ic = 2, oc = 2, k = 3, len = 8;
    const std::size_t d = 1 + rng.below(2);
    auto p = random_conv(ic, oc, k, d, rng);
    auto x = random_map(ic, len, rng);
    auto grad_out = random_map(oc, len, rng);

    ConvGrads<double> grads(p);
    FeatureMap<double> grad_x;
    conv1d_backward(x, p, grad_out, grads, &grad_x);

    // scalar objective: <grad_out, conv(x, p)>
    auto loss = [&]() {
      auto y = conv1d_causal(x, p);
      double acc = 0.0;
      for (std::size_t i = 0; i < y.data.size(); ++i) {
        acc += grad_out.data[i] * y.data[i];
      }
      return acc;
    };

    for (std::size_t i = 0; i < x.data.size(); ++i) {
      worst = std::max(worst,
                       rel_err(grad_x.data[i], central_diff(loss, x.data, i)));
    }
    for (std::size_t i = 0; i < p.direction.size(); ++i) {
      worst = std::max(
          worst,
          rel_err(grads.direction[i], central_diff(loss, p.direction, i)));
    }
    for (std::size_t i = 0; i < p.gain.size(); ++i) {
      worst = std::max(worst,
                       rel_err(grads.gain[i], central_diff(loss, p.gain, i)));
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      worst = std::max(worst,
                       rel_err(grads.bias[i], central_diff(loss, p.bias, i)));
    }
  }
  REQUIRE(worst < 1e-4);
}

TEST_CASE("conv1d_backward zero upstream gradient") {
  Rng rng(5);
  auto p = random_conv(2, 2, 3, 1, rng);
  auto x = random_map(2, 8, rng);
  FeatureMap<double> grad_out(2, 8);  // zeros
  ConvGrads<double> grads(p);
  FeatureMap<double> grad_x;
  conv1d_backward(x, p, grad_out, grads, &grad_x);
  for (double v : grads.direction) REQUIRE(v == 0.0);
  for (double v : grads.gain) REQUIRE(v == 0.0);
  for (double v : grads.bias) REQUIRE(v == 0.0);
  for (double v : grad_x.data) REQUIRE(v == 0.0);
}

TEST_CASE("conv1d_backward gain gradient, single channel k=1, by hand") {
  // out[t] = g * sign(v) * x[t] + b, so dL/dg = sum_t gout[t]*sign(v)*x[t]
  ConvParams<double> p(1, 1, 1, 1);
  p.direction = {-2.5};
  p.gain = {1.7};
  p.bias = {0.3};
  FeatureMap<double> x(1, 4);
  x.data = {1.0, -2.0, 0.5, 3.0};
  FeatureMap<double> gout(1, 4);
  gout.data = {0.25, 1.0, -0.5, 2.0};

  ConvGrads<double> grads(p);
  conv1d_backward(x, p, gout, grads);

  double expected = 0.0;
  for (std::size_t t = 0; t < 4; ++t) {
    expected += gout.data[t] * (-1.0) * x.data[t];
  }
  REQUIRE(grads.gain[0] == Approx(expected));
}

TEST_CASE("relu and sigmoid point values") {
  FeatureMap<double> x(1, 2);
  x.data = {-5.0, 5.0};
  relu_inplace(x);
  REQUIRE(x.data[0] == 0.0);
  REQUIRE(x.data[1] == 5.0);

  REQUIRE(sigmoid_scalar(0.0) == Approx(0.5));
  REQUIRE(sigmoid_scalar(30.0) < 1.0);
  REQUIRE(sigmoid_scalar(-30.0) > 0.0);

  // d sigmoid / dx at 0 is 0.25
  std::vector<double> y = sigmoid(std::vector<double>{0.0});
  auto gx = sigmoid_backward(y, {1.0});
  REQUIRE(gx[0] == Approx(0.25));
}

TEST_CASE("sigmoid backward matches finite differences") {
  Rng rng(33);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x = {rng.uniform(-4.0, 4.0)};
    auto y = sigmoid(x);
    auto gx = sigmoid_backward(y, {1.0});
    auto f = [&]() { return sigmoid(x)[0]; };
    worst = std::max(worst, rel_err(gx[0], central_diff(f, x, 0)));
  }
  REQUIRE(worst < 1e-4);
}

TEST_CASE("avg_pool basics") {
  FeatureMap<double> c(2, 8);
  std::fill(c.data.begin(), c.data.end(), 3.25);
  auto y = avg_pool(c, 4);
  REQUIRE(y.length == 2);
  for (double v : y.data) REQUIRE(v == Approx(3.25));

  FeatureMap<double> x(1, 4);
  x.data = {1.0, 2.0, 3.0, 4.0};
  auto y2 = avg_pool(x, 2);
  REQUIRE(y2.data[0] == Approx(1.5));
  REQUIRE(y2.data[1] == Approx(3.5));

  FeatureMap<double> big(1, 1024);
  REQUIRE(avg_pool(big, 64).length == 16);

  FeatureMap<double> odd(1, 10);
  REQUIRE_THROWS_AS(avg_pool(odd, 3), ShapeError);
}

TEST_CASE("avg_pool backward finite differences") {
  Rng rng(44);
  FeatureMap<double> x = random_map(2, 8, rng);
  FeatureMap<double> gout = random_map(2, 2, rng);
  auto gx = avg_pool_backward(gout, 4, 8);
  auto loss = [&]() {
    auto y = avg_pool(x, 4);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      acc += gout.data[i] * y.data[i];
    }
    return acc;
  };
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    REQUIRE(rel_err(gx.data[i], central_diff(loss, x.data, i)) < 1e-6);
  }
}

TEST_CASE("dense forward examples") {
  DenseParams<double> id(3, 3);
  for (std::size_t i = 0; i < 3; ++i) id.weight[i * 3 + i] = 1.0;
  std::vector<double> x = {1.0, -2.0, 0.5};
  REQUIRE(dense(x, id) == x);

  DenseParams<double> p(2, 1);
  p.weight = {1.0, 2.0};
  p.bias = {3.0};
  REQUIRE(dense({1.0, 1.0}, p)[0] == Approx(6.0));

  REQUIRE_THROWS_AS(dense({1.0}, p), ShapeError);
}

TEST_CASE("dense backward finite differences") {
  Rng rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    DenseParams<double> p(4, 3);
    for (auto& w : p.weight) w = rng.uniform(-1.0, 1.0);
    for (auto& b : p.bias) b = rng.uniform(-1.0, 1.0);
    std::vector<double> x(4), gout(3);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    for (auto& v : gout) v = rng.uniform(-1.0, 1.0);

    DenseGrads<double> grads(p);
    auto gx = dense_backward(x, p, gout, grads);
    auto loss = [&]() {
      auto y = dense(x, p);
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += gout[i] * y[i];
      return acc;
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, rel_err(gx[i], central_diff(loss, x, i)));
    }
    for (std::size_t i = 0; i < p.weight.size(); ++i) {
      worst = std::max(worst,
                       rel_err(grads.weight[i], central_diff(loss, p.weight, i)));
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      worst = std::max(worst,
                       rel_err(grads.bias[i], central_diff(loss, p.bias, i)));
    }
  }
  REQUIRE(worst < 1e-4);
}

TEST_CASE("bce_loss closed-form points") {
  // perfect prediction
  std::vector<double> ones = {1.0, 1.0};
  std::vector<double> nearly = {1.0 - 1e-7, 1.0 - 1e-7};
  REQUIRE(bce_loss(nearly, ones) == Approx(0.0).margin(1e-6));

  // maximum-uncertainty: ln 2 per bin
  std::vector<double> half = {0.5};
  REQUIRE(bce_loss(half, half) == Approx(std::log(2.0)).epsilon(1e-9));

  std::vector<double> bad_target = {1.5};
  REQUIRE_THROWS_AS(bce_loss(half, bad_target), DomainError);
}

TEST_CASE("bce_loss is non-negative") {
  Rng rng(66);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y_hat(8), y(8);
    for (auto& v : y_hat) v = rng.uniform(1e-6, 1.0 - 1e-6);
    for (auto& v : y) v = rng.uniform(0.0, 1.0);
    REQUIRE(bce_loss(y_hat, y) >= 0.0);
  }
}

TEST_CASE("bce_loss gradient matches finite differences") {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y_hat(6), y(6);
    for (auto& v : y_hat) v = rng.uniform(0.05, 0.95);
    for (auto& v : y) v = rng.uniform(0.0, 1.0);
    auto g = bce_loss_grad(y_hat, y);
    auto f = [&]() { return bce_loss(y_hat, y); };
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
      worst = std::max(worst, rel_err(g[i], central_diff(f, y_hat, i)));
    }
  }
  REQUIRE(worst < 1e-4);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  std::vector<double> p = {1.0, -2.0, 3.0};
  AdamState<double> st(3);
  adam_step(p, {0.0, 0.0, 0.0}, st);
  REQUIRE(p == std::vector<double>({1.0, -2.0, 3.0}));
  REQUIRE(st.step_count == 1);
}

TEST_CASE("adam first step moves by -lr on unit gradient") {
  std::vector<double> p = {0.0};
  AdamConfig<double> cfg;
  AdamState<double> st(1, cfg);
  adam_step(p, {1.0}, st);
  // bias-corrected m_hat / sqrt(v_hat) = 1 exactly on the first step
  REQUIRE(p[0] == Approx(-cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam two-step trace matches hand computation") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  AdamConfig<double> cfg{lr, b1, b2, eps};
  std::vector<double> p = {1.0};
  AdamState<double> st(1, cfg);

  // step 1, g = 0.5
  adam_step(p, {0.5}, st);
  double m = 0.1 * 0.5;
  double v = 0.001 * 0.25;
  double m_hat = m / (1 - 0.9);
  double v_hat = v / (1 - 0.999);
  double expect = 1.0 - lr * m_hat / (std::sqrt(v_hat) + eps);
  REQUIRE(p[0] == Approx(expect).epsilon(1e-12));

  // step 2, g = -0.25
  adam_step(p, {-0.25}, st);
  m = 0.9 * m + 0.1 * (-0.25);
  v = 0.999 * v + 0.001 * 0.0625;
  m_hat = m / (1 - 0.9 * 0.9);
  v_hat = v / (1 - 0.999 * 0.999);
  expect = expect - lr * m_hat / (std::sqrt(v_hat) + eps);
  REQUIRE(p[0] == Approx(expect).epsilon(1e-12));
  REQUIRE(st.step_count == 2);
}

TEST_CASE("adam rejects non-finite gradients") {
  std::vector<double> p = {1.0};
  AdamState<double> st(1);
  REQUIRE_THROWS_AS(
      adam_step(p, {std::numeric_limits<double>::quiet_NaN()}, st),
      NumericError);
}
