// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "beamloop/nn/checkpoint.hpp"
#include "beamloop/nn/layers.hpp"
#include "beamloop/nn/optim.hpp"

using namespace beamloop::nn;
using T = Tensor<double>;

namespace {

T make_param(ParameterSet<double>& set, const std::string& name, Shape shape,
             std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  auto t = T::zeros(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return set.add(name, std::move(t));
}

// Values bounded away from zero so ReLU kinks cannot sit inside the
// finite-difference step.
T make_param_off_zero(ParameterSet<double>& set, const std::string& name, Shape shape,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  auto t = T::zeros(std::move(shape));
  for (auto& v : t.values()) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return set.add(name, std::move(t));
}

MhaWeights<double> make_mha(ParameterSet<double>& set, const std::string& prefix, std::size_t d,
                            std::mt19937_64& rng) {
  MhaWeights<double> w;
  w.wq = make_param(set, prefix + ".wq", {d, d}, rng);
  w.bq = make_param(set, prefix + ".bq", {d}, rng);
  w.wk = make_param(set, prefix + ".wk", {d, d}, rng);
  w.bk = make_param(set, prefix + ".bk", {d}, rng);
  w.wv = make_param(set, prefix + ".wv", {d, d}, rng);
  w.bv = make_param(set, prefix + ".bv", {d}, rng);
  w.wo = make_param(set, prefix + ".wo", {d, d}, rng);
  w.bo = make_param(set, prefix + ".bo", {d}, rng);
  return w;
}

} // namespace

TEST_CASE("linear with identity weights is the identity") {
  auto x = T::from_values({2, 2}, {1, 2, 3, 4});
  auto w = T::from_values({2, 2}, {1, 0, 0, 1});
  auto b = T::zeros({2});
  auto y = linear(x, w, b);
  REQUIRE(y.values() == x.values());
}

TEST_CASE("linear matches a hand product") {
  auto x = T::from_values({1, 2}, {1, 2});
  auto w = T::from_values({2, 2}, {1, 1, 0, 1});
  auto b = T::zeros({2});
  auto y = linear(x, w, b);
  REQUIRE(y.values()[0] == 3.0);
  REQUIRE(y.values()[1] == 2.0);
}

TEST_CASE("linear passes gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(3);
  auto x = make_param(set, "x", {3, 4}, rng);
  auto w = make_param(set, "w", {5, 4}, rng);
  auto b = make_param(set, "b", {5}, rng);
  auto err = grad_check([&] { return sum(mul(linear(x, w, b), linear(x, w, b))); }, set);
  REQUIRE(err < 1e-5);
}

TEST_CASE("layer_norm maps constant rows to zero") {
  auto x = T::filled({2, 8}, 3.25);
  auto gamma = T::filled({8}, 1.0);
  auto beta = T::zeros({8});
  auto y = layer_norm(x, gamma, beta);
  for (auto v : y.values()) REQUIRE(std::abs(v) < 1e-12);
}

TEST_CASE("layer_norm standardizes random rows") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-2, 2);
  auto x = T::zeros({4, 16});
  for (auto& v : x.values()) v = dist(rng);
  auto y = layer_norm(x, T::filled({16}, 1.0), T::zeros({16}));
  for (std::size_t r = 0; r < 4; ++r) {
    double mu = 0, var = 0;
    for (std::size_t j = 0; j < 16; ++j) mu += y.values()[r * 16 + j];
    mu /= 16;
    for (std::size_t j = 0; j < 16; ++j) {
      double c = y.values()[r * 16 + j] - mu;
      var += c * c;
    }
    var /= 16;
    REQUIRE(std::abs(mu) < 1e-6);
    REQUIRE(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("layer_norm passes gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(7);
  auto x = make_param(set, "x", {3, 6}, rng);
  auto g = make_param(set, "g", {6}, rng, 0.5, 1.5);
  auto b = make_param(set, "b", {6}, rng);
  auto err = grad_check([&] { return sum(mul(layer_norm(x, g, b), layer_norm(x, g, b))); }, set);
  REQUIRE(err < 1e-5);
}

TEST_CASE("attention with a dominant key returns that key's value") {
  MhaWeights<double> w;
  auto eye = [](std::size_t d) {
    auto t = T::zeros({d, d});
    for (std::size_t i = 0; i < d; ++i) t.values()[i * d + i] = 1.0;
    return t;
  };
  w.wq = eye(4); w.bq = T::zeros({4});
  w.wk = eye(4); w.bk = T::zeros({4});
  w.wv = eye(4); w.bv = T::zeros({4});
  w.wo = eye(4); w.bo = T::zeros({4});

  auto q = T::from_values({1, 4}, {10, 0, 0, 0});
  auto k = T::from_values({2, 4}, {10, 0, 0, 0, -10, 0, 0, 0});
  auto v = T::from_values({2, 4}, {1, 2, 3, 4, 9, 9, 9, 9});
  auto out = multi_head_attention(q, k, v, w, 1);
  for (std::size_t j = 0; j < 4; ++j)
    REQUIRE(out.values()[j] == Catch::Approx(v.values()[j]).margin(1e-9));
}

TEST_CASE("softmax rows are non-negative and sum to one") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-5, 5);
  auto x = T::zeros({6, 11});
  for (auto& v : x.values()) v = dist(rng);
  auto y = softmax_last(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < 11; ++j) {
      REQUIRE(y.values()[r * 11 + j] >= 0.0);
      s += y.values()[r * 11 + j];
    }
    REQUIRE(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("single-head attention equals the direct formula") {
  ParameterSet<double> set;
  std::mt19937_64 rng(13);
  auto w = make_mha(set, "a", 4, rng);
  auto q = make_param(set, "q", {3, 4}, rng);
  auto k = make_param(set, "k", {5, 4}, rng);
  auto v = make_param(set, "v", {5, 4}, rng);
  auto out = multi_head_attention(q, k, v, w, 1);

  // direct loop evaluation, no graph ops
  auto project = [](const T& x, const T& wm, const T& bm) {
    std::vector<double> y(x.dim(0) * wm.dim(0));
    for (std::size_t r = 0; r < x.dim(0); ++r)
      for (std::size_t o = 0; o < wm.dim(0); ++o) {
        double acc = bm.values()[o];
        for (std::size_t i = 0; i < x.dim(1); ++i)
          acc += x.values()[r * x.dim(1) + i] * wm.values()[o * x.dim(1) + i];
        y[r * wm.dim(0) + o] = acc;
      }
    return y;
  };
  auto qp = project(q, w.wq, w.bq), kp = project(k, w.wk, w.bk), vp = project(v, w.wv, w.bv);
  std::vector<double> ctx(3 * 4, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> logits(5);
    double mx = -1e300;
    for (std::size_t j = 0; j < 5; ++j) {
      double acc = 0;
      for (std::size_t c = 0; c < 4; ++c) acc += qp[i * 4 + c] * kp[j * 4 + c];
      logits[j] = acc / 2.0; // sqrt(d_head) = 2
      mx = std::max(mx, logits[j]);
    }
    double z = 0;
    for (auto& l : logits) {
      l = std::exp(l - mx);
      z += l;
    }
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t c = 0; c < 4; ++c) ctx[i * 4 + c] += logits[j] / z * vp[j * 4 + c];
  }
  T ctx_t = T::from_values({3, 4}, ctx);
  auto expect = project(ctx_t, w.wo, w.bo);
  for (std::size_t i = 0; i < expect.size(); ++i)
    REQUIRE(out.values()[i] == Catch::Approx(expect[i]).margin(1e-12));
}

TEST_CASE("multi-head attention passes gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(15);
  auto w = make_mha(set, "m", 6, rng);
  auto q = make_param(set, "q", {2, 3, 6}, rng);
  auto k = make_param(set, "k", {2, 4, 6}, rng);
  auto err = grad_check([&] { return sum(multi_head_attention(q, k, k, w, 2)); }, set,
                        {1e-5, 12, 21, 1e-4});
  REQUIRE(err < 1e-4);
}

TEST_CASE("attention rejects indivisible heads") {
  ParameterSet<double> set;
  std::mt19937_64 rng(15);
  auto w = make_mha(set, "m", 6, rng);
  auto q = make_param(set, "q", {2, 6}, rng);
  REQUIRE_THROWS_WITH(multi_head_attention(q, q, q, w, 4),
                      Catch::Matchers::ContainsSubstring("indivisible-heads"));
}

TEST_CASE("selective scan with T=1 has no history term") {
  ParameterSet<double> set;
  std::mt19937_64 rng(17);
  SsmWeights<double> w;
  w.w_u = make_param(set, "wu", {3, 3}, rng);
  w.b_u = make_param(set, "bu", {3}, rng);
  w.w_delta = make_param(set, "wd", {3, 3}, rng);
  w.b_delta = make_param(set, "bd", {3}, rng);
  w.out_scale = make_param(set, "c", {3}, rng);
  w.skip = make_param(set, "s", {3}, rng);

  auto x1 = T::from_values({1, 3}, {0.3, -0.2, 0.9});
  auto y1 = selective_ssm_scan(x1, w);
  // the same first step embedded in a longer sequence gives the same y_1
  auto x2 = T::from_values({3, 3}, {0.3, -0.2, 0.9, 1.0, 1.0, 1.0, -2.0, 0.5, 0.1});
  auto y2 = selective_ssm_scan(x2, w);
  for (std::size_t j = 0; j < 3; ++j) REQUIRE(y1.values()[j] == y2.values()[j]);
}

TEST_CASE("selective scan is strictly causal") {
  ParameterSet<double> set;
  std::mt19937_64 rng(19);
  SsmWeights<double> w;
  w.w_u = make_param(set, "wu", {4, 4}, rng);
  w.b_u = make_param(set, "bu", {4}, rng);
  w.w_delta = make_param(set, "wd", {4, 4}, rng);
  w.b_delta = make_param(set, "bd", {4}, rng);
  w.out_scale = make_param(set, "c", {4}, rng);
  w.skip = make_param(set, "s", {4}, rng);

  auto x = make_param(set, "x", {6, 4}, rng);
  auto y0 = selective_ssm_scan(x, w);
  auto xp = T::from_values(x.shape(), x.values());
  xp.values()[4 * 4 + 1] += 100.0; // perturb t=4
  auto y1 = selective_ssm_scan(xp, w);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 4; ++j)
      REQUIRE(y0.values()[t * 4 + j] == y1.values()[t * 4 + j]);
  bool later_changed = false;
  for (std::size_t t = 4; t < 6; ++t)
    for (std::size_t j = 0; j < 4; ++j)
      later_changed = later_changed || y0.values()[t * 4 + j] != y1.values()[t * 4 + j];
  REQUIRE(later_changed);
}

TEST_CASE("selective scan matches a hand-unrolled recurrence") {
  // scalar channel, fixed weights: u = 2x + 0.1, delta = x, c = 1.5, skip = 0.5
  ParameterSet<double> set;
  SsmWeights<double> w;
  w.w_u = set.add("wu", T::from_values({1, 1}, {2.0}));
  w.b_u = set.add("bu", T::from_values({1}, {0.1}));
  w.w_delta = set.add("wd", T::from_values({1, 1}, {1.0}));
  w.b_delta = set.add("bd", T::from_values({1}, {0.0}));
  w.out_scale = set.add("c", T::from_values({1}, {1.5}));
  w.skip = set.add("s", T::from_values({1}, {0.5}));

  const std::vector<double> xs{0.4, -0.3, 1.2};
  auto x = T::from_values({3, 1}, xs);
  auto y = selective_ssm_scan(x, w);

  double s = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    const double u = 2.0 * xs[t] + 0.1;
    const double sp = xs[t] > 0 ? xs[t] + std::log1p(std::exp(-xs[t])) : std::log1p(std::exp(xs[t]));
    const double a = std::exp(-sp);
    s = a * s + (1.0 - a) * u;
    const double expect = 1.5 * s + 0.5 * xs[t];
    REQUIRE(std::abs(y.values()[t] - expect) < 1e-9);
  }
}

TEST_CASE("selective scan passes gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(23);
  SsmWeights<double> w;
  w.w_u = make_param(set, "wu", {4, 4}, rng);
  w.b_u = make_param(set, "bu", {4}, rng);
  w.w_delta = make_param(set, "wd", {4, 4}, rng);
  w.b_delta = make_param(set, "bd", {4}, rng);
  w.out_scale = make_param(set, "c", {4}, rng);
  w.skip = make_param(set, "s", {4}, rng);
  auto x = make_param(set, "x", {2, 5, 4}, rng);
  auto err = grad_check([&] { return sum(mul(selective_ssm_scan(x, w), selective_ssm_scan(x, w))); },
                        set, {1e-5, 0, 23, 1e-4});
  REQUIRE(err < 1e-4);
}

namespace {
BackboneWeights<double> make_backbone(ParameterSet<double>& set, std::mt19937_64& rng) {
  BackboneWeights<double> bw;
  std::size_t in_c = 1;
  for (std::size_t c : {16u, 32u, 64u, 128u}) {
    ConvStageWeights<double> sw;
    const auto idx = std::to_string(bw.stages.size());
    sw.w = make_param(set, "bb" + idx + ".w", {c, 3, 3, in_c}, rng, -0.3, 0.3);
    sw.b = set.add("bb" + idx + ".b", T::zeros({c}));
    sw.proj_w = make_param(set, "bb" + idx + ".pw", {c, 1, 1, in_c}, rng, -0.3, 0.3);
    sw.proj_b = set.add("bb" + idx + ".pb", T::zeros({c}));
    bw.stages.push_back(std::move(sw));
    in_c = c;
  }
  return bw;
}
} // namespace

TEST_CASE("conv backbone is finite and deterministic on zero frames") {
  ParameterSet<double> set;
  std::mt19937_64 rng(29);
  auto bw = make_backbone(set, rng);
  auto frames = T::zeros({2, 1, 16, 16});
  auto a = conv_backbone(frames, bw);
  auto b = conv_backbone(frames, bw);
  REQUIRE(a.shape() == Shape{2, 128});
  for (std::size_t i = 0; i < a.numel(); ++i) {
    REQUIRE(std::isfinite(a.values()[i]));
    REQUIRE(a.values()[i] == b.values()[i]);
  }
}

TEST_CASE("conv backbone output is [B,128] for several frame sizes") {
  ParameterSet<double> set;
  std::mt19937_64 rng(31);
  auto bw = make_backbone(set, rng);
  for (std::size_t hw : {16u, 24u, 64u}) {
    auto frames = T::filled({3, 1, hw, hw}, 0.25);
    auto y = conv_backbone(frames, bw);
    REQUIRE(y.shape() == Shape{3, 128});
  }
  REQUIRE_THROWS_WITH(conv_backbone(T::zeros({1, 1, 4, 4}), bw),
                      Catch::Matchers::ContainsSubstring("input-too-small"));
}

TEST_CASE("conv2d passes gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(37);
  auto x = make_param_off_zero(set, "x", {2, 5, 5, 3}, rng);
  auto w = make_param_off_zero(set, "w", {4, 3, 3, 3}, rng);
  auto b = make_param(set, "b", {4}, rng);
  auto err = grad_check([&] { return sum(mul(conv2d(x, w, b, 2, 1), conv2d(x, w, b, 2, 1))); },
                        set, {1e-5, 20, 41, 1e-4});
  REQUIRE(err < 1e-4);
}

TEST_CASE("conv backbone micro-config passes gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(121);
  auto bw = make_backbone(set, rng);
  auto frames = make_param_off_zero(set, "frames", {8, 1, 16, 16}, rng);
  auto err = grad_check([&] { return mean(conv_backbone(frames, bw)); }, set,
                        {1e-5, 8, 43, 1e-4});
  REQUIRE(err < 1e-4);
}

TEST_CASE("positional encoding endpoints and bounds") {
  auto pe = positional_encoding<double>(64, 32);
  for (std::size_t i = 0; i < 16; ++i) {
    REQUIRE(pe.values()[2 * i] == 0.0);
    REQUIRE(pe.values()[2 * i + 1] == 1.0);
  }
  for (auto v : pe.values()) {
    REQUIRE(v <= 1.0);
    REQUIRE(v >= -1.0);
  }
  // rows pairwise distinct
  for (std::size_t a = 0; a < 64; ++a)
    for (std::size_t b = a + 1; b < 64; ++b) {
      bool same = true;
      for (std::size_t j = 0; j < 32 && same; ++j)
        same = pe.values()[a * 32 + j] == pe.values()[b * 32 + j];
      REQUIRE_FALSE(same);
    }
  REQUIRE_THROWS_WITH(positional_encoding<double>(4, 7),
                      Catch::Matchers::ContainsSubstring("odd-d"));
}

TEST_CASE("cross entropy of confident correct predictions vanishes") {
  auto logits = T::from_values({2, 3}, {100, 0, 0, 0, 100, 0});
  auto loss = cross_entropy(logits, {0, 1});
  REQUIRE(loss.item() < 1e-9);
}

TEST_CASE("cross entropy of uniform logits is P ln K") {
  const std::size_t p = 4, k = 7;
  auto logits = T::filled({p, k}, 0.37);
  auto loss = cross_entropy(logits, {0, 3, 6, 2});
  REQUIRE(loss.item() == Catch::Approx(p * std::log(double(k))).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  auto logits = T::zeros({2, 5});
  REQUIRE_THROWS_WITH(cross_entropy(logits, {0, 5}),
                      Catch::Matchers::ContainsSubstring("label-out-of-range"));
}

TEST_CASE("cross entropy passes gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(41);
  auto logits = make_param(set, "logits", {2, 5}, rng);
  auto err = grad_check([&] { return cross_entropy(logits, {1, 4}); }, set, {1e-6, 0, 1, 1e-8});
  REQUIRE(err < 1e-6);
}

TEST_CASE("adam with zero gradients is a fixed point") {
  ParameterSet<double> set;
  auto w = set.add("w", T::from_values({3}, {1.0, -2.0, 0.5}));
  w.zero_grad();
  AdamState<double> st;
  adam_step(set, st);
  REQUIRE(w.values() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam descends on a quadratic") {
  ParameterSet<double> set;
  auto w = set.add("w", T::scalar(1.0));
  AdamState<double> st;
  st.lr = 0.1;
  auto loss = mul(w, w);
  loss.backward();
  adam_step(set, st);
  REQUIRE(w.values()[0] < 1.0);
}

TEST_CASE("adam reports missing gradients") {
  ParameterSet<double> set;
  set.add("w", T::scalar(1.0));
  AdamState<double> st;
  REQUIRE_THROWS_WITH(adam_step(set, st), Catch::Matchers::ContainsSubstring("missing-gradient"));
}

TEST_CASE("dropout is the identity at rate zero and in eval mode") {
  std::mt19937_64 rng(43);
  auto x = T::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  auto y0 = dropout(x, 0.0, rng, true);
  REQUIRE(y0.values() == x.values());
  auto y1 = dropout(x, 0.9, rng, false);
  REQUIRE(y1.values() == x.values());
  auto y2 = dropout(x, 0.5, rng, true);
  for (std::size_t i = 0; i < 6; ++i) {
    const bool zeroed = y2.values()[i] == 0.0;
    const bool scaled = std::abs(y2.values()[i] - 2.0 * x.values()[i]) < 1e-12;
    REQUIRE((zeroed || scaled));
  }
}

TEST_CASE("elementwise and movement ops pass gradient checking") {
  ParameterSet<double> set;
  std::mt19937_64 rng(47);
  auto a = make_param_off_zero(set, "a", {2, 3, 4}, rng);
  auto b = make_param_off_zero(set, "b", {2, 3, 4}, rng);
  auto v = make_param_off_zero(set, "v", {4}, rng);
  auto m1 = make_param(set, "m1", {2, 3, 5}, rng);
  auto m2 = make_param(set, "m2", {2, 5, 4}, rng);

  auto loss_fn = [&] {
    auto x = add(a, v);                         // suffix broadcast
    x = mul(x, b);
    x = sub(x, a);
    x = relu(x);
    x = add(x, sigmoid(b));
    x = add(x, softplus(a));
    x = add(x, beamloop::nn::exp(scale(b, 0.3)));
    auto moved = permute(reshape(x, {2, 4, 3}), {2, 0, 1}); // [3,2,4]
    auto cat = concat_last(x, affine(b, 0.5, 0.1));
    auto prod = bmm(m1, m2);                    // [2,3,4]
    auto prod2 = bmm_nt(prod, b);               // [2,3,3]
    return add(add(sum(moved), sum(cat)), add(sum(prod2), mean(prod)));
  };
  auto err = grad_check(loss_fn, set, {1e-5, 24, 51, 1e-4});
  REQUIRE(err < 1e-4);
}

TEST_CASE("dropout gradient matches its mask") {
  ParameterSet<double> set;
  std::mt19937_64 rng(53);
  auto x = make_param_off_zero(set, "x", {4, 4}, rng);
  auto loss_fn = [&] {
    std::mt19937_64 mask_rng(99); // identical mask on every call
    return sum(mul(dropout(x, 0.4, mask_rng, true), x));
  };
  auto err = grad_check(loss_fn, set);
  REQUIRE(err < 1e-5);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  namespace fs = std::filesystem;
  ParameterSet<float> set;
  std::mt19937_64 rng(59);
  std::uniform_real_distribution<float> dist(-2, 2);
  auto w1 = set.add("enc.w", Tensor<float>::zeros({4, 3}));
  auto w2 = set.add("dec.w", Tensor<float>::zeros({2, 4}));
  for (auto& v : w1.values()) v = dist(rng);
  for (auto& v : w2.values()) v = dist(rng);

  const auto dir = fs::temp_directory_path() / "beamloop_ckpt_test";
  fs::create_directories(dir);
  const auto p1 = (dir / "a.ckpt").string();
  const auto p2 = (dir / "b.ckpt").string();
  save_checkpoint(set, p1);

  ParameterSet<float> loaded;
  loaded.add("enc.w", Tensor<float>::zeros({4, 3}));
  loaded.add("dec.w", Tensor<float>::zeros({2, 4}));
  load_checkpoint(loaded, p1);
  save_checkpoint(loaded, p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  REQUIRE_FALSE(b1.empty());
  REQUIRE(b1 == b2);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint loader reports corruption") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "beamloop_ckpt_corrupt";
  fs::create_directories(dir);
  const auto path = (dir / "t.ckpt").string();

  ParameterSet<float> set;
  set.add("w", Tensor<float>::filled({8}, 1.0f));
  save_checkpoint(set, path);
  // truncate
  fs::resize_file(path, fs::file_size(path) / 2);
  ParameterSet<float> fresh;
  fresh.add("w", Tensor<float>::zeros({8}));
  REQUIRE_THROWS_WITH(load_checkpoint(fresh, path),
                      Catch::Matchers::ContainsSubstring("truncated"));
  REQUIRE_THROWS_WITH(load_checkpoint_raw((dir / "missing.ckpt").string()),
                      Catch::Matchers::ContainsSubstring("missing-file"));
  fs::remove_all(dir);
}
