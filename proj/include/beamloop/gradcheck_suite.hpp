// SPDX-License-Identifier: Apache-2.0
//
// Central-difference verification battery: every differentiable primitive
// plus the end-to-end micro model (d=8, T=3, P=2, K=4, N=1, h=1, L=1,
// 8x8 frames), all in 64-bit mode.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "beamloop/nn/layers.hpp"
#include "beamloop/nn/optim.hpp"
#include "beamloop/predictor.hpp"

namespace beamloop {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  bool passed(double tol = 1e-4) const { return max_rel_error < tol; }
};

namespace detail {

template <typename Fill>
nn::Tensor<double> gc_tensor(nn::Shape shape, std::mt19937_64& rng, Fill fill) {
  auto t = nn::Tensor<double>::zeros(std::move(shape));
  for (auto& v : t.values()) v = fill(rng);
  return t;
}

inline double gc_uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  return d(rng);
}

// bounded away from zero so ReLU kinks stay outside the probe step
inline double gc_off_zero(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  return (sign(rng) ? 1.0 : -1.0) * mag(rng);
}

} // namespace detail

/// Runs the full battery; each entry reports the worst relative error
/// between reverse-mode and central-difference gradients.
inline std::vector<GradCheckResult> run_gradcheck_suite() {
  using T = nn::Tensor<double>;
  std::vector<GradCheckResult> results;

  auto check = [&](const std::string& name, auto builder, double step = 1e-5) {
    nn::ParameterSet<double> set;
    std::mt19937_64 rng(101 + results.size());
    auto loss_fn = builder(set, rng);
    nn::GradCheckOptions opts;
    opts.step = step;
    opts.max_elems_per_param = 24;
    opts.seed = 301 + results.size();
    results.push_back({name, nn::grad_check(loss_fn, set, opts)});
  };

  check("linear", [](auto& set, auto& rng) {
    auto x = set.add("x", detail::gc_tensor({3, 4}, rng, detail::gc_uniform));
    auto w = set.add("w", detail::gc_tensor({5, 4}, rng, detail::gc_uniform));
    auto b = set.add("b", detail::gc_tensor({5}, rng, detail::gc_uniform));
    return [=]() mutable { return nn::sum(nn::mul(nn::linear(x, w, b), nn::linear(x, w, b))); };
  });

  check("layer_norm", [](auto& set, auto& rng) {
    auto x = set.add("x", detail::gc_tensor({4, 6}, rng, detail::gc_uniform));
    auto g = set.add("g", detail::gc_tensor({6}, rng, detail::gc_off_zero));
    auto b = set.add("b", detail::gc_tensor({6}, rng, detail::gc_uniform));
    return [=]() mutable {
      return nn::sum(nn::mul(nn::layer_norm(x, g, b), nn::layer_norm(x, g, b)));
    };
  });

  check("softmax", [](auto& set, auto& rng) {
    auto x = set.add("x", detail::gc_tensor({3, 7}, rng, detail::gc_uniform));
    auto w = set.add("w", detail::gc_tensor({3, 7}, rng, detail::gc_uniform));
    return [=]() mutable { return nn::sum(nn::mul(nn::softmax_last(x), w)); };
  });

  check("cross_entropy", [](auto& set, auto& rng) {
    auto x = set.add("logits", detail::gc_tensor({4, 5}, rng, detail::gc_uniform));
    return [=]() mutable { return nn::cross_entropy(x, {1, 4, 0, 2}); };
  });

  check("multi_head_attention", [](auto& set, auto& rng) {
    nn::MhaWeights<double> w;
    w.wq = set.add("wq", detail::gc_tensor({6, 6}, rng, detail::gc_uniform));
    w.bq = set.add("bq", detail::gc_tensor({6}, rng, detail::gc_uniform));
    w.wk = set.add("wk", detail::gc_tensor({6, 6}, rng, detail::gc_uniform));
    w.bk = set.add("bk", detail::gc_tensor({6}, rng, detail::gc_uniform));
    w.wv = set.add("wv", detail::gc_tensor({6, 6}, rng, detail::gc_uniform));
    w.bv = set.add("bv", detail::gc_tensor({6}, rng, detail::gc_uniform));
    w.wo = set.add("wo", detail::gc_tensor({6, 6}, rng, detail::gc_uniform));
    w.bo = set.add("bo", detail::gc_tensor({6}, rng, detail::gc_uniform));
    auto q = set.add("q", detail::gc_tensor({2, 3, 6}, rng, detail::gc_uniform));
    auto k = set.add("k", detail::gc_tensor({2, 4, 6}, rng, detail::gc_uniform));
    return [=]() mutable { return nn::sum(nn::multi_head_attention(q, k, k, w, 2)); };
  });

  check("selective_ssm_scan", [](auto& set, auto& rng) {
    nn::SsmWeights<double> w;
    w.w_u = set.add("wu", detail::gc_tensor({4, 4}, rng, detail::gc_uniform));
    w.b_u = set.add("bu", detail::gc_tensor({4}, rng, detail::gc_uniform));
    w.w_delta = set.add("wd", detail::gc_tensor({4, 4}, rng, detail::gc_uniform));
    w.b_delta = set.add("bd", detail::gc_tensor({4}, rng, detail::gc_uniform));
    w.out_scale = set.add("c", detail::gc_tensor({4}, rng, detail::gc_uniform));
    w.skip = set.add("s", detail::gc_tensor({4}, rng, detail::gc_uniform));
    auto x = set.add("x", detail::gc_tensor({2, 5, 4}, rng, detail::gc_uniform));
    return [=]() mutable {
      return nn::sum(nn::mul(nn::selective_ssm_scan(x, w), nn::selective_ssm_scan(x, w)));
    };
  });

  check("conv2d", [](auto& set, auto& rng) {
    auto x = set.add("x", detail::gc_tensor({2, 5, 5, 3}, rng, detail::gc_off_zero));
    auto w = set.add("w", detail::gc_tensor({4, 3, 3, 3}, rng, detail::gc_off_zero));
    auto b = set.add("b", detail::gc_tensor({4}, rng, detail::gc_uniform));
    return [=]() mutable {
      return nn::sum(nn::mul(nn::conv2d(x, w, b, 2, 1), nn::conv2d(x, w, b, 2, 1)));
    };
  });

  check("conv_backbone", [](auto& set, auto& rng) {
    nn::BackboneWeights<double> bw;
    std::size_t in_c = 1;
    std::size_t i = 0;
    for (std::size_t c : {16u, 32u, 64u, 128u}) {
      nn::ConvStageWeights<double> sw;
      const auto pre = "bb" + std::to_string(i++);
      std::uniform_real_distribution<double> d(-0.3, 0.3);
      sw.w = set.add(pre + ".w", detail::gc_tensor({c, 3, 3, in_c}, rng,
                                                   [&](auto& r) { return d(r); }));
      sw.b = set.add(pre + ".b", T::zeros({c}));
      sw.proj_w = set.add(pre + ".pw", detail::gc_tensor({c, 1, 1, in_c}, rng,
                                                         [&](auto& r) { return d(r); }));
      sw.proj_b = set.add(pre + ".pb", T::zeros({c}));
      bw.stages.push_back(std::move(sw));
      in_c = c;
    }
    auto frames = set.add("frames", detail::gc_tensor({8, 1, 16, 16}, rng, detail::gc_off_zero));
    return [=]() mutable { return nn::mean(nn::conv_backbone(frames, bw)); };
  },
  // four stacked ReLU stages: a smaller probe step keeps the differences
  // on one side of every kink
  1e-6);

  check("elementwise_and_movement", [](auto& set, auto& rng) {
    auto a = set.add("a", detail::gc_tensor({2, 3, 4}, rng, detail::gc_off_zero));
    auto b = set.add("b", detail::gc_tensor({2, 3, 4}, rng, detail::gc_off_zero));
    auto v = set.add("v", detail::gc_tensor({4}, rng, detail::gc_off_zero));
    return [=]() mutable {
      auto x = nn::mul(nn::add(a, v), b);
      x = nn::add(nn::relu(x), nn::sigmoid(b));
      x = nn::add(x, nn::softplus(a));
      x = nn::add(x, nn::exp(nn::scale(b, 0.25)));
      auto moved = nn::permute(nn::reshape(x, {2, 4, 3}), {2, 0, 1});
      auto cat = nn::concat_last(x, nn::affine(b, 0.5, 0.1));
      return nn::add(nn::sum(moved), nn::sum(cat));
    };
  });

  check("bmm", [](auto& set, auto& rng) {
    auto a = set.add("a", detail::gc_tensor({2, 3, 5}, rng, detail::gc_uniform));
    auto b = set.add("b", detail::gc_tensor({2, 5, 4}, rng, detail::gc_uniform));
    auto c = set.add("c", detail::gc_tensor({2, 6, 4}, rng, detail::gc_uniform));
    return [=]() mutable { return nn::sum(nn::bmm_nt(nn::bmm(a, b), c)); };
  });

  check("dropout", [](auto& set, auto& rng) {
    auto x = set.add("x", detail::gc_tensor({4, 4}, rng, detail::gc_off_zero));
    return [=]() mutable {
      std::mt19937_64 mask_rng(99);
      return nn::sum(nn::mul(nn::dropout(x, 0.4, mask_rng, true), x));
    };
  });

  // end-to-end micro model, training mode with fixed dropout masks
  {
    PredictorConfig cfg;
    cfg.mode = Mode::Multi;
    cfg.hidden_dim = 8;
    cfg.numeric_blocks = 1;
    cfg.image_blocks = 1;
    cfg.attn_heads = 1;
    cfg.decoder_layers = 1;
    cfg.num_classes = 4;
    cfg.window = 3;
    cfg.horizon = 2;
    cfg.numeric_dim = 5;
    cfg.frame_h = 8;
    cfg.frame_w = 8;
    cfg.dropout = 0.1;
    cfg.seed = 6;
    HybridModelT<double> model(cfg);
    model.set_training(true);
    std::mt19937_64 rng(991);
    auto x = detail::gc_tensor({2, 3, 5}, rng, detail::gc_uniform);
    auto frames = detail::gc_tensor({2, 3, 8, 8}, rng, [](auto& r) {
      std::uniform_real_distribution<double> d(0.05, 0.95);
      return d(r);
    });
    const std::vector<std::size_t> labels{1, 3, 0, 2};
    auto loss_fn = [&] {
      model.rng().seed(777);
      return nn::cross_entropy(model.forward(Mode::Multi, &x, &frames), labels);
    };
    nn::GradCheckOptions opts;
    opts.max_elems_per_param = 6;
    opts.seed = 57;
    results.push_back({"hybrid_micro_model", nn::grad_check(loss_fn, model.params(), opts)});
  }

  return results;
}

} // namespace beamloop
