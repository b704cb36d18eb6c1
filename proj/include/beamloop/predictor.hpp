// SPDX-License-Identifier: Apache-2.0
//
// Hybrid beam prediction model: a numeric encoder (projection + positional
// encoding + selective-SSM residual blocks), an image encoder (shared conv
// backbone per frame + the same temporal stack), a bidirectional
// cross-attention encoder with gated fusion, and a shared non-autoregressive
// transformer decoder with a classification head. Three data-flow modes
// route the branches.
#pragma once

#include <chrono>
#include <optional>

#include <nlohmann/json.hpp>

#include "beamloop/dataset.hpp"
#include "beamloop/nn/checkpoint.hpp"
#include "beamloop/nn/layers.hpp"
#include "beamloop/nn/optim.hpp"

namespace beamloop {

enum class Mode { Numeric, Image, Multi };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Numeric: return "numeric";
    case Mode::Image: return "image";
    case Mode::Multi: return "multi";
  }
  return "multi";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "numeric" || s == "Numeric") return Mode::Numeric;
  if (s == "image" || s == "Image") return Mode::Image;
  if (s == "multi" || s == "Multi") return Mode::Multi;
  throw std::invalid_argument("unknown mode '" + s + "' (expected numeric|image|multi)");
}

struct PredictorConfig {
  Mode mode = Mode::Multi;
  std::size_t hidden_dim = 32;    // d
  std::size_t numeric_blocks = 2; // SSM blocks in the numeric encoder
  std::size_t image_blocks = 2;   // SSM blocks in the image encoder
  std::size_t attn_heads = 2;
  std::size_t decoder_layers = 2;
  std::size_t num_classes = 64; // K, must equal the dataset codebook Q
  std::size_t window = 10;      // T
  std::size_t horizon = 5;      // P
  double dropout = 0.1;
  std::size_t numeric_dim = kNumericFeatureDim; // d_n
  std::size_t feature_dim = nn::kBackboneFeatureDim; // d_r
  std::size_t frame_h = 64;
  std::size_t frame_w = 64;
  std::uint64_t seed = 6;
  std::vector<double> input_scale; // per-feature numeric scaling; empty = identity

  void validate() const {
    if (hidden_dim == 0 || hidden_dim % 2 != 0)
      throw std::invalid_argument("PredictorConfig: hidden_dim must be positive and even");
    if (attn_heads == 0 || hidden_dim % attn_heads != 0)
      throw std::invalid_argument("PredictorConfig: hidden_dim must divide into attn_heads");
    if (num_classes < 2 || window < 1 || horizon < 1 || numeric_dim < 1)
      throw std::invalid_argument("PredictorConfig: invalid sizes");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("PredictorConfig: dropout must be in [0,1)");
    if (!input_scale.empty() && input_scale.size() != numeric_dim)
      throw std::invalid_argument("PredictorConfig: input_scale must have d_n entries");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["mode"] = beamloop::to_string(mode);
    j["hidden_dim"] = hidden_dim;
    j["numeric_blocks"] = numeric_blocks;
    j["image_blocks"] = image_blocks;
    j["attn_heads"] = attn_heads;
    j["decoder_layers"] = decoder_layers;
    j["num_classes"] = num_classes;
    j["window"] = window;
    j["horizon"] = horizon;
    j["dropout"] = dropout;
    j["numeric_dim"] = numeric_dim;
    j["feature_dim"] = feature_dim;
    j["frame_h"] = frame_h;
    j["frame_w"] = frame_w;
    j["seed"] = seed;
    j["input_scale"] = input_scale;
    return j;
  }

  static PredictorConfig from_json(const ordered_json& j) {
    PredictorConfig c;
    c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.numeric_blocks = j.at("numeric_blocks").get<std::size_t>();
    c.image_blocks = j.at("image_blocks").get<std::size_t>();
    c.attn_heads = j.at("attn_heads").get<std::size_t>();
    c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.window = j.at("window").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.numeric_dim = j.at("numeric_dim").get<std::size_t>();
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.frame_h = j.at("frame_h").get<std::size_t>();
    c.frame_w = j.at("frame_w").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.input_scale = j.value("input_scale", std::vector<double>{});
    return c;
  }
};

struct Prediction {
  std::vector<float> logits;        // P*K
  std::vector<float> probabilities; // P*K, softmax rows
  std::vector<std::size_t> beam_indices; // P, per-row argmax
  double per_frame_latency_ms = 0.0;
};

struct ModelStats {
  std::size_t encode_numeric_calls = 0;
  std::size_t encode_image_calls = 0;
  std::size_t fuse_calls = 0;
};

template <typename S>
class HybridModelT {
public:
  using Tensor = nn::Tensor<S>;

  explicit HybridModelT(PredictorConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    build_parameters();
  }

  const PredictorConfig& config() const { return cfg_; }
  PredictorConfig& mutable_config() { return cfg_; }
  nn::ParameterSet<S>& params() { return params_; }
  const nn::ParameterSet<S>& params() const { return params_; }
  std::size_t param_count() const { return params_.total_elements(); }

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }
  std::mt19937_64& rng() { return rng_; }
  const ModelStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }

  /// Numeric branch: projection, positional encoding, N pre-norm SSM
  /// residual blocks. x is [B,T,d_n] (or [T,d_n]).
  Tensor encode_numeric(const Tensor& x) {
    ++stats_.encode_numeric_calls;
    auto in = x.rank() == 2 ? nn::reshape(x, {1, x.dim(0), x.dim(1)}) : x;
    check_dims(in, {0, cfg_.window, cfg_.numeric_dim}, "encode_numeric");
    auto h = nn::add(nn::linear(in, p("num.proj.w"), p("num.proj.b")), pe_window_);
    for (std::size_t l = 0; l < cfg_.numeric_blocks; ++l)
      h = residual_ssm_block(h, "num.blk" + std::to_string(l));
    return h;
  }

  /// Image branch: shared conv backbone per frame, projection to d, then
  /// the same temporal stack. frames is [B,T,H,W] (or [T,H,W]) in [0,1].
  Tensor encode_image(const Tensor& frames) {
    ++stats_.encode_image_calls;
    auto in = frames.rank() == 3
                  ? nn::reshape(frames, {1, frames.dim(0), frames.dim(1), frames.dim(2)})
                  : frames;
    if (in.rank() != 4 || in.dim(1) != cfg_.window || in.dim(2) != cfg_.frame_h ||
        in.dim(3) != cfg_.frame_w)
      throw std::invalid_argument("encode_image: frame-size-mismatch, got " +
                                  nn::shape_str(in.shape()));
    const std::size_t batch = in.dim(0);
    auto flat = nn::reshape(in, {batch * cfg_.window, 1, cfg_.frame_h, cfg_.frame_w});
    auto feats = nn::conv_backbone(flat, backbone_);
    auto seq = nn::reshape(feats, {batch, cfg_.window, cfg_.feature_dim});
    auto h = nn::add(nn::linear(seq, p("img.proj.w"), p("img.proj.b")), pe_window_);
    for (std::size_t l = 0; l < cfg_.image_blocks; ++l)
      h = residual_ssm_block(h, "img.blk" + std::to_string(l));
    return h;
  }

  /// Bidirectional cross-attention with gated fusion:
  ///   Z_v = LN(U_v + FFN(U_v)), U_v = LN(H_v + MHA(H_v, H_n, H_n))
  ///   Z_n symmetric, G = sigmoid(W_g [Z_v || Z_n] + b_g),
  ///   M = G .* Z_v + (1-G) .* Z_n.
  /// gate_override replaces G with a constant (test hook).
  Tensor fuse_multimodal(const Tensor& h_numeric, const Tensor& h_visual,
                         std::optional<S> gate_override = std::nullopt) {
    ++stats_.fuse_calls;
    auto zv = refine(h_visual, h_numeric, "fuse.v");
    auto zn = refine(h_numeric, h_visual, "fuse.n");
    if (gate_override.has_value()) {
      const S g = *gate_override;
      return nn::add(nn::scale(zv, g), nn::scale(zn, S(1) - g));
    }
    auto gate = nn::sigmoid(nn::linear(nn::concat_last(zv, zn), p("fuse.gate.w"), p("fuse.gate.b")));
    return nn::add(nn::mul(zv, gate), nn::mul(zn, nn::affine(gate, S(-1), S(1))));
  }

  /// Shared decoder: zero-initialized queries plus positional encoding,
  /// L layers of self-attention, cross-attention over the memory and FFN,
  /// then the K-class head.
  Tensor decode(const Tensor& memory) {
    const std::size_t batch = memory.dim(0);
    auto queries = nn::add(Tensor::zeros({batch, cfg_.horizon, cfg_.hidden_dim}), pe_horizon_);
    for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
      const std::string pre = "dec.l" + std::to_string(l);
      auto a1 = ln(nn::add(queries, attn(queries, queries, queries, pre + ".self")), pre + ".ln1");
      auto a2 = ln(nn::add(a1, attn(a1, memory, memory, pre + ".cross")), pre + ".ln2");
      queries = ln(nn::add(a2, ffn(a2, pre + ".ffn")), pre + ".ln3");
    }
    return nn::linear(queries, p("head.w"), p("head.b"));
  }

  /// Routes the enabled branches for the requested mode and returns logits
  /// [B,P,K]. Pass nullptr for the modality a mode does not use.
  Tensor forward(Mode mode, const Tensor* numeric, const Tensor* frames) {
    switch (mode) {
      case Mode::Numeric:
        if (numeric == nullptr) throw std::invalid_argument("missing-modality: numeric input required");
        return decode(encode_numeric(*numeric));
      case Mode::Image:
        if (frames == nullptr) throw std::invalid_argument("missing-modality: image input required");
        return decode(encode_image(*frames));
      case Mode::Multi: {
        if (numeric == nullptr || frames == nullptr)
          throw std::invalid_argument("missing-modality: multi mode requires numeric and image input");
        auto hn = encode_numeric(*numeric);
        auto hv = encode_image(*frames);
        return decode(fuse_multimodal(hn, hv));
      }
    }
    throw std::logic_error("forward: unreachable");
  }

  /// Parameter names trained by a mode. Unused branch parameters still
  /// exist in checkpoints so the mode switch never invalidates a file.
  std::vector<std::string> active_param_names(Mode mode) const {
    std::vector<std::string> out;
    for (const auto& name : params_.names()) {
      const bool numeric = name.rfind("num.", 0) == 0;
      const bool image = name.rfind("img.", 0) == 0;
      const bool fuse = name.rfind("fuse.", 0) == 0;
      bool active = !numeric && !image && !fuse; // decoder + head
      if (mode == Mode::Numeric) active = active || numeric;
      if (mode == Mode::Image) active = active || image;
      if (mode == Mode::Multi) active = true;
      if (active) out.push_back(name);
    }
    return out;
  }

  // --- tensor preparation -------------------------------------------------

  Tensor numeric_tensor(const std::vector<const Sample*>& batch) const {
    const std::size_t b = batch.size(), t = cfg_.window, d = cfg_.numeric_dim;
    auto out = Tensor::zeros({b, t, d});
    for (std::size_t i = 0; i < b; ++i) {
      if (batch[i]->numeric.size() != t * d)
        throw std::invalid_argument("numeric_tensor: sample " + batch[i]->id + " window mismatch");
      for (std::size_t j = 0; j < t * d; ++j) {
        const double scale =
            cfg_.input_scale.empty() ? 1.0 : cfg_.input_scale[j % d];
        out.values()[i * t * d + j] = static_cast<S>(batch[i]->numeric[j] * scale);
      }
    }
    return out;
  }

  Tensor image_tensor(const std::vector<const Sample*>& batch) const {
    const std::size_t b = batch.size(), t = cfg_.window;
    const std::size_t hw = cfg_.frame_h * cfg_.frame_w;
    auto out = Tensor::zeros({b, t, cfg_.frame_h, cfg_.frame_w});
    for (std::size_t i = 0; i < b; ++i) {
      if (batch[i]->frames.size() != t)
        throw std::invalid_argument("image_tensor: sample " + batch[i]->id + " lacks frames");
      for (std::size_t ft = 0; ft < t; ++ft)
        for (std::size_t j = 0; j < hw; ++j)
          out.values()[(i * t + ft) * hw + j] =
              static_cast<S>(batch[i]->frames[ft][j]) / S(255);
    }
    return out;
  }

private:
  Tensor& p(const std::string& name) { return params_.at(name); }

  void check_dims(const Tensor& t, const nn::Shape& expect, const char* op) const {
    // expect[0] == 0 means any batch
    if (t.rank() != expect.size()) throw std::invalid_argument(std::string(op) + ": shape-mismatch");
    for (std::size_t i = 1; i < expect.size(); ++i)
      if (t.dim(i) != expect[i])
        throw std::invalid_argument(std::string(op) + ": shape-mismatch, got " +
                                    nn::shape_str(t.shape()));
  }

  Tensor residual_ssm_block(const Tensor& h, const std::string& pre) {
    nn::SsmWeights<S> w{p(pre + ".ssm.wu"), p(pre + ".ssm.bu"), p(pre + ".ssm.wd"),
                        p(pre + ".ssm.bd"), p(pre + ".ssm.c"), p(pre + ".ssm.skip")};
    auto mixed = nn::selective_ssm_scan(ln(h, pre + ".ln"), w);
    return nn::add(h, nn::dropout(mixed, cfg_.dropout, rng_, training_));
  }

  Tensor ln(const Tensor& x, const std::string& pre) {
    return nn::layer_norm(x, p(pre + ".g"), p(pre + ".b"));
  }

  Tensor attn(const Tensor& q, const Tensor& k, const Tensor& v, const std::string& pre) {
    nn::MhaWeights<S> w{p(pre + ".wq"), p(pre + ".bq"), p(pre + ".wk"), p(pre + ".bk"),
                        p(pre + ".wv"), p(pre + ".bv"), p(pre + ".wo"), p(pre + ".bo")};
    return nn::multi_head_attention(q, k, v, w, cfg_.attn_heads);
  }

  Tensor ffn(const Tensor& x, const std::string& pre) {
    nn::FfnWeights<S> w{p(pre + ".w1"), p(pre + ".b1"), p(pre + ".w2"), p(pre + ".b2")};
    return nn::feed_forward(x, w);
  }

  // cross-attention + FFN refinement of `query_side` against `other`
  Tensor refine(const Tensor& query_side, const Tensor& other, const std::string& pre) {
    auto u = ln(nn::add(query_side, attn(query_side, other, other, pre + ".attn")), pre + ".ln1");
    return ln(nn::add(u, ffn(u, pre + ".ffn")), pre + ".ln2");
  }

  void add_weight(const std::string& name, nn::Shape shape, std::size_t fan_in) {
    params_.add(name, nn::kaiming_uniform<S>(std::move(shape), fan_in, rng_));
  }
  void add_zeros(const std::string& name, nn::Shape shape) {
    params_.add(name, Tensor::zeros(std::move(shape)));
  }
  void add_ones(const std::string& name, nn::Shape shape) {
    params_.add(name, Tensor::filled(std::move(shape), S(1)));
  }

  void add_ln(const std::string& pre) {
    add_ones(pre + ".g", {cfg_.hidden_dim});
    add_zeros(pre + ".b", {cfg_.hidden_dim});
  }

  void add_mha(const std::string& pre) {
    const std::size_t d = cfg_.hidden_dim;
    for (const char* n : {".wq", ".wk", ".wv", ".wo"}) add_weight(pre + n, {d, d}, d);
    for (const char* n : {".bq", ".bk", ".bv", ".bo"}) add_zeros(pre + n, {d});
  }

  void add_ffn(const std::string& pre) {
    const std::size_t d = cfg_.hidden_dim;
    add_weight(pre + ".w1", {4 * d, d}, d);
    add_zeros(pre + ".b1", {4 * d});
    add_weight(pre + ".w2", {d, 4 * d}, 4 * d);
    add_zeros(pre + ".b2", {d});
  }

  void add_ssm_block(const std::string& pre) {
    const std::size_t d = cfg_.hidden_dim;
    add_ln(pre + ".ln");
    add_weight(pre + ".ssm.wu", {d, d}, d);
    add_zeros(pre + ".ssm.bu", {d});
    add_weight(pre + ".ssm.wd", {d, d}, d);
    add_zeros(pre + ".ssm.bd", {d});
    add_ones(pre + ".ssm.c", {d});
    add_ones(pre + ".ssm.skip", {d});
  }

  void build_parameters() {
    const std::size_t d = cfg_.hidden_dim;

    add_weight("num.proj.w", {d, cfg_.numeric_dim}, cfg_.numeric_dim);
    add_zeros("num.proj.b", {d});
    for (std::size_t l = 0; l < cfg_.numeric_blocks; ++l)
      add_ssm_block("num.blk" + std::to_string(l));

    std::size_t in_c = 1;
    std::size_t stage = 0;
    for (std::size_t c : {16u, 32u, 64u, 128u}) {
      const std::string pre = "img.bb" + std::to_string(stage++);
      add_weight(pre + ".w", {c, 3, 3, in_c}, 9 * in_c);
      add_zeros(pre + ".b", {c});
      add_weight(pre + ".pw", {c, 1, 1, in_c}, in_c);
      add_zeros(pre + ".pb", {c});
      in_c = c;
    }
    add_weight("img.proj.w", {d, cfg_.feature_dim}, cfg_.feature_dim);
    add_zeros("img.proj.b", {d});
    for (std::size_t l = 0; l < cfg_.image_blocks; ++l)
      add_ssm_block("img.blk" + std::to_string(l));

    for (const char* side : {"fuse.v", "fuse.n"}) {
      add_mha(std::string(side) + ".attn");
      add_ln(std::string(side) + ".ln1");
      add_ffn(std::string(side) + ".ffn");
      add_ln(std::string(side) + ".ln2");
    }
    add_weight("fuse.gate.w", {d, 2 * d}, 2 * d);
    add_zeros("fuse.gate.b", {d}); // gate starts near 0.5

    for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
      const std::string pre = "dec.l" + std::to_string(l);
      add_mha(pre + ".self");
      add_ln(pre + ".ln1");
      add_mha(pre + ".cross");
      add_ln(pre + ".ln2");
      add_ffn(pre + ".ffn");
      add_ln(pre + ".ln3");
    }
    add_weight("head.w", {cfg_.num_classes, d}, d);
    add_zeros("head.b", {cfg_.num_classes});

    pe_window_ = nn::positional_encoding<S>(cfg_.window, d);
    pe_horizon_ = nn::positional_encoding<S>(cfg_.horizon, d);

    // backbone weight handles for conv_backbone
    in_c = 1;
    for (std::size_t s = 0; s < 4; ++s) {
      const std::string pre = "img.bb" + std::to_string(s);
      backbone_.stages.push_back(nn::ConvStageWeights<S>{p(pre + ".w"), p(pre + ".b"),
                                                         p(pre + ".pw"), p(pre + ".pb")});
    }
  }

  PredictorConfig cfg_;
  nn::ParameterSet<S> params_;
  nn::BackboneWeights<S> backbone_;
  Tensor pe_window_, pe_horizon_;
  std::mt19937_64 rng_;
  bool training_ = false;
  ModelStats stats_;
};

using HybridModel = HybridModelT<float>;

/// Runs one sample through the model in eval mode, timing the forward pass
/// (encoders, fusion, decoder and head; input staging excluded) and
/// reporting wall time per predicted frame.
template <typename S>
Prediction predict(HybridModelT<S>& model, Mode mode, const Sample* sample_numeric,
                   const Sample* sample_frames) {
  const auto& cfg = model.config();
  const bool was_training = model.training();
  model.set_training(false);

  nn::Tensor<S> numeric, frames;
  if (sample_numeric != nullptr) numeric = model.numeric_tensor({sample_numeric});
  if (sample_frames != nullptr && !sample_frames->frames.empty())
    frames = model.image_tensor({sample_frames});

  const auto t0 = std::chrono::steady_clock::now();
  auto logits = model.forward(mode, numeric.defined() ? &numeric : nullptr,
                              frames.defined() ? &frames : nullptr);
  auto probs = nn::softmax_last(logits);
  const auto t1 = std::chrono::steady_clock::now();

  Prediction out;
  out.per_frame_latency_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(cfg.horizon);
  out.logits.reserve(logits.numel());
  out.probabilities.reserve(probs.numel());
  for (auto v : logits.values()) out.logits.push_back(static_cast<float>(v));
  for (auto v : probs.values()) out.probabilities.push_back(static_cast<float>(v));
  for (std::size_t row = 0; row < cfg.horizon; ++row) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < cfg.num_classes; ++k)
      if (probs.values()[row * cfg.num_classes + k] > probs.values()[row * cfg.num_classes + best])
        best = k;
    out.beam_indices.push_back(best);
  }
  model.set_training(was_training);
  return out;
}

/// Checkpoint plus config sidecar (<path>.json).
template <typename S>
void save_model(HybridModelT<S>& model, const std::string& checkpoint_path) {
  nn::save_checkpoint(model.params(), checkpoint_path);
  std::ofstream os(checkpoint_path + ".json");
  if (!os) throw std::runtime_error("io-failure: cannot write " + checkpoint_path + ".json");
  ordered_json j = model.config().to_json();
  ordered_json active;
  for (const auto& name : model.active_param_names(model.config().mode)) active.push_back(name);
  j["active_params"] = active;
  os << j.dump(2) << "\n";
}

inline PredictorConfig load_model_config(const std::string& checkpoint_path) {
  std::ifstream is(checkpoint_path + ".json");
  if (!is) throw std::runtime_error("missing-file: " + checkpoint_path + ".json");
  ordered_json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("schema-violation: config sidecar: " + std::string(e.what()));
  }
  return PredictorConfig::from_json(j);
}

template <typename S = float>
HybridModelT<S> load_model(const std::string& checkpoint_path) {
  HybridModelT<S> model(load_model_config(checkpoint_path));
  nn::load_checkpoint(model.params(), checkpoint_path);
  return model;
}

} // namespace beamloop
