// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "beamloop/training.hpp"

using namespace beamloop;
namespace fs = std::filesystem;

namespace {

PredictorConfig micro_cfg() {
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
  return cfg;
}

template <typename S>
nn::Tensor<S> random_tensor(nn::Shape shape, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  auto t = nn::Tensor<S>::zeros(std::move(shape));
  for (auto& v : t.values()) v = static_cast<S>(dist(rng));
  return t;
}

// Tiny synthetic dataset: labels follow the azimuth-proportional feature.
Dataset toy_dataset(std::size_t n, std::size_t q = 4) {
  Dataset ds;
  ds.meta.num_beams = q;
  ds.meta.numeric_dim = 5;
  ds.meta.window = 3;
  ds.meta.horizon = 2;
  ds.meta.frame_h = 8;
  ds.meta.frame_w = 8;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = "toy" + std::to_string(i);
    s.traj = i;
    s.split = i % 10 < 7 ? "train" : "test";
    const double key = dist(rng);
    for (std::size_t t = 0; t < 3; ++t) {
      s.numeric.push_back(static_cast<float>(key));
      for (std::size_t j = 1; j < 5; ++j) s.numeric.push_back(static_cast<float>(dist(rng) * 0.1));
      std::vector<std::uint8_t> frame(64, 0);
      frame[static_cast<std::size_t>(key * 63.0)] = 255;
      s.frames.push_back(frame);
    }
    const auto label = std::min<std::size_t>(q - 1, static_cast<std::size_t>(key * q));
    s.labels = {label, label};
    ds.samples.push_back(std::move(s));
  }
  ds.meta.count = ds.samples.size();
  return ds;
}

} // namespace

TEST_CASE("config json round-trips") {
  auto cfg = micro_cfg();
  cfg.input_scale = {1, 2, 3, 4, 5};
  auto j = cfg.to_json();
  auto back = PredictorConfig::from_json(j);
  REQUIRE(back.to_json() == j);
  REQUIRE(back.hidden_dim == 8);
  REQUIRE(back.input_scale.size() == 5);
}

TEST_CASE("model construction is deterministic in the seed") {
  HybridModelT<double> a(micro_cfg()), b(micro_cfg());
  for (const auto& name : a.params().names())
    REQUIRE(a.params().at(name).values() == b.params().at(name).values());

  auto x = random_tensor<double>({2, 3, 5}, 1);
  auto frames = random_tensor<double>({2, 3, 8, 8}, 2, 0.0, 1.0);
  auto la = a.forward(Mode::Multi, &x, &frames);
  auto lb = b.forward(Mode::Multi, &x, &frames);
  REQUIRE(la.values() == lb.values());
}

TEST_CASE("encode_numeric with zero blocks is projection plus positional encoding") {
  auto cfg = micro_cfg();
  cfg.numeric_blocks = 0;
  HybridModelT<double> model(cfg);
  auto x = random_tensor<double>({1, 3, 5}, 3);
  auto h = model.encode_numeric(x);
  auto expect = nn::add(nn::linear(x, model.params().at("num.proj.w"),
                                   model.params().at("num.proj.b")),
                        nn::positional_encoding<double>(3, 8));
  REQUIRE(h.values() == expect.values());
}

TEST_CASE("encode_numeric output shape is [B,T,d]") {
  PredictorConfig cfg;
  cfg.window = 10;
  cfg.hidden_dim = 32;
  cfg.numeric_dim = 7;
  HybridModelT<float> model(cfg);
  auto x = random_tensor<float>({4, 10, 7}, 5);
  REQUIRE(model.encode_numeric(x).shape() == nn::Shape{4, 10, 32});
}

TEST_CASE("encode_numeric inherits scan causality") {
  HybridModelT<double> model(micro_cfg());
  auto x = random_tensor<double>({1, 3, 5}, 7);
  auto h0 = model.encode_numeric(x);
  auto xp = nn::Tensor<double>::from_values(x.shape(), x.values());
  for (std::size_t j = 0; j < 5; ++j) xp.values()[2 * 5 + j] += 3.0; // final step
  auto h1 = model.encode_numeric(xp);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 0; j < 8; ++j)
      REQUIRE(h0.values()[t * 8 + j] == h1.values()[t * 8 + j]);
}

TEST_CASE("encode_image with zero blocks permutes with its frames modulo PE") {
  auto cfg = micro_cfg();
  cfg.image_blocks = 0;
  HybridModelT<double> model(cfg);
  auto frames = random_tensor<double>({1, 3, 8, 8}, 9, 0.0, 1.0);
  auto h = model.encode_image(frames);

  // reversed window
  auto rev = nn::Tensor<double>::zeros(frames.shape());
  for (std::size_t t = 0; t < 3; ++t)
    std::copy_n(frames.values().data() + t * 64, 64, rev.values().data() + (2 - t) * 64);
  auto hr = model.encode_image(rev);

  auto pe = nn::positional_encoding<double>(3, 8);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 8; ++j) {
      const double a = h.values()[t * 8 + j] - pe.values()[t * 8 + j];
      const double b = hr.values()[(2 - t) * 8 + j] - pe.values()[(2 - t) * 8 + j];
      REQUIRE(a == Catch::Approx(b).margin(1e-12));
    }
}

TEST_CASE("identical frames produce identical backbone features before PE") {
  auto cfg = micro_cfg();
  HybridModelT<double> model(cfg);
  // the shared-weight backbone applied to a window of identical frames
  auto frames = nn::Tensor<double>::zeros({3, 1, 8, 8});
  auto one = random_tensor<double>({8, 8}, 11, 0.0, 1.0);
  for (std::size_t t = 0; t < 3; ++t)
    std::copy_n(one.values().data(), 64, frames.values().data() + t * 64);
  nn::BackboneWeights<double> bw;
  for (int s = 0; s < 4; ++s) {
    const std::string pre = "img.bb" + std::to_string(s);
    bw.stages.push_back({model.params().at(pre + ".w"), model.params().at(pre + ".b"),
                         model.params().at(pre + ".pw"), model.params().at(pre + ".pb")});
  }
  auto feats = nn::conv_backbone(frames, bw);
  for (std::size_t t = 1; t < 3; ++t)
    for (std::size_t j = 0; j < 128; ++j)
      REQUIRE(feats.values()[t * 128 + j] == feats.values()[j]);
}

TEST_CASE("encode_image rejects mismatched frame sizes") {
  HybridModelT<double> model(micro_cfg());
  auto wrong = random_tensor<double>({1, 3, 8, 12}, 13);
  REQUIRE_THROWS_WITH(model.encode_image(wrong),
                      Catch::Matchers::ContainsSubstring("frame-size-mismatch"));
}

TEST_CASE("gated fusion respects overrides and convexity") {
  HybridModelT<double> model(micro_cfg());
  auto hn = random_tensor<double>({2, 3, 8}, 15);
  auto hv = random_tensor<double>({2, 3, 8}, 16);

  auto zv = model.fuse_multimodal(hn, hv, 1.0);  // gate forced to visual side
  auto zn = model.fuse_multimodal(hn, hv, 0.0);  // gate forced to numeric side
  auto mid = model.fuse_multimodal(hn, hv, 0.5);
  auto learned = model.fuse_multimodal(hn, hv);

  for (std::size_t i = 0; i < zv.numel(); ++i) {
    REQUIRE(mid.values()[i] ==
            Catch::Approx(0.5 * (zv.values()[i] + zn.values()[i])).margin(1e-12));
    const double lo = std::min(zv.values()[i], zn.values()[i]);
    const double hi = std::max(zv.values()[i], zn.values()[i]);
    REQUIRE(learned.values()[i] >= lo - 1e-12);
    REQUIRE(learned.values()[i] <= hi + 1e-12);
  }
}

TEST_CASE("decode with zero layers ignores the memory") {
  auto cfg = micro_cfg();
  cfg.decoder_layers = 0;
  HybridModelT<double> model(cfg);
  auto m1 = random_tensor<double>({1, 3, 8}, 17);
  auto m2 = random_tensor<double>({1, 3, 8}, 18);
  REQUIRE(model.decode(m1).values() == model.decode(m2).values());
}

TEST_CASE("decode probabilities are normalized rows") {
  HybridModelT<double> model(micro_cfg());
  auto mem = random_tensor<double>({3, 3, 8}, 19);
  auto probs = nn::softmax_last(model.decode(mem));
  for (std::size_t r = 0; r < 3 * 2; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += probs.values()[r * 4 + k];
    REQUIRE(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("decode with zeroed cross-attention is invariant to memory order") {
  HybridModelT<double> model(micro_cfg());
  for (const char* n : {"dec.l0.cross.wo", "dec.l0.cross.bo"}) {
    auto& t = model.params().at(n);
    std::fill(t.values().begin(), t.values().end(), 0.0);
  }
  auto mem = random_tensor<double>({1, 3, 8}, 21);
  auto permuted = nn::Tensor<double>::zeros({1, 3, 8});
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t t = 0; t < 3; ++t)
    std::copy_n(mem.values().data() + order[t] * 8, 8, permuted.values().data() + t * 8);
  REQUIRE(model.decode(mem).values() == model.decode(permuted).values());
}

TEST_CASE("predict routes per mode and tracks encoder usage") {
  auto ds = toy_dataset(4);
  auto cfg = micro_cfg();
  HybridModelT<float> model(cfg);

  auto pred = predict(model, Mode::Numeric, &ds.samples[0], nullptr);
  REQUIRE(pred.beam_indices.size() == 2);
  REQUIRE(pred.probabilities.size() == 2 * 4);
  REQUIRE(model.stats().encode_image_calls == 0);
  REQUIRE(model.stats().encode_numeric_calls == 1);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += pred.probabilities[r * 4 + k];
    REQUIRE(std::abs(s - 1.0) < 1e-6);
  }
  REQUIRE(pred.per_frame_latency_ms > 0.0);

  auto a = predict(model, Mode::Multi, &ds.samples[1], &ds.samples[1]);
  auto b = predict(model, Mode::Multi, &ds.samples[1], &ds.samples[1]);
  REQUIRE(a.beam_indices == b.beam_indices);
  REQUIRE(a.logits == b.logits);

  REQUIRE_THROWS_WITH(predict(model, Mode::Image, &ds.samples[0], nullptr),
                      Catch::Matchers::ContainsSubstring("missing-modality"));
}

TEST_CASE("eval outputs are independent of the dropout rate") {
  auto cfg = micro_cfg();
  cfg.dropout = 0.0;
  HybridModelT<double> a(cfg);
  cfg.dropout = 0.7;
  HybridModelT<double> b(cfg);
  auto x = random_tensor<double>({2, 3, 5}, 23);
  auto frames = random_tensor<double>({2, 3, 8, 8}, 24, 0.0, 1.0);
  a.set_training(false);
  b.set_training(false);
  REQUIRE(a.forward(Mode::Multi, &x, &frames).values() ==
          b.forward(Mode::Multi, &x, &frames).values());
}

TEST_CASE("training smoke run produces finite loss and an exact checkpoint round-trip") {
  auto ds = toy_dataset(10);
  auto cfg = micro_cfg();
  HybridModelT<float> model(cfg);
  TrainSchedule sched;
  sched.epochs = 1;
  sched.batch_size = 4;
  auto train_idx = ds.split_indices("train");
  auto report = train(model, ds, train_idx, {}, sched);
  REQUIRE(report.epochs.size() == 1);
  REQUIRE(std::isfinite(report.epochs[0].train_loss));

  const auto dir = fs::temp_directory_path() / "beamloop_model_rt";
  fs::create_directories(dir);
  const auto p1 = (dir / "m.ckpt").string();
  const auto p2 = (dir / "m2.ckpt").string();
  save_model(model, p1);
  auto loaded = load_model<float>(p1);
  save_model(loaded, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  REQUIRE(b1 == b2);
  fs::remove_all(dir);
}

TEST_CASE("training fraction selects exactly the floored sample count") {
  auto ds = toy_dataset(20);
  auto cfg = micro_cfg();
  cfg.mode = Mode::Numeric;
  HybridModelT<float> model(cfg);
  TrainSchedule sched;
  sched.epochs = 1;
  sched.batch_size = 4;
  sched.fraction = 0.25;
  auto train_idx = ds.split_indices("train"); // 14 samples
  auto report = train(model, ds, train_idx, {}, sched);
  REQUIRE(report.trained_samples == 3); // floor(0.25 * 14)
}

TEST_CASE("numeric-mode training leaves image parameters untouched") {
  auto ds = toy_dataset(12);
  auto cfg = micro_cfg();
  cfg.mode = Mode::Numeric;
  HybridModelT<float> model(cfg);

  std::map<std::string, std::vector<float>> before;
  for (const auto& name : model.params().names())
    if (name.rfind("img.", 0) == 0 || name.rfind("fuse.", 0) == 0)
      before[name] = model.params().at(name).values();

  TrainSchedule sched;
  sched.epochs = 2;
  sched.batch_size = 4;
  train(model, ds, ds.split_indices("train"), ds.split_indices("test"), sched);

  for (const auto& [name, values] : before)
    REQUIRE(model.params().at(name).values() == values);

  // and the numeric branch moved
  bool numeric_moved = false;
  for (const auto& name : model.params().names())
    if (name.rfind("num.", 0) == 0)
      numeric_moved = numeric_moved ||
                      model.params().at(name).values() !=
                          HybridModelT<float>(cfg).params().at(name).values();
  REQUIRE(numeric_moved);
}

TEST_CASE("training rejects a model that disagrees with the dataset") {
  auto ds = toy_dataset(8);
  auto cfg = micro_cfg();
  cfg.num_classes = 7; // dataset has Q=4
  HybridModelT<float> model(cfg);
  TrainSchedule sched;
  REQUIRE_THROWS_WITH(train(model, ds, ds.split_indices("train"), {}, sched),
                      Catch::Matchers::ContainsSubstring("config-mismatch"));
}

TEST_CASE("end-to-end micro model passes gradient checking") {
  auto cfg = micro_cfg();
  HybridModelT<double> model(cfg);
  model.set_training(true);

  auto x = random_tensor<double>({2, 3, 5}, 31);
  auto frames = random_tensor<double>({2, 3, 8, 8}, 32, 0.05, 0.95);
  const std::vector<std::size_t> labels{1, 3, 0, 2};

  auto loss_fn = [&] {
    model.rng().seed(777); // fixed dropout masks across gradcheck evaluations
    auto logits = model.forward(Mode::Multi, &x, &frames);
    return nn::cross_entropy(logits, labels);
  };
  auto err = nn::grad_check(loss_fn, model.params(), {1e-5, 6, 57, 1e-4});
  REQUIRE(err < 1e-4);
}
