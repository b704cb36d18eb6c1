// SPDX-License-Identifier: Apache-2.0
//
// Supervised training of the hybrid model: sequence cross-entropy summed
// over the horizon (averaged across the batch for the optimizer step),
// Adam over the mode-active parameter subset, per-epoch validation
// metrics, optional training-fraction subsampling and early stopping.
#pragma once

#include "beamloop/eval.hpp"
#include "beamloop/predictor.hpp"

namespace beamloop {

struct TrainSchedule {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 1e-3; // initial rate; halved at 60% and 85% of the budget
  double fraction = 1.0; // train on floor(fraction * n_train) samples
  std::uint64_t seed = 6;
  double target_top1 = 0.0; // stop once validation top-1 reaches this (0 = run all epochs)
  bool verbose = false;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0; // mean per-step cross entropy
  double val_loss = 0.0;
  std::map<int, double> val_top_k;
  double seconds = 0.0;
};

struct TrainReport {
  Mode mode = Mode::Multi;
  std::size_t trained_samples = 0;
  std::size_t param_count = 0;
  std::vector<EpochStats> epochs;
  double total_seconds = 0.0;
  double per_frame_latency_ms = 0.0; // from the final validation pass

  ordered_json to_json() const {
    ordered_json j;
    j["mode"] = beamloop::to_string(mode);
    j["trained_samples"] = trained_samples;
    j["param_count"] = param_count;
    j["total_seconds"] = total_seconds;
    j["per_frame_latency_ms"] = per_frame_latency_ms;
    ordered_json es;
    for (const auto& e : epochs) {
      ordered_json ej;
      ej["epoch"] = e.epoch;
      ej["train_loss"] = e.train_loss;
      ej["val_loss"] = e.val_loss;
      ordered_json tk;
      for (const auto& [k, v] : e.val_top_k) tk["top_" + std::to_string(k)] = v;
      ej["val_top_k"] = tk;
      ej["seconds"] = e.seconds;
      es.push_back(ej);
    }
    j["epochs"] = es;
    return j;
  }
};

inline void check_model_matches_dataset(const PredictorConfig& cfg, const DatasetMeta& meta,
                                        Mode mode) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("config-mismatch: " + what);
  };
  if (cfg.num_classes != meta.num_beams)
    fail("model classes " + std::to_string(cfg.num_classes) + " != dataset Q " +
         std::to_string(meta.num_beams));
  if (cfg.window != meta.window)
    fail("model window " + std::to_string(cfg.window) + " != dataset T " +
         std::to_string(meta.window));
  if (cfg.horizon != meta.horizon)
    fail("model horizon " + std::to_string(cfg.horizon) + " != dataset P " +
         std::to_string(meta.horizon));
  if (mode != Mode::Image && cfg.numeric_dim != meta.numeric_dim)
    fail("model d_n " + std::to_string(cfg.numeric_dim) + " != dataset d_n " +
         std::to_string(meta.numeric_dim));
  if (mode != Mode::Numeric &&
      (cfg.frame_h != meta.frame_h || cfg.frame_w != meta.frame_w))
    fail("model frame size != dataset frame size");
}

/// Per-feature scale 1/max|value| over the given samples, so projected
/// inputs start within [-1, 1]. Stored in the config sidecar for reuse at
/// evaluation time.
inline std::vector<double> fit_input_scale(const Dataset& ds,
                                           const std::vector<std::size_t>& indices) {
  const std::size_t d = ds.meta.numeric_dim;
  std::vector<double> max_abs(d, 0.0);
  for (auto idx : indices) {
    const auto& s = ds.samples[idx];
    for (std::size_t j = 0; j < s.numeric.size(); ++j)
      max_abs[j % d] = std::max(max_abs[j % d], std::abs(static_cast<double>(s.numeric[j])));
  }
  std::vector<double> scale(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) scale[j] = 1.0 / std::max(max_abs[j], 1e-9);
  return scale;
}

/// Carves a validation slice from the train split, keeping whole
/// trajectories: the last `val_fraction` of train trajectories validate.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    const Dataset& ds, double val_fraction = 0.15) {
  std::vector<std::size_t> trajs;
  for (const auto& s : ds.samples)
    if (s.split == "train" &&
        (trajs.empty() || trajs.back() != s.traj))
      if (std::find(trajs.begin(), trajs.end(), s.traj) == trajs.end()) trajs.push_back(s.traj);
  const std::size_t val_count =
      std::min(trajs.size(), static_cast<std::size_t>(std::ceil(val_fraction * trajs.size())));
  const std::size_t val_start = trajs.size() - val_count;
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (s.split != "train") continue;
    const auto pos = std::find(trajs.begin(), trajs.end(), s.traj) - trajs.begin();
    (static_cast<std::size_t>(pos) >= val_start ? val_idx : train_idx).push_back(i);
  }
  return {train_idx, val_idx};
}

/// Trains in place over the mode-active parameters, evaluating the
/// validation slice each epoch. Aborts on a non-finite loss.
template <typename S>
TrainReport train(HybridModelT<S>& model, const Dataset& ds,
                  const std::vector<std::size_t>& train_indices,
                  const std::vector<std::size_t>& val_indices, const TrainSchedule& sched) {
  const Mode mode = model.config().mode;
  check_model_matches_dataset(model.config(), ds.meta, mode);
  if (sched.fraction < 0.0 || sched.fraction > 1.0)
    throw std::invalid_argument("train: fraction must be in [0,1]");

  std::vector<std::size_t> used(train_indices.begin(),
                                train_indices.begin() +
                                    static_cast<std::ptrdiff_t>(std::floor(
                                        sched.fraction * static_cast<double>(train_indices.size()))));
  if (used.empty()) throw std::invalid_argument("train: no training samples selected");

  if (model.config().input_scale.empty())
    model.mutable_config().input_scale = fit_input_scale(ds, used);

  nn::AdamState<S> adam;
  adam.lr = sched.lr;
  const auto active = model.active_param_names(mode);

  TrainReport report;
  report.mode = mode;
  report.trained_samples = used.size();
  report.param_count = model.param_count();

  std::mt19937_64 shuffle_rng(sched.seed);
  const auto run_start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < sched.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    model.set_training(true);
    std::shuffle(used.begin(), used.end(), shuffle_rng);
    adam.lr = sched.lr;
    if (epoch >= (sched.epochs * 6) / 10) adam.lr *= 0.5;
    if (epoch >= (sched.epochs * 17) / 20) adam.lr *= 0.5;

    double loss_sum = 0.0;
    std::size_t steps_seen = 0;
    for (std::size_t start = 0; start < used.size(); start += sched.batch_size) {
      const std::size_t n = std::min(sched.batch_size, used.size() - start);
      std::vector<const Sample*> batch;
      std::vector<std::size_t> labels;
      for (std::size_t i = 0; i < n; ++i) {
        batch.push_back(&ds.samples[used[start + i]]);
        labels.insert(labels.end(), batch.back()->labels.begin(), batch.back()->labels.end());
      }
      nn::Tensor<S> numeric, frames;
      if (mode != Mode::Image) numeric = model.numeric_tensor(batch);
      if (mode != Mode::Numeric) frames = model.image_tensor(batch);

      auto logits = model.forward(mode, numeric.defined() ? &numeric : nullptr,
                                  frames.defined() ? &frames : nullptr);
      auto ce = nn::cross_entropy(logits, labels);
      const double batch_loss = static_cast<double>(ce.item());
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                 ", batch " + std::to_string(start / sched.batch_size) +
                                 " (lr=" + std::to_string(sched.lr) + ")");
      loss_sum += batch_loss;
      steps_seen += labels.size();

      auto loss = nn::scale(ce, S(1) / static_cast<S>(n));
      model.params().drop_grads();
      loss.backward();
      nn::adam_step(model.params(), adam, active);
    }
    model.set_training(false);

    EpochStats es;
    es.epoch = epoch + 1;
    es.train_loss = loss_sum / static_cast<double>(steps_seen);
    if (!val_indices.empty()) {
      auto val = evaluate(model, mode, ds, val_indices, sched.batch_size);
      es.val_loss = val.mean_loss;
      es.val_top_k = val.top_k;
      report.per_frame_latency_ms = val.per_frame_latency_ms;
    }
    es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    if (sched.verbose) {
      std::fprintf(stderr, "epoch %zu: train %.4f val %.4f top1 %.4f (%.1fs)\n", es.epoch,
                   es.train_loss, es.val_loss,
                   es.val_top_k.count(1) ? es.val_top_k.at(1) : 0.0, es.seconds);
    }
    report.epochs.push_back(es);
    if (sched.target_top1 > 0.0 && !val_indices.empty() &&
        es.val_top_k.at(1) >= sched.target_top1)
      break;
  }
  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
  return report;
}

} // namespace beamloop
