// SPDX-License-Identifier: Apache-2.0
//
// Evaluation harness: top-K accuracy (micro-averaged over every horizon
// step), confusion matrices, latency profiles, and format/parameter
// accuracy for agent reply suites.
#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>

#include "beamloop/predictor.hpp"

namespace beamloop {

struct EvalReport {
  std::map<int, double> top_k; // k -> fraction over all (sample, tau) pairs
  std::vector<std::vector<std::size_t>> confusion; // [true][pred]
  double mean_loss = 0.0; // mean per-step cross entropy
  double per_frame_latency_ms = 0.0;
  std::size_t sample_count = 0;

  void check_invariants() const {
    double prev = 0.0;
    for (const auto& [k, v] : top_k) {
      if (v + 1e-12 < prev)
        throw std::logic_error("EvalReport: top-k accuracy must be non-decreasing in k");
      if (v < 0.0 || v > 1.0) throw std::logic_error("EvalReport: fraction out of [0,1]");
      prev = v;
    }
  }

  ordered_json to_json() const {
    ordered_json j;
    ordered_json tk;
    for (const auto& [k, v] : top_k) tk["top_" + std::to_string(k)] = v;
    j["top_k"] = tk;
    j["mean_loss"] = mean_loss;
    j["per_frame_latency_ms"] = per_frame_latency_ms;
    j["sample_count"] = sample_count;
    j["confusion"] = confusion;
    return j;
  }

  void write_confusion_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("io-failure: cannot write " + path);
    for (const auto& row : confusion) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
      os << "\n";
    }
  }
};

/// Top-K fractions with probability ties broken toward the lower beam
/// index before the cut. `probability_rows` holds one row of K class
/// probabilities per (sample, tau) pair, `labels` the matching truth.
inline std::map<int, double> topk_accuracy(const std::vector<std::vector<double>>& probability_rows,
                                           const std::vector<std::size_t>& labels,
                                           const std::vector<int>& ks = {1, 2, 3, 5}) {
  if (probability_rows.size() != labels.size())
    throw std::invalid_argument("topk_accuracy: rows and labels disagree");
  std::map<int, double> hits;
  for (int k : ks) hits[k] = 0.0;
  if (probability_rows.empty()) return hits;

  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < probability_rows.size(); ++r) {
    const auto& row = probability_rows[r];
    if (labels[r] >= row.size()) throw std::invalid_argument("topk_accuracy: label-out-of-range");
    order.resize(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (row[a] != row[b]) return row[a] > row[b];
      return a < b;
    });
    for (int k : ks) {
      const auto cut = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
      for (std::size_t i = 0; i < cut; ++i)
        if (order[i] == labels[r]) {
          hits[k] += 1.0;
          break;
        }
    }
  }
  for (auto& [k, v] : hits) v /= static_cast<double>(probability_rows.size());
  return hits;
}

inline std::vector<std::vector<std::size_t>> confusion_matrix(
    const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels,
    std::size_t num_classes) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("confusion_matrix: predictions and labels disagree");
  std::vector<std::vector<std::size_t>> counts(num_classes,
                                               std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] >= num_classes || labels[i] >= num_classes)
      throw std::invalid_argument("confusion_matrix: index-out-of-range");
    ++counts[labels[i]][predictions[i]];
  }
  return counts;
}

/// Full evaluation of a model over dataset samples: batched eval-mode
/// forward passes, micro-averaged metrics, and per-frame latency over the
/// forward passes only.
template <typename S>
EvalReport evaluate(HybridModelT<S>& model, Mode mode, const Dataset& ds,
                    const std::vector<std::size_t>& indices, std::size_t batch_size = 32) {
  const auto& cfg = model.config();
  const bool was_training = model.training();
  model.set_training(false);

  std::vector<std::vector<double>> prob_rows;
  std::vector<std::size_t> labels_flat, preds_flat;
  double loss_total = 0.0;
  double forward_seconds = 0.0;

  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, indices.size() - start);
    std::vector<const Sample*> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(&ds.samples[indices[start + i]]);

    nn::Tensor<S> numeric, frames;
    if (mode != Mode::Image) numeric = model.numeric_tensor(batch);
    if (mode != Mode::Numeric) frames = model.image_tensor(batch);

    const auto t0 = std::chrono::steady_clock::now();
    auto logits = model.forward(mode, numeric.defined() ? &numeric : nullptr,
                                frames.defined() ? &frames : nullptr);
    auto probs = nn::softmax_last(logits);
    const auto t1 = std::chrono::steady_clock::now();
    forward_seconds += std::chrono::duration<double>(t1 - t0).count();

    std::vector<std::size_t> batch_labels;
    for (const auto* s : batch)
      batch_labels.insert(batch_labels.end(), s->labels.begin(), s->labels.end());
    loss_total += static_cast<double>(nn::cross_entropy(logits, batch_labels).item());

    const std::size_t k = cfg.num_classes;
    for (std::size_t row = 0; row < n * cfg.horizon; ++row) {
      std::vector<double> pr(k);
      std::size_t best = 0;
      for (std::size_t j = 0; j < k; ++j) {
        pr[j] = static_cast<double>(probs.values()[row * k + j]);
        if (pr[j] > pr[best]) best = j;
      }
      prob_rows.push_back(std::move(pr));
      preds_flat.push_back(best);
    }
    labels_flat.insert(labels_flat.end(), batch_labels.begin(), batch_labels.end());
  }

  EvalReport report;
  report.sample_count = indices.size();
  report.top_k = topk_accuracy(prob_rows, labels_flat);
  report.confusion = confusion_matrix(preds_flat, labels_flat, cfg.num_classes);
  report.mean_loss = labels_flat.empty() ? 0.0 : loss_total / static_cast<double>(labels_flat.size());
  report.per_frame_latency_ms =
      labels_flat.empty() ? 0.0 : 1000.0 * forward_seconds / static_cast<double>(labels_flat.size());
  report.check_invariants();
  model.set_training(was_training);
  return report;
}

struct LatencyProfile {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t measured = 0;
};

/// Wall-clock per predicted frame over repeated single-sample forwards.
/// The first `warmup` repetitions are excluded from the statistics.
template <typename S>
LatencyProfile latency_profile(HybridModelT<S>& model, Mode mode, const Dataset& ds,
                               const std::vector<std::size_t>& indices, std::size_t repetitions,
                               std::size_t warmup = 1) {
  if (indices.empty()) throw std::invalid_argument("latency_profile: empty-slice");
  if (warmup < 1) throw std::invalid_argument("latency_profile: warmup must be >= 1");
  std::vector<double> per_frame;
  for (std::size_t rep = 0; rep < warmup + repetitions; ++rep) {
    for (auto idx : indices) {
      const auto& s = ds.samples[idx];
      auto pred = predict(model, mode, &s, &s);
      if (rep >= warmup) per_frame.push_back(pred.per_frame_latency_ms);
    }
  }
  LatencyProfile prof;
  prof.measured = per_frame.size();
  std::sort(per_frame.begin(), per_frame.end());
  for (auto v : per_frame) prof.mean_ms += v;
  prof.mean_ms /= static_cast<double>(per_frame.size());
  prof.p50_ms = per_frame[per_frame.size() / 2];
  prof.p95_ms = per_frame[std::min(per_frame.size() - 1,
                                   static_cast<std::size_t>(0.95 * static_cast<double>(per_frame.size())))];
  return prof;
}

// --- agent reply scoring ----------------------------------------------------

struct AgentCaseResult {
  std::string id;
  bool format_ok = false;
  double fields_correct = 0.0; // fraction of the five key fields
};

struct AgentEvalReport {
  double format_accuracy = 0.0;
  double parameter_accuracy = 0.0;
  std::vector<AgentCaseResult> per_case;
  std::vector<std::pair<int, double>> similarity_by_iteration;

  ordered_json to_json() const {
    ordered_json j;
    j["format_accuracy"] = format_accuracy;
    j["parameter_accuracy"] = parameter_accuracy;
    ordered_json cases;
    for (const auto& c : per_case) {
      ordered_json cj;
      cj["id"] = c.id;
      cj["format_ok"] = c.format_ok;
      cj["fields_correct"] = c.fields_correct;
      cases.push_back(cj);
    }
    j["per_case"] = cases;
    ordered_json sims;
    for (const auto& [it, sim] : similarity_by_iteration) sims.push_back({it, sim});
    j["similarity_by_iteration"] = sims;
    return j;
  }
};

namespace detail {

inline std::string normalize_text(std::string s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  // trim
  const auto b = out.find_first_not_of(" \t\n\r");
  const auto e = out.find_last_not_of(" \t\n\r");
  if (b == std::string::npos) return "";
  return out.substr(b, e - b + 1);
}

// first balanced JSON object embedded in free text
inline std::optional<ordered_json> extract_json_object(const std::string& text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (text[start] != '{') continue;
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (c == '\\')
          ++i;
        else if (c == '"')
          in_string = false;
      } else if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          const auto candidate = text.substr(start, i - start + 1);
          auto parsed = ordered_json::parse(candidate, nullptr, false);
          if (!parsed.is_discarded()) return parsed;
          break; // balanced but unparsable; try the next '{'
        }
      }
    }
  }
  return std::nullopt;
}

inline bool field_matches(const ordered_json& reply, const ordered_json& reference,
                          const std::string& key) {
  if (!reply.contains(key) || reply.at(key).is_null()) return reference.at(key).is_null();
  const auto& a = reply.at(key);
  const auto& b = reference.at(key);
  if (b.is_number() || a.is_number()) {
    if (!a.is_number() || !b.is_number()) return false;
    return std::abs(a.get<double>() - b.get<double>()) < 1e-9;
  }
  if (a.is_string() && b.is_string())
    return normalize_text(a.get<std::string>()) == normalize_text(b.get<std::string>());
  return a == b;
}

} // namespace detail

inline const std::array<const char*, 5> kAgentKeyFields{
    "num_uavs", "data_location", "data_format", "data_labels", "accuracy_requirement"};

/// Scores raw agent replies against a reference suite: format accuracy is
/// the fraction of replies containing a JSON object that carries all five
/// key fields; parameter accuracy averages per-field normalized equality.
inline AgentEvalReport agent_accuracy(const std::vector<std::string>& outputs,
                                      const std::vector<ordered_json>& references) {
  if (references.empty() || outputs.size() != references.size())
    throw std::invalid_argument("agent_accuracy: outputs and references disagree");
  AgentEvalReport report;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    AgentCaseResult c;
    c.id = references[i].value("id", "case" + std::to_string(i));
    const auto parsed = detail::extract_json_object(outputs[i]);
    if (parsed.has_value()) {
      bool has_all = true;
      for (const auto* key : kAgentKeyFields) has_all = has_all && parsed->contains(key);
      c.format_ok = has_all;
      if (has_all) {
        double correct = 0.0;
        for (const auto* key : kAgentKeyFields)
          if (detail::field_matches(*parsed, references[i], key)) correct += 1.0;
        c.fields_correct = correct / static_cast<double>(kAgentKeyFields.size());
      }
    }
    report.format_accuracy += c.format_ok ? 1.0 : 0.0;
    report.parameter_accuracy += c.fields_correct;
    report.per_case.push_back(std::move(c));
  }
  report.format_accuracy /= static_cast<double>(outputs.size());
  report.parameter_accuracy /= static_cast<double>(outputs.size());
  return report;
}

} // namespace beamloop
