// SPDX-License-Identifier: Apache-2.0
//
// Tools callable from agent reasoning loops: image blurriness (variance of
// the Laplacian), token-F1 semantic similarity, and the model registry
// mapping accuracy requirements to encoder configurations.
#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "beamloop/agents/types.hpp"
#include "beamloop/pgm.hpp"

namespace beamloop::agents {

inline constexpr double kDefaultBlurThreshold = 25.0;

struct BlurrinessResult {
  double score = 0.0;
  bool is_blurry = false; // score strictly below the threshold
};

/// Variance of the 4-neighbour discrete Laplacian over interior pixels.
/// Low variance indicates blur; the boundary rule is strict (<).
inline BlurrinessResult assess_blurriness(const std::vector<std::uint8_t>& frame, std::size_t w,
                                          std::size_t h,
                                          double threshold = kDefaultBlurThreshold) {
  if (frame.empty() || w < 3 || h < 3 || frame.size() != w * h)
    throw std::invalid_argument("assess_blurriness: empty-frame or bad dimensions");
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const double lap = static_cast<double>(frame[(y - 1) * w + x]) +
                         static_cast<double>(frame[(y + 1) * w + x]) +
                         static_cast<double>(frame[y * w + x - 1]) +
                         static_cast<double>(frame[y * w + x + 1]) -
                         4.0 * static_cast<double>(frame[y * w + x]);
      sum += lap;
      sum_sq += lap * lap;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  BlurrinessResult r;
  r.score = sum_sq / static_cast<double>(n) - mean * mean;
  r.is_blurry = r.score < threshold;
  return r;
}

/// Mean blurriness over the first frames (sorted by name) found under a
/// dataset directory; looks in `images/` first, then the directory itself.
inline BlurrinessResult assess_blurriness_dir(const std::string& location,
                                              double threshold = kDefaultBlurThreshold,
                                              std::size_t max_frames = 5) {
  namespace fs = std::filesystem;
  std::vector<std::string> candidates;
  for (const auto& sub : {fs::path(location) / "images", fs::path(location)}) {
    if (!fs::is_directory(sub)) continue;
    for (const auto& e : fs::directory_iterator(sub))
      if (e.is_regular_file() && e.path().extension() == ".pgm")
        candidates.push_back(e.path().string());
    if (!candidates.empty()) break;
  }
  if (candidates.empty())
    throw std::runtime_error("tool-failure: no .pgm frames under " + location);
  std::sort(candidates.begin(), candidates.end());
  candidates.resize(std::min(candidates.size(), max_frames));
  double score = 0.0;
  for (const auto& path : candidates) {
    const auto img = read_pgm(path);
    score += assess_blurriness(img.pixels, img.width, img.height, threshold).score;
  }
  BlurrinessResult r;
  r.score = score / static_cast<double>(candidates.size());
  r.is_blurry = r.score < threshold;
  return r;
}

/// Token-level F1 over lowercased, punctuation-stripped unigrams under a
/// greedy multiset match. An embedding-based scorer can be swapped in
/// wherever a similarity function is accepted.
inline double semantic_similarity(const std::string& candidate, const std::string& reference) {
  auto tokenize = [](const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char raw : text) {
      const auto c = static_cast<unsigned char>(raw);
      if (std::isalnum(c)) {
        cur.push_back(static_cast<char>(std::tolower(c)));
      } else if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
  };
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (cand.empty() || ref.empty())
    throw std::invalid_argument("semantic_similarity: empty-text after normalization");

  std::map<std::string, std::size_t> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : cand) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(cand.size() + ref.size());
}

struct RegistryEntry {
  std::string tier;
  std::size_t numeric_blocks = 2;
  std::size_t image_blocks = 2;
  std::size_t attn_heads = 2;
  std::size_t decoder_layers = 2;
  std::string checkpoint;

  ordered_json to_json() const {
    ordered_json j;
    j["tier"] = tier;
    j["numeric_blocks"] = numeric_blocks;
    j["image_blocks"] = image_blocks;
    j["attn_heads"] = attn_heads;
    j["decoder_layers"] = decoder_layers;
    j["checkpoint"] = checkpoint;
    return j;
  }
};

/// Accuracy-requirement to configuration mapping. Requirements below 0.85
/// map to the lightest tier, below 0.92 to the middle tier, anything
/// higher to the deep-encoder tier.
class ModelRegistry {
public:
  static ModelRegistry builtin() {
    ModelRegistry r;
    r.tiers_ = {{"tier1", 1, 1, 1, 2, "models/tier1.ckpt"},
                {"tier2", 2, 2, 2, 2, "models/tier2.ckpt"},
                {"tier3", 4, 4, 2, 2, "models/tier3.ckpt"}};
    return r;
  }

  static ModelRegistry from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("missing-file: registry " + path);
    ordered_json j;
    try {
      is >> j;
    } catch (const std::exception& e) {
      throw std::runtime_error("schema-violation: registry " + path + ": " + e.what());
    }
    ModelRegistry r;
    for (const auto& tj : j.at("tiers")) {
      RegistryEntry e;
      e.tier = tj.at("tier").get<std::string>();
      e.numeric_blocks = tj.at("numeric_blocks").get<std::size_t>();
      e.image_blocks = tj.at("image_blocks").get<std::size_t>();
      e.attn_heads = tj.at("attn_heads").get<std::size_t>();
      e.decoder_layers = tj.at("decoder_layers").get<std::size_t>();
      e.checkpoint = tj.at("checkpoint").get<std::string>();
      r.tiers_.push_back(std::move(e));
    }
    if (r.tiers_.size() != 3)
      throw std::runtime_error("schema-violation: registry needs exactly three tiers");
    return r;
  }

  const RegistryEntry& lookup(std::optional<double> accuracy_requirement) const {
    if (!accuracy_requirement) return tiers_[1];
    if (*accuracy_requirement < 0.85) return tiers_[0];
    if (*accuracy_requirement < 0.92) return tiers_[1];
    return tiers_[2];
  }

  const std::vector<RegistryEntry>& tiers() const { return tiers_; }

private:
  std::vector<RegistryEntry> tiers_;
};

} // namespace beamloop::agents
