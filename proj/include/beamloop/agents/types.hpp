// SPDX-License-Identifier: Apache-2.0
//
// Records exchanged by the requirement-to-plan workflow: the structured
// task produced by task analysis, the plan produced by solution planning,
// the completeness assessment, and append-only ReAct traces whose history
// h_t = (prompt, r_{1:t-1}, a_{1:t-1}, o_{2:t}) can be reconstructed at
// any step.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beamloop/predictor.hpp"

namespace beamloop::agents {

using beamloop::ordered_json;

enum class DataFormat { Numeric, Image, Hybrid };

inline std::string to_string(DataFormat f) {
  switch (f) {
    case DataFormat::Numeric: return "numeric";
    case DataFormat::Image: return "image";
    case DataFormat::Hybrid: return "hybrid";
  }
  return "hybrid";
}

inline DataFormat data_format_from_string(const std::string& s) {
  if (s == "numeric") return DataFormat::Numeric;
  if (s == "image") return DataFormat::Image;
  if (s == "hybrid") return DataFormat::Hybrid;
  throw std::invalid_argument("unknown data format '" + s + "'");
}

struct StructuredTask {
  std::string rewritten_requirement;
  std::optional<int> num_uavs;
  std::optional<std::string> data_location;
  std::optional<DataFormat> data_format;
  std::optional<std::string> data_labels;
  std::optional<double> accuracy_requirement;
  std::vector<std::string> missing_fields;
  bool budget_exhausted = false;

  void recompute_missing() {
    missing_fields.clear();
    if (!num_uavs) missing_fields.push_back("num_uavs");
    if (!data_location) missing_fields.push_back("data_location");
    if (!data_format) missing_fields.push_back("data_format");
    if (!data_labels) missing_fields.push_back("data_labels");
    if (!accuracy_requirement) missing_fields.push_back("accuracy_requirement");
  }

  bool complete() const { return missing_fields.empty(); }

  ordered_json to_json() const {
    ordered_json j;
    j["rewritten_requirement"] = rewritten_requirement;
    j["num_uavs"] = num_uavs ? ordered_json(*num_uavs) : ordered_json(nullptr);
    j["data_location"] = data_location ? ordered_json(*data_location) : ordered_json(nullptr);
    j["data_format"] = data_format ? ordered_json(agents::to_string(*data_format)) : ordered_json(nullptr);
    j["data_labels"] = data_labels ? ordered_json(*data_labels) : ordered_json(nullptr);
    j["accuracy_requirement"] =
        accuracy_requirement ? ordered_json(*accuracy_requirement) : ordered_json(nullptr);
    j["missing_fields"] = missing_fields;
    j["budget_exhausted"] = budget_exhausted;
    return j;
  }
};

struct ToolFinding {
  std::string tool;
  std::string input;
  ordered_json result;
};

struct PlanModelConfig {
  std::size_t numeric_blocks = 2;
  std::size_t image_blocks = 2;
  std::size_t attn_heads = 2;
  std::size_t decoder_layers = 2;
};

struct Plan {
  Mode mode = Mode::Multi;
  PlanModelConfig model_config;
  std::string checkpoint;
  std::vector<ToolFinding> tool_findings;
  std::string rationale;

  ordered_json to_json() const {
    ordered_json j;
    j["mode"] = beamloop::to_string(mode);
    ordered_json mc;
    mc["numeric_blocks"] = model_config.numeric_blocks;
    mc["image_blocks"] = model_config.image_blocks;
    mc["attn_heads"] = model_config.attn_heads;
    mc["decoder_layers"] = model_config.decoder_layers;
    j["model"] = mc;
    j["checkpoint"] = checkpoint;
    ordered_json findings;
    for (const auto& f : tool_findings) {
      ordered_json fj;
      fj["tool"] = f.tool;
      fj["input"] = f.input;
      fj["result"] = f.result;
      findings.push_back(fj);
    }
    j["tool_findings"] = findings;
    j["rationale"] = rationale;
    return j;
  }
};

struct Assessment {
  enum class Status { Resolved, Unresolved };
  Status status = Status::Unresolved;
  std::string feedback;
  std::optional<ordered_json> command; // present iff resolved

  bool resolved() const { return status == Status::Resolved; }
};

struct ReActStep {
  std::string reasoning;       // r_t
  ordered_json action;         // a_t, {"name":..., "input":...}
  std::string observation;     // o_{t+1}, produced by executing a_t
};

struct ReActTrace {
  std::string prompt; // x
  std::vector<ReActStep> steps;
  std::string terminal;

  /// h_t for t in [1, steps+1]: the prompt plus everything known before
  /// reasoning step t runs, i.e. steps 1..t-1 with their observations.
  std::string history_at(std::size_t t) const {
    if (t < 1 || t > steps.size() + 1)
      throw std::out_of_range("ReActTrace: history step out of range");
    std::string h = "prompt:\n" + prompt + "\n";
    for (std::size_t i = 0; i + 1 < t; ++i) {
      h += "reasoning[" + std::to_string(i + 1) + "]: " + steps[i].reasoning + "\n";
      h += "action[" + std::to_string(i + 1) + "]: " + steps[i].action.dump() + "\n";
      h += "observation[" + std::to_string(i + 2) + "]: " + steps[i].observation + "\n";
    }
    return h;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["prompt"] = prompt;
    ordered_json st;
    for (const auto& s : steps) {
      ordered_json sj;
      sj["reasoning"] = s.reasoning;
      sj["action"] = s.action;
      sj["observation"] = s.observation;
      st.push_back(sj);
    }
    j["steps"] = st;
    j["terminal"] = terminal;
    return j;
  }

  static ReActTrace from_json(const ordered_json& j) {
    ReActTrace t;
    t.prompt = j.at("prompt").get<std::string>();
    for (const auto& sj : j.at("steps")) {
      ReActStep s;
      s.reasoning = sj.at("reasoning").get<std::string>();
      s.action = sj.at("action");
      s.observation = sj.at("observation").get<std::string>();
      t.steps.push_back(std::move(s));
    }
    t.terminal = j.value("terminal", "");
    return t;
  }
};

} // namespace beamloop::agents
