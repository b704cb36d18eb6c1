// SPDX-License-Identifier: Apache-2.0
//
// The three-agent requirement-to-plan workflow. The task analysis agent
// rewrites the requirement and asks the manager about missing key fields;
// the solution planning agent runs think-act-observe iterations over the
// tool set and drafts a plan; the completeness assessment agent checks
// plan/task alignment and, when resolved, emits the JSON command that
// activates the predictor. Backends propose text and actions; the
// orchestrator executes tools and assembles the final records, so every
// structural invariant holds regardless of how the model behaves.
#pragma once

#include <functional>

#include "beamloop/agents/backend.hpp"
#include "beamloop/agents/tools.hpp"
#include "beamloop/eval.hpp"

namespace beamloop::agents {

// --- prompts -----------------------------------------------------------------

struct AgentPrompts {
  std::string taa;
  std::string spa;
  std::string caa;
};

inline const char* kDefaultTaaPrompt =
    "You are the task analysis agent of a beam prediction base station. Rewrite the "
    "manager's requirement concisely and extract the five key fields. Reply with a JSON "
    "object {\"rewritten_requirement\", \"num_uavs\", \"data_location\", \"data_format\" "
    "(numeric|image|hybrid), \"data_labels\", \"accuracy_requirement\", \"question\"}. Use "
    "null for anything the requirement does not state, and when fields are null put one "
    "clarification question for the manager in \"question\".";
inline const char* kDefaultSpaPrompt =
    "You are the solution planning agent of a beam prediction base station. Reason in "
    "think-act-observe steps over the structured task. Reply each turn with a JSON object "
    "{\"thought\", \"action\": {\"name\": one of call_tool|lookup_registry|draft_plan|finalize, "
    "\"input\": text}}. call_tool with input \"blurriness\" checks image quality at the data "
    "location; lookup_registry maps the accuracy requirement to a model configuration; "
    "draft_plan records a candidate plan in prose.";
inline const char* kDefaultCaaPrompt =
    "You are the completeness assessment agent of a beam prediction base station. Judge "
    "whether the plan answers every field of the structured task point by point. Reply with "
    "a JSON object {\"status\": \"resolved\"|\"unresolved\", \"feedback\": text naming any "
    "unmet fields}.";

/// Loads taa.txt / spa.txt / caa.txt from a directory, falling back to the
/// built-in prompt for any missing file.
inline AgentPrompts load_prompts(const std::string& dir) {
  auto read_or = [&](const char* name, const char* fallback) {
    std::ifstream is(std::filesystem::path(dir) / name);
    if (!is) return std::string(fallback);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text.empty() ? std::string(fallback) : text;
  };
  return {read_or("taa.txt", kDefaultTaaPrompt), read_or("spa.txt", kDefaultSpaPrompt),
          read_or("caa.txt", kDefaultCaaPrompt)};
}

// --- command schema ----------------------------------------------------------

/// Problems with a predictor-activation command; empty means schema-valid.
inline std::vector<std::string> validate_command(const ordered_json& cmd) {
  std::vector<std::string> problems;
  auto require_key = [&](const char* key) {
    if (!cmd.contains(key)) {
      problems.push_back(std::string("missing key '") + key + "'");
      return false;
    }
    return true;
  };
  if (!cmd.is_object()) return {"command is not a JSON object"};
  if (require_key("version") &&
      (!cmd["version"].is_number_integer() || cmd["version"].get<int>() != 1))
    problems.push_back("version must be the integer 1");
  if (require_key("mode")) {
    const auto m = cmd["mode"].is_string() ? cmd["mode"].get<std::string>() : "";
    if (m != "numeric" && m != "image" && m != "multi")
      problems.push_back("mode must be numeric|image|multi");
  }
  if (require_key("model")) {
    if (!cmd["model"].is_object()) {
      problems.push_back("model must be an object");
    } else {
      for (const char* key : {"numeric_blocks", "image_blocks", "attn_heads", "decoder_layers"}) {
        if (!cmd["model"].contains(key) || !cmd["model"][key].is_number_integer() ||
            cmd["model"][key].get<int>() < 1)
          problems.push_back(std::string("model.") + key + " must be a positive integer");
      }
    }
  }
  for (const char* key : {"checkpoint", "dataset"})
    if (require_key(key) && (!cmd[key].is_string() || cmd[key].get<std::string>().empty()))
      problems.push_back(std::string(key) + " must be a non-empty string");
  if (require_key("horizon") &&
      (!cmd["horizon"].is_number_integer() || cmd["horizon"].get<int>() < 1))
    problems.push_back("horizon must be a positive integer");
  return problems;
}

// --- task analysis agent -------------------------------------------------------

using Responder = std::function<std::string(const std::string& question)>;

struct TaaOptions {
  std::size_t clarification_budget = 5;
  AgentPrompts prompts{kDefaultTaaPrompt, kDefaultSpaPrompt, kDefaultCaaPrompt};
};

struct TaaResult {
  StructuredTask task;
  ReActTrace trace;
  std::vector<std::string> questions;   // one per clarification round
  std::vector<std::string> raw_replies; // backend replies, in order
};

namespace detail {

inline StructuredTask parse_task_reply(const ordered_json& j, const std::string& raw) {
  StructuredTask task;
  task.rewritten_requirement = j.value("rewritten_requirement", raw);
  if (j.contains("num_uavs") && j["num_uavs"].is_number())
    task.num_uavs = j["num_uavs"].get<int>();
  if (j.contains("data_location") && j["data_location"].is_string())
    task.data_location = j["data_location"].get<std::string>();
  if (j.contains("data_format") && j["data_format"].is_string()) {
    try {
      task.data_format = data_format_from_string(j["data_format"].get<std::string>());
    } catch (const std::invalid_argument&) {
      // an unrecognized format counts as missing
    }
  }
  if (j.contains("data_labels") && j["data_labels"].is_string())
    task.data_labels = j["data_labels"].get<std::string>();
  if (j.contains("accuracy_requirement") && j["accuracy_requirement"].is_number())
    task.accuracy_requirement = j["accuracy_requirement"].get<double>();
  task.recompute_missing();
  return task;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

} // namespace detail

/// Rewrite-then-clarify loop: asks the manager (through `responder`) about
/// missing key fields until the task is complete or the clarification
/// budget is spent, in which case the task returns flagged with its
/// residual missing fields.
inline TaaResult run_taa(Backend& backend, const std::string& requirement,
                         const Responder& responder, const TaaOptions& opts = {}) {
  if (requirement.empty())
    throw std::invalid_argument("run_taa: requirement must be non-empty");
  TaaResult result;
  result.trace.prompt = opts.prompts.taa + "\n\nRequirement: " + requirement;

  std::string current = requirement;
  for (std::size_t round = 0;; ++round) {
    const auto reply = backend.complete(
        "taa", {{"system", opts.prompts.taa}, {"user", current}});
    result.raw_replies.push_back(reply);
    const auto parsed = beamloop::detail::extract_json_object(reply);
    if (!parsed.has_value())
      throw std::runtime_error("backend-failure: task analysis reply carries no JSON object");
    result.task = detail::parse_task_reply(*parsed, reply);

    ReActStep step;
    step.reasoning = reply;
    if (result.task.complete()) {
      step.action = ordered_json{{"name", "finalize"}};
      step.observation = "task complete";
      result.trace.steps.push_back(std::move(step));
      break;
    }
    if (round == opts.clarification_budget) {
      result.task.budget_exhausted = true;
      step.action = ordered_json{{"name", "give_up"}};
      step.observation = "clarification-budget-exhausted; missing: " +
                         detail::join(result.task.missing_fields, ", ");
      result.trace.steps.push_back(std::move(step));
      break;
    }
    // a question is asked iff key fields are missing at this round
    std::string question = parsed->value("question", "");
    if (question.empty())
      question = "Please provide: " + detail::join(result.task.missing_fields, ", ");
    result.questions.push_back(question);
    const std::string answer = responder(question);
    step.action = ordered_json{{"name", "ask_manager"}, {"input", question}};
    step.observation = answer;
    result.trace.steps.push_back(std::move(step));
    current += "\n[manager] " + answer;
  }
  result.trace.terminal = result.task.to_json().dump();
  return result;
}

// --- solution planning agent ---------------------------------------------------

struct SpaPolicy {
  enum class Kind { FixedIterations, SimilarityThreshold };
  Kind kind = Kind::FixedIterations;
  std::size_t iterations = 2;      // fixed-iteration count
  double threshold = 0.75;         // similarity policy target
  std::string reference;           // reference plan text for the similarity policy
  std::size_t max_iterations = 6;  // cap under the similarity policy
};

struct SpaOptions {
  ModelRegistry registry = ModelRegistry::builtin();
  double blur_threshold = kDefaultBlurThreshold;
  AgentPrompts prompts{kDefaultTaaPrompt, kDefaultSpaPrompt, kDefaultCaaPrompt};
};

/// ReAct planning loop. The backend chooses actions; tools run for real
/// and their findings land in the plan. Hybrid-format data gets a
/// blurriness assessment even if the loop never called the tool, and a
/// blurry verdict forces Numeric mode.
inline std::pair<Plan, ReActTrace> run_spa(Backend& backend, const StructuredTask& task,
                                           const std::string& feedback, const SpaPolicy& policy,
                                           const SpaOptions& opts = {}) {
  ReActTrace trace;
  trace.prompt = opts.prompts.spa + "\n\nTask: " + task.to_json().dump() +
                 (feedback.empty() ? "" : "\n\nAssessor feedback: " + feedback);

  Plan plan;
  const auto& tier = opts.registry.lookup(task.accuracy_requirement);
  plan.model_config = {tier.numeric_blocks, tier.image_blocks, tier.attn_heads,
                       tier.decoder_layers};
  plan.checkpoint = tier.checkpoint;

  std::string last_draft;
  double last_similarity = -1.0;

  auto run_blurriness = [&]() -> std::string {
    try {
      const auto res = assess_blurriness_dir(task.data_location.value_or(""), opts.blur_threshold);
      ordered_json rj;
      rj["score"] = res.score;
      rj["is_blurry"] = res.is_blurry;
      plan.tool_findings.push_back({"blurriness", task.data_location.value_or(""), rj});
      return rj.dump();
    } catch (const std::exception& e) {
      return std::string("tool-failure: ") + e.what(); // recorded, not fatal
    }
  };

  const std::size_t bound = policy.kind == SpaPolicy::Kind::FixedIterations
                                ? policy.iterations
                                : policy.max_iterations;
  for (std::size_t iter = 0; iter < bound; ++iter) {
    std::vector<ChatMessage> messages{{"system", opts.prompts.spa},
                                      {"user", trace.history_at(trace.steps.size() + 1)}};
    const auto reply = backend.complete("spa", messages);
    const auto parsed = beamloop::detail::extract_json_object(reply);

    ReActStep step;
    std::string action_name = "draft_plan";
    std::string action_input = reply;
    if (parsed.has_value() && parsed->contains("action") && parsed->at("action").is_object()) {
      step.reasoning = parsed->value("thought", reply);
      action_name = parsed->at("action").value("name", "draft_plan");
      action_input = parsed->at("action").value("input", "");
    } else {
      step.reasoning = reply; // free-text replies count as drafts
    }
    step.action = ordered_json{{"name", action_name}, {"input", action_input}};

    if (action_name == "call_tool") {
      step.observation = run_blurriness();
    } else if (action_name == "lookup_registry") {
      auto found = tier.to_json();
      plan.tool_findings.push_back({"registry", "accuracy_requirement", found});
      step.observation = found.dump();
    } else if (action_name == "draft_plan") {
      last_draft = action_input.empty() ? reply : action_input;
      if (policy.kind == SpaPolicy::Kind::SimilarityThreshold && !policy.reference.empty()) {
        last_similarity = semantic_similarity(last_draft, policy.reference);
        ordered_json oj;
        oj["similarity"] = last_similarity;
        step.observation = oj.dump();
      } else {
        step.observation = "draft recorded";
      }
    } else if (action_name == "finalize") {
      step.observation = "finalize requested";
      trace.steps.push_back(std::move(step));
      break;
    } else {
      step.observation = "unknown action '" + action_name + "'";
    }
    trace.steps.push_back(std::move(step));

    if (policy.kind == SpaPolicy::Kind::SimilarityThreshold && last_similarity >= policy.threshold)
      break;
  }

  // the stated planning rule for hybrid data: always consult blurriness
  bool has_blur_finding = false;
  for (const auto& f : plan.tool_findings) has_blur_finding = has_blur_finding || f.tool == "blurriness";
  if (task.data_format == DataFormat::Hybrid && !has_blur_finding) {
    ReActStep step;
    step.reasoning = "hybrid data requires an image quality check";
    step.action = ordered_json{{"name", "call_tool"}, {"input", "blurriness"}};
    step.observation = run_blurriness();
    trace.steps.push_back(std::move(step));
  }

  if (task.data_format.has_value()) {
    switch (*task.data_format) {
      case DataFormat::Numeric: plan.mode = Mode::Numeric; break;
      case DataFormat::Image: plan.mode = Mode::Image; break;
      case DataFormat::Hybrid: plan.mode = Mode::Multi; break;
    }
  }
  for (const auto& f : plan.tool_findings)
    if (f.tool == "blurriness" && f.result.value("is_blurry", false) &&
        task.data_format == DataFormat::Hybrid)
      plan.mode = Mode::Numeric; // degraded images: numeric data becomes the sole input

  plan.rationale = last_draft.empty() ? ("registry " + tier.tier + " configuration for the " +
                                         beamloop::to_string(plan.mode) + " data flow")
                                      : last_draft;

  ReActStep fin;
  fin.reasoning = plan.rationale;
  fin.action = ordered_json{{"name", "finalize"}};
  fin.observation = "plan assembled";
  trace.steps.push_back(std::move(fin));
  trace.terminal = plan.to_json().dump();
  return {plan, trace};
}

// --- completeness assessment agent ----------------------------------------------

struct CaaOptions {
  AgentPrompts prompts{kDefaultTaaPrompt, kDefaultSpaPrompt, kDefaultCaaPrompt};
  ModelRegistry registry = ModelRegistry::builtin();
  std::size_t default_horizon = 5;
};

namespace detail {

inline std::vector<std::string> caa_rubric(const Plan& plan, const StructuredTask& task,
                                           const ModelRegistry& registry) {
  std::vector<std::string> violations;
  if (task.data_format.has_value()) {
    Mode required = Mode::Multi;
    switch (*task.data_format) {
      case DataFormat::Numeric: required = Mode::Numeric; break;
      case DataFormat::Image: required = Mode::Image; break;
      case DataFormat::Hybrid: required = Mode::Multi; break;
    }
    bool ok = plan.mode == required;
    if (!ok && *task.data_format == DataFormat::Hybrid && plan.mode == Mode::Numeric) {
      for (const auto& f : plan.tool_findings)
        ok = ok || (f.tool == "blurriness" && f.result.value("is_blurry", false));
    }
    if (!ok)
      violations.push_back("mode " + beamloop::to_string(plan.mode) +
                           " is incompatible with data_format " +
                           agents::to_string(*task.data_format));
  }
  const auto& mc = plan.model_config;
  if (mc.numeric_blocks < 1 || mc.image_blocks < 1 || mc.attn_heads < 1 || mc.decoder_layers < 1)
    violations.push_back("model configuration values must be positive");
  if (task.accuracy_requirement.has_value()) {
    const auto& tier = registry.lookup(task.accuracy_requirement);
    if (mc.numeric_blocks < tier.numeric_blocks || mc.image_blocks < tier.image_blocks ||
        mc.attn_heads < tier.attn_heads || mc.decoder_layers < tier.decoder_layers)
      violations.push_back("model configuration below the " + tier.tier +
                           " tier required for accuracy " +
                           std::to_string(*task.accuracy_requirement));
  }
  if (plan.checkpoint.empty()) violations.push_back("plan names no checkpoint");
  if (!task.data_location.has_value()) violations.push_back("task names no data location");
  return violations;
}

} // namespace detail

/// Rule-based alignment rubric combined with the backend's own verdict;
/// both must agree before the activation command is emitted.
inline std::pair<Assessment, ReActTrace> run_caa(Backend& backend, const Plan& plan,
                                                 const StructuredTask& task,
                                                 const CaaOptions& opts = {}) {
  ReActTrace trace;
  trace.prompt = opts.prompts.caa + "\n\nTask: " + task.to_json().dump() +
                 "\n\nPlan: " + plan.to_json().dump();

  auto violations = detail::caa_rubric(plan, task, opts.registry);

  const auto reply = backend.complete(
      "caa", {{"system", opts.prompts.caa},
              {"user", "Task: " + task.to_json().dump() + "\nPlan: " + plan.to_json().dump()}});
  bool backend_resolved = false;
  std::string backend_feedback;
  const auto parsed = beamloop::detail::extract_json_object(reply);
  if (parsed.has_value()) {
    backend_resolved = parsed->value("status", "") == "resolved";
    backend_feedback = parsed->value("feedback", "");
  } else {
    backend_feedback = "assessment reply was not parseable";
  }

  Assessment out;
  if (violations.empty() && backend_resolved) {
    out.status = Assessment::Status::Resolved;
    out.feedback = backend_feedback;
    ordered_json cmd;
    cmd["version"] = 1;
    cmd["mode"] = beamloop::to_string(plan.mode);
    ordered_json mc;
    mc["numeric_blocks"] = plan.model_config.numeric_blocks;
    mc["image_blocks"] = plan.model_config.image_blocks;
    mc["attn_heads"] = plan.model_config.attn_heads;
    mc["decoder_layers"] = plan.model_config.decoder_layers;
    cmd["model"] = mc;
    cmd["checkpoint"] = plan.checkpoint;
    cmd["dataset"] = task.data_location.value_or("");
    cmd["horizon"] = opts.default_horizon;
    const auto problems = validate_command(cmd);
    if (!problems.empty())
      throw std::logic_error("run_caa: emitted command failed validation: " + problems[0]);
    out.command = cmd;
  } else {
    out.status = Assessment::Status::Unresolved;
    std::string fb = detail::join(violations, "; ");
    if (!backend_resolved && !backend_feedback.empty())
      fb += (fb.empty() ? "" : "; ") + backend_feedback;
    out.feedback = fb.empty() ? "plan rejected by assessment" : fb;
  }

  ReActStep step;
  step.reasoning = reply;
  step.action = ordered_json{{"name", "assess"}};
  step.observation = out.resolved() ? "resolved" : ("unresolved: " + out.feedback);
  trace.steps.push_back(std::move(step));
  trace.terminal = out.resolved() ? out.command->dump() : out.feedback;
  return {out, trace};
}

// --- full workflow ---------------------------------------------------------------

struct WorkflowOptions {
  std::size_t max_validation_iterations = 5; // C_max
  TaaOptions taa;
  SpaPolicy spa_policy;
  SpaOptions spa;
  CaaOptions caa;
};

struct WorkflowResult {
  StructuredTask task;
  Plan plan;
  Assessment assessment;
  ReActTrace taa_trace;
  std::vector<ReActTrace> spa_traces;
  std::vector<ReActTrace> caa_traces;
  std::vector<std::string> taa_raw_replies;
  std::vector<std::string> taa_questions;
  std::size_t iterations = 0;

  ordered_json to_json() const {
    ordered_json j;
    j["task"] = task.to_json();
    j["plan"] = plan.to_json();
    j["resolved"] = assessment.resolved();
    j["feedback"] = assessment.feedback;
    if (assessment.command) j["command"] = *assessment.command;
    j["iterations"] = iterations;
    j["taa_trace"] = taa_trace.to_json();
    ordered_json spa_js = ordered_json::array(), caa_js = ordered_json::array();
    for (const auto& t : spa_traces) spa_js.push_back(t.to_json());
    for (const auto& t : caa_traces) caa_js.push_back(t.to_json());
    j["spa_traces"] = spa_js;
    j["caa_traces"] = caa_js;
    return j;
  }
};

/// Task analysis once, then plan generation and assessment in a feedback
/// loop bounded by C_max validation iterations.
inline WorkflowResult run_workflow(Backend& backend, const std::string& requirement,
                                   const Responder& responder, const WorkflowOptions& opts = {}) {
  if (opts.max_validation_iterations < 1)
    throw std::invalid_argument("run_workflow: C_max must be >= 1");
  WorkflowResult result;

  auto taa = run_taa(backend, requirement, responder, opts.taa);
  result.task = taa.task;
  result.taa_trace = std::move(taa.trace);
  result.taa_raw_replies = std::move(taa.raw_replies);
  result.taa_questions = std::move(taa.questions);

  std::string feedback;
  for (std::size_t c = 0; c < opts.max_validation_iterations; ++c) {
    auto [plan, spa_trace] = run_spa(backend, result.task, feedback, opts.spa_policy, opts.spa);
    result.plan = std::move(plan);
    result.spa_traces.push_back(std::move(spa_trace));

    auto [assessment, caa_trace] = run_caa(backend, result.plan, result.task, opts.caa);
    result.assessment = std::move(assessment);
    result.caa_traces.push_back(std::move(caa_trace));
    result.iterations = c + 1;
    if (result.assessment.resolved()) break;
    feedback = result.assessment.feedback;
  }
  return result;
}

} // namespace beamloop::agents
