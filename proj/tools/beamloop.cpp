// SPDX-License-Identifier: Apache-2.0
//
// beamloop CLI: dataset generation and ingestion, predictor training and
// evaluation, command-file execution, the interactive agent workflow, and
// the gradient-check battery. Every run echoes its resolved configuration
// and seed into <out>/run_log.json.
#include <iostream>

#include <CLI11.hpp>

#include "beamloop/agents/workflow.hpp"
#include "beamloop/gradcheck_suite.hpp"
#include "beamloop/training.hpp"

namespace {

using namespace beamloop;
namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 6;

void write_run_log(const std::string& out_dir, const std::string& subcommand,
                   std::uint64_t seed, const ordered_json& resolved) {
  fs::create_directories(out_dir);
  ordered_json j;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["config"] = resolved;
  std::ofstream os(fs::path(out_dir) / "run_log.json");
  if (!os) throw std::runtime_error("io-failure: cannot write run_log.json under " + out_dir);
  os << j.dump(2) << "\n";
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("io-failure: cannot write " + path.string());
  os << j.dump(2) << "\n";
}

struct GenDataArgs {
  std::string out;
  std::size_t samples = 100;
  std::uint64_t seed = kDefaultSeed;
  std::size_t q = 64, m = 16, t = 10, p = 5, hw = 64, traj_len = 34, subcarriers = 64;
  double sample_rate = 1.0;
};

int cmd_gen_data(const GenDataArgs& a) {
  ScenarioConfig cfg;
  cfg.seed = a.seed;
  cfg.seq_len = a.t;
  cfg.horizon = a.p;
  cfg.traj_len = a.traj_len;
  cfg.camera.width = a.hw;
  cfg.camera.height = a.hw;
  cfg.sample_rate = a.sample_rate;
  OfdmConfig ofdm;
  ofdm.num_subcarriers = a.subcarriers;
  auto cb = build_codebook(a.m, a.q);

  auto manifest = build_dataset(cfg, ofdm, cb, a.samples, a.out);
  ordered_json resolved = manifest.meta.to_json();
  resolved["traj_len"] = a.traj_len;
  write_run_log(a.out, "gen-data", a.seed, resolved);
  std::cout << "wrote " << manifest.records.size() << " samples under " << a.out << "\n";
  return 0;
}

int cmd_ingest(const std::string& in_dir, const std::string& out_dir) {
  auto ds = ingest_external(in_dir);
  auto manifest = save_dataset(ds, out_dir);
  write_run_log(out_dir, "ingest", kDefaultSeed, manifest.meta.to_json());
  std::cout << "ingested " << manifest.records.size() << " samples from " << in_dir << " into "
            << out_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, out, mode = "multi", config_file;
  double fraction = 1.0, lr = 1e-3, dropout = 0.1, target_top1 = 0.0, val_fraction = 0.15;
  std::size_t epochs = 20, batch = 32, hidden = 32, blocks = 2, heads = 2, layers = 2;
  std::uint64_t seed = kDefaultSeed;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  auto ds = load_dataset(a.data);
  PredictorConfig cfg;
  if (!a.config_file.empty()) {
    std::ifstream is(a.config_file);
    if (!is) throw std::runtime_error("missing-file: " + a.config_file);
    ordered_json j;
    is >> j;
    cfg = PredictorConfig::from_json(j);
  } else {
    cfg.hidden_dim = a.hidden;
    cfg.numeric_blocks = a.blocks;
    cfg.image_blocks = a.blocks;
    cfg.attn_heads = a.heads;
    cfg.decoder_layers = a.layers;
    cfg.dropout = a.dropout;
  }
  cfg.mode = mode_from_string(a.mode);
  cfg.seed = a.seed;
  cfg.num_classes = ds.meta.num_beams;
  cfg.window = ds.meta.window;
  cfg.horizon = ds.meta.horizon;
  cfg.numeric_dim = ds.meta.numeric_dim;
  cfg.frame_h = ds.meta.frame_h;
  cfg.frame_w = ds.meta.frame_w;

  HybridModel model(cfg);
  auto [train_idx, val_idx] = split_train_val(ds, a.val_fraction);

  TrainSchedule sched;
  sched.epochs = a.epochs;
  sched.batch_size = a.batch;
  sched.lr = a.lr;
  sched.fraction = a.fraction;
  sched.seed = a.seed;
  sched.target_top1 = a.target_top1;
  sched.verbose = !a.quiet;

  auto report = train(model, ds, train_idx, val_idx, sched);

  fs::create_directories(a.out);
  const auto ckpt = (fs::path(a.out) / "model.ckpt").string();
  save_model(model, ckpt);
  write_json(fs::path(a.out) / "report.json", report.to_json());
  ordered_json resolved = model.config().to_json();
  resolved["epochs"] = a.epochs;
  resolved["batch_size"] = a.batch;
  resolved["lr"] = a.lr;
  resolved["fraction"] = a.fraction;
  resolved["data"] = a.data;
  write_run_log(a.out, "train", a.seed, resolved);

  const auto& last = report.epochs.back();
  std::cout << "trained " << report.trained_samples << " samples for " << report.epochs.size()
            << " epoch(s); final train loss " << last.train_loss;
  if (!val_idx.empty()) std::cout << ", val top-1 " << last.val_top_k.at(1);
  std::cout << "; checkpoint " << ckpt << "\n";
  return 0;
}

struct EvalArgs {
  std::string data, checkpoint, out, mode, split = "test";
  std::size_t batch = 32;
};

int cmd_eval(const EvalArgs& a) {
  auto ds = load_dataset(a.data);
  auto model = load_model<float>(a.checkpoint);
  const Mode mode = a.mode.empty() ? model.config().mode : mode_from_string(a.mode);
  check_model_matches_dataset(model.config(), ds.meta, mode);

  auto indices = ds.split_indices(a.split);
  if (indices.empty()) throw std::runtime_error("eval: split '" + a.split + "' holds no samples");
  auto report = evaluate(model, mode, ds, indices, a.batch);

  fs::create_directories(a.out);
  write_json(fs::path(a.out) / "report.json", report.to_json());
  report.write_confusion_csv((fs::path(a.out) / "confusion.csv").string());
  ordered_json resolved = model.config().to_json();
  resolved["mode"] = to_string(mode);
  resolved["split"] = a.split;
  resolved["data"] = a.data;
  write_run_log(a.out, "eval", model.config().seed, resolved);

  std::cout << "eval " << to_string(mode) << " on " << indices.size() << " samples: ";
  for (const auto& [k, v] : report.top_k) std::cout << "top-" << k << " " << v << "  ";
  std::cout << "loss " << report.mean_loss << "  latency " << report.per_frame_latency_ms
            << " ms/frame\n";
  return 0;
}

int cmd_predict(const std::string& command_file, const std::string& out_dir) {
  std::ifstream is(command_file);
  if (!is) throw std::runtime_error("missing-file: " + command_file);
  ordered_json cmd;
  try {
    is >> cmd;
  } catch (const std::exception& e) {
    throw std::runtime_error("schema-violation: command file: " + std::string(e.what()));
  }
  const auto problems = agents::validate_command(cmd);
  if (!problems.empty())
    throw std::runtime_error("schema-violation: command: " + problems.front());

  auto model = load_model<float>(cmd["checkpoint"].get<std::string>());
  const Mode mode = mode_from_string(cmd["mode"].get<std::string>());
  const auto& mc = model.config();
  if (cmd["model"]["numeric_blocks"].get<std::size_t>() != mc.numeric_blocks ||
      cmd["model"]["image_blocks"].get<std::size_t>() != mc.image_blocks ||
      cmd["model"]["attn_heads"].get<std::size_t>() != mc.attn_heads ||
      cmd["model"]["decoder_layers"].get<std::size_t>() != mc.decoder_layers)
    throw std::runtime_error("config-mismatch: command model differs from the checkpoint");
  if (cmd["horizon"].get<std::size_t>() != mc.horizon)
    throw std::runtime_error("config-mismatch: command horizon differs from the checkpoint");

  auto ds = load_dataset(cmd["dataset"].get<std::string>());
  check_model_matches_dataset(mc, ds.meta, mode);
  auto indices = ds.split_indices("test");
  if (indices.empty()) indices = ds.split_indices("train");

  fs::create_directories(out_dir);
  std::ofstream preds(fs::path(out_dir) / "predictions.jsonl");
  double latency = 0.0;
  for (auto idx : indices) {
    const auto& s = ds.samples[idx];
    auto p = predict(model, mode, &s, &s);
    ordered_json pj;
    pj["id"] = s.id;
    pj["beams"] = p.beam_indices;
    pj["labels"] = s.labels;
    preds << pj.dump() << "\n";
    latency += p.per_frame_latency_ms;
  }
  auto report = evaluate(model, mode, ds, indices);
  write_json(fs::path(out_dir) / "report.json", report.to_json());
  ordered_json resolved = cmd;
  write_run_log(out_dir, "predict", mc.seed, resolved);
  std::cout << "predicted " << indices.size() << " samples in " << to_string(mode)
            << " mode: top-1 " << report.top_k.at(1) << ", mean latency "
            << latency / static_cast<double>(indices.size()) << " ms/frame\n";
  return 0;
}

struct AgentArgs {
  std::string backend = "mock", script, endpoint, model = "default", requirement, answers_file;
  std::string reference_file, prompts_dir = "prompts", registry_file, out = "agent_out";
  std::size_t cmax = 5, iters = 2;
  double threshold = 0.0, timeout = 30.0;
};

int cmd_agent(const AgentArgs& a) {
  agents::Backend backend = [&] {
    if (a.backend == "mock") {
      if (a.script.empty())
        throw std::invalid_argument("agent: --backend mock requires --script");
      return agents::Backend::mock_from_file(a.script);
    }
    if (a.backend == "http-chat") {
      agents::BackendConfig cfg;
      cfg.kind = agents::BackendConfig::Kind::HttpChat;
      cfg.endpoint = a.endpoint; // falls back to BEAMLOOP_LLM_URL
      cfg.model = a.model;
      cfg.timeout_seconds = a.timeout;
      return agents::Backend::http_chat(cfg);
    }
    throw std::invalid_argument("agent: unknown backend '" + a.backend + "'");
  }();

  std::string requirement = a.requirement;
  if (requirement.empty()) {
    std::cout << "Describe the beam prediction requirement:\n> " << std::flush;
    std::getline(std::cin, requirement);
  }

  // manager-in-the-loop: scripted answers when provided, terminal otherwise
  std::vector<std::string> canned;
  if (!a.answers_file.empty()) {
    std::ifstream is(a.answers_file);
    if (!is) throw std::runtime_error("missing-file: " + a.answers_file);
    ordered_json j;
    is >> j;
    for (const auto& e : j) canned.push_back(e.get<std::string>());
  }
  std::size_t cursor = 0;
  agents::Responder responder = [&](const std::string& question) -> std::string {
    if (!canned.empty()) return cursor < canned.size() ? canned[cursor++] : "";
    std::cout << "[clarification] " << question << "\n> " << std::flush;
    std::string answer;
    std::getline(std::cin, answer);
    return answer;
  };

  agents::WorkflowOptions opts;
  opts.max_validation_iterations = a.cmax;
  const auto prompts = agents::load_prompts(a.prompts_dir);
  opts.taa.prompts = prompts;
  opts.spa.prompts = prompts;
  opts.caa.prompts = prompts;
  if (!a.registry_file.empty()) {
    opts.spa.registry = agents::ModelRegistry::from_file(a.registry_file);
    opts.caa.registry = opts.spa.registry;
  }
  if (a.threshold > 0.0) {
    opts.spa_policy.kind = agents::SpaPolicy::Kind::SimilarityThreshold;
    opts.spa_policy.threshold = a.threshold;
    if (a.reference_file.empty())
      throw std::invalid_argument("agent: --threshold requires --reference");
    std::ifstream is(a.reference_file);
    if (!is) throw std::runtime_error("missing-file: " + a.reference_file);
    opts.spa_policy.reference.assign(std::istreambuf_iterator<char>(is),
                                     std::istreambuf_iterator<char>());
  } else {
    opts.spa_policy.kind = agents::SpaPolicy::Kind::FixedIterations;
    opts.spa_policy.iterations = a.iters;
  }

  auto result = agents::run_workflow(backend, requirement, responder, opts);

  fs::create_directories(a.out);
  write_json(fs::path(a.out) / "workflow.json", result.to_json());
  if (result.assessment.command)
    write_json(fs::path(a.out) / "command.json", *result.assessment.command);
  ordered_json resolved;
  resolved["backend"] = a.backend;
  resolved["cmax"] = a.cmax;
  resolved["policy"] = a.threshold > 0.0 ? "similarity-threshold" : "fixed-iterations";
  resolved["iterations_used"] = result.iterations;
  write_run_log(a.out, "agent", kDefaultSeed, resolved);

  std::cout << (result.assessment.resolved() ? "resolved" : "unresolved") << " after "
            << result.iterations << " validation iteration(s)";
  if (result.assessment.command)
    std::cout << "; command written to " << (fs::path(a.out) / "command.json").string();
  std::cout << "\n";
  if (!result.assessment.resolved())
    std::cout << "feedback: " << result.assessment.feedback << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& out_dir) {
  auto results = run_gradcheck_suite();
  bool all_ok = true;
  ordered_json j = ordered_json::array();
  for (const auto& r : results) {
    const bool ok = r.passed();
    all_ok = all_ok && ok;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << r.name << "  max rel err " << r.max_rel_error
              << "\n";
    ordered_json rj;
    rj["name"] = r.name;
    rj["max_rel_error"] = r.max_rel_error;
    rj["passed"] = ok;
    j.push_back(rj);
  }
  fs::create_directories(out_dir);
  write_json(fs::path(out_dir) / "gradcheck.json", j);
  write_run_log(out_dir, "gradcheck", kDefaultSeed, ordered_json{{"checks", results.size()}});
  return all_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"beamloop: agentic mmWave beam prediction for UAV-to-ground links"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labelled dataset");
  gen_cmd->add_option("--out", gen.out, "output dataset directory")->required();
  gen_cmd->add_option("--samples", gen.samples, "number of samples")->required();
  gen_cmd->add_option("--seed", gen.seed, "scenario seed");
  gen_cmd->add_option("--q", gen.q, "codebook beams Q");
  gen_cmd->add_option("--m", gen.m, "array elements M");
  gen_cmd->add_option("--t", gen.t, "observation window T");
  gen_cmd->add_option("--p", gen.p, "prediction horizon P");
  gen_cmd->add_option("--hw", gen.hw, "frame height/width");
  gen_cmd->add_option("--traj-len", gen.traj_len, "steps per trajectory");
  gen_cmd->add_option("--subcarriers", gen.subcarriers, "OFDM subcarriers K");
  gen_cmd->add_option("--sample-rate", gen.sample_rate, "samples per second");

  std::string ingest_in, ingest_out;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert an external manifest into a dataset");
  ingest_cmd->add_option("--in", ingest_in, "external data directory")->required();
  ingest_cmd->add_option("--out", ingest_out, "output dataset directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the hybrid predictor");
  train_cmd->add_option("--data", tr.data, "dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--mode", tr.mode, "numeric|image|multi");
  train_cmd->add_option("--fraction", tr.fraction, "training data fraction");
  train_cmd->add_option("--epochs", tr.epochs, "epochs");
  train_cmd->add_option("--config", tr.config_file, "predictor config JSON");
  train_cmd->add_option("--seed", tr.seed, "init/shuffle seed");
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
  train_cmd->add_option("--batch", tr.batch, "batch size");
  train_cmd->add_option("--hidden", tr.hidden, "hidden dimension d");
  train_cmd->add_option("--blocks", tr.blocks, "encoder SSM blocks");
  train_cmd->add_option("--heads", tr.heads, "attention heads");
  train_cmd->add_option("--layers", tr.layers, "decoder layers");
  train_cmd->add_option("--dropout", tr.dropout, "dropout rate");
  train_cmd->add_option("--target-top1", tr.target_top1, "stop once validation top-1 reaches this");
  train_cmd->add_option("--val-fraction", tr.val_fraction, "validation share of train trajectories");
  train_cmd->add_flag("--quiet", tr.quiet, "suppress per-epoch output");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--out", ev.out, "output directory")->required();
  eval_cmd->add_option("--mode", ev.mode, "numeric|image|multi (default: checkpoint mode)");
  eval_cmd->add_option("--split", ev.split, "dataset split");
  eval_cmd->add_option("--batch", ev.batch, "batch size");

  std::string predict_command, predict_out = "predict_out";
  auto* predict_cmd = app.add_subcommand("predict", "Execute an assessment command file");
  predict_cmd->add_option("--command", predict_command, "command JSON path")->required();
  predict_cmd->add_option("--out", predict_out, "output directory");

  AgentArgs ag;
  auto* agent_cmd = app.add_subcommand("agent", "Run the requirement-to-plan workflow");
  agent_cmd->add_option("--backend", ag.backend, "mock|http-chat");
  agent_cmd->add_option("--script", ag.script, "mock script JSON");
  agent_cmd->add_option("--endpoint", ag.endpoint, "chat endpoint (default: BEAMLOOP_LLM_URL)");
  agent_cmd->add_option("--model", ag.model, "backend model name");
  agent_cmd->add_option("--cmax", ag.cmax, "max validation iterations");
  agent_cmd->add_option("--iters", ag.iters, "fixed planning iterations");
  agent_cmd->add_option("--threshold", ag.threshold, "similarity threshold policy (requires --reference)");
  agent_cmd->add_option("--reference", ag.reference_file, "reference plan text file");
  agent_cmd->add_option("--requirement", ag.requirement, "requirement text (default: prompt on stdin)");
  agent_cmd->add_option("--answers", ag.answers_file, "scripted manager answers JSON array");
  agent_cmd->add_option("--prompts", ag.prompts_dir, "prompt directory");
  agent_cmd->add_option("--registry", ag.registry_file, "model registry JSON");
  agent_cmd->add_option("--timeout", ag.timeout, "backend timeout seconds");
  agent_cmd->add_option("--out", ag.out, "output directory");

  std::string gradcheck_out = "gradcheck_out";
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Run the gradient-check battery");
  gradcheck_cmd->add_option("--out", gradcheck_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1; // usage errors are user errors
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (ingest_cmd->parsed()) return cmd_ingest(ingest_in, ingest_out);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (predict_cmd->parsed()) return cmd_predict(predict_command, predict_out);
    if (agent_cmd->parsed()) return cmd_agent(ag);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(gradcheck_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
