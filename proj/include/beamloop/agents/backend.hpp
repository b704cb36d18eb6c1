// SPDX-License-Identifier: Apache-2.0
//
// Chat-completion backends. http-chat posts {model, messages, temperature}
// and reads choices[0].message.content; the bearer token comes from
// BEAMLOOP_API_KEY and the default endpoint from BEAMLOOP_LLM_URL. The
// mock backend replays a script keyed by (agent role, step index) and
// never touches the network.
#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "beamloop/agents/types.hpp"

namespace beamloop::agents {

struct ChatMessage {
  std::string role; // "system" | "user" | "assistant"
  std::string content;
};

struct BackendConfig {
  enum class Kind { HttpChat, Mock };
  Kind kind = Kind::Mock;
  std::string endpoint; // http-chat; falls back to BEAMLOOP_LLM_URL
  std::string model;
  double timeout_seconds = 30.0;
  int max_retries = 2;
  double temperature = 0.0;
  std::string script_id; // mock: path of the script file
};

struct BackendExchange {
  std::string agent_role;
  std::vector<ChatMessage> request;
  std::string reply;
};

class Backend {
public:
  static Backend mock_from_json(ordered_json script) {
    Backend b;
    b.cfg_.kind = BackendConfig::Kind::Mock;
    b.script_ = std::move(script);
    return b;
  }

  static Backend mock_from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("missing-file: mock script " + path);
    ordered_json script;
    try {
      is >> script;
    } catch (const std::exception& e) {
      throw std::runtime_error("schema-violation: mock script " + path + ": " + e.what());
    }
    auto b = mock_from_json(std::move(script));
    b.cfg_.script_id = path;
    return b;
  }

  static Backend http_chat(BackendConfig cfg) {
    if (cfg.endpoint.empty()) {
      const char* env = std::getenv("BEAMLOOP_LLM_URL");
      if (env != nullptr) cfg.endpoint = env;
    }
    if (cfg.endpoint.empty() || cfg.model.empty())
      throw std::invalid_argument("http-chat backend requires an endpoint and a model name");
    Backend b;
    cfg.kind = BackendConfig::Kind::HttpChat;
    b.cfg_ = std::move(cfg);
    return b;
  }

  bool is_mock() const { return cfg_.kind == BackendConfig::Kind::Mock; }
  const BackendConfig& config() const { return cfg_; }
  const std::vector<BackendExchange>& transcript() const { return transcript_; }
  std::size_t http_requests_sent() const { return http_requests_; }

  /// Next assistant reply for the given agent role.
  std::string complete(const std::string& agent_role, const std::vector<ChatMessage>& messages) {
    std::string reply = is_mock() ? next_scripted(agent_role) : post_chat(messages);
    transcript_.push_back({agent_role, messages, reply});
    return reply;
  }

private:
  std::string next_scripted(const std::string& agent_role) {
    if (!script_.contains(agent_role))
      throw std::runtime_error("script-exhausted: no replies scripted for role " + agent_role);
    const auto& seq = script_.at(agent_role);
    auto& cursor = cursors_[agent_role];
    if (!seq.is_array() || cursor >= seq.size())
      throw std::runtime_error("script-exhausted: role " + agent_role + " at step " +
                               std::to_string(cursor));
    const auto& entry = seq.at(cursor++);
    return entry.is_string() ? entry.get<std::string>() : entry.dump();
  }

  std::string post_chat(const std::vector<ChatMessage>& messages) {
    std::string scheme_host, path;
    split_endpoint(cfg_.endpoint, scheme_host, path);

    ordered_json body;
    body["model"] = cfg_.model;
    ordered_json msgs = ordered_json::array();
    for (const auto& m : messages) {
      ordered_json mj;
      mj["role"] = m.role;
      mj["content"] = m.content;
      msgs.push_back(mj);
    }
    body["messages"] = msgs;
    body["temperature"] = cfg_.temperature;

    httplib::Client client(scheme_host);
    const auto timeout_ms = static_cast<time_t>(cfg_.timeout_seconds * 1000.0);
    client.set_connection_timeout(0, std::max<time_t>(1, timeout_ms) * 1000);
    client.set_read_timeout(0, std::max<time_t>(1, timeout_ms) * 1000);
    httplib::Headers headers;
    if (const char* key = std::getenv("BEAMLOOP_API_KEY"))
      headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      ++http_requests_;
      auto res = client.Post(path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "timeout: endpoint unreachable (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status >= 500) {
        last_error = "http-error: status " + std::to_string(res->status);
        continue; // server-side failure, retry
      }
      if (res->status != 200)
        throw std::runtime_error("http-error: status " + std::to_string(res->status));
      auto j = ordered_json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
        throw std::runtime_error("backend-failure: malformed chat completion response");
      return j["choices"][0]["message"]["content"].get<std::string>();
    }
    throw std::runtime_error(last_error.empty() ? "backend-failure: no attempts made" : last_error);
  }

  static void split_endpoint(const std::string& url, std::string& scheme_host, std::string& path) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
      throw std::invalid_argument("endpoint must be an http(s) URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      scheme_host = url;
      path = "/v1/chat/completions";
    } else {
      scheme_host = url.substr(0, path_start);
      path = url.substr(path_start);
    }
  }

  BackendConfig cfg_;
  ordered_json script_;
  std::map<std::string, std::size_t> cursors_;
  std::vector<BackendExchange> transcript_;
  std::size_t http_requests_ = 0;
};

/// Dispatch helper matching the BackendConfig kinds.
inline Backend make_backend(const BackendConfig& cfg) {
  if (cfg.kind == BackendConfig::Kind::Mock) {
    if (cfg.script_id.empty())
      throw std::invalid_argument("mock backend requires a script file");
    return Backend::mock_from_file(cfg.script_id);
  }
  return Backend::http_chat(cfg);
}

} // namespace beamloop::agents
