#include "httplib.h"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>

#include "mend/agents.hpp"
#include "mend/repair.hpp"

namespace mend::agents {
namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string code_from_prompt(const PromptBundle& bundle) {
  auto code = extract_first_fenced_block(bundle.user_text);
  if (!code) throw TransportError("mock endpoint: prompt has no fenced code block");
  return *code;
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

ParsedUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw TransportError("invalid base_url: " + url);
  ParsedUrl out{m[1].str(), m[2].str()};
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

HttpChatEndpoint::HttpChatEndpoint(HttpEndpointConfig config) : config_(std::move(config)) {
  split_url(config_.base_url);
}

std::string HttpChatEndpoint::complete(const PromptBundle& bundle) {
  const ParsedUrl url = split_url(config_.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) throw TransportError("environment variable " + config_.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const json body = {
      {"model", config_.model},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_tokens},
      {"messages",
       json::array({{{"role", "system"}, {"content", bundle.system_text}},
                    {{"role", "user"}, {"content", bundle.user_text}}})},
  };
  auto res = client.Post(url.path + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw TransportError(config_.id + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError(config_.id + ": HTTP " + std::to_string(res->status));
  }
  try {
    const json reply = json::parse(res->body);
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(config_.id + ": malformed completion response: " + e.what());
  }
}

// ---------------------------------------------------------------------------

MockBehavior parse_mock_behavior(std::string_view s) {
  if (s == "echo") return MockBehavior::echo;
  if (s == "rule_proxy") return MockBehavior::rule_proxy;
  if (s == "scripted") return MockBehavior::scripted;
  throw std::invalid_argument("unknown mock behavior: " + std::string(s));
}

MockEndpoint::MockEndpoint(std::string id, MockBehavior behavior) : id_(std::move(id)), behavior_(behavior) {}

MockEndpoint::MockEndpoint(std::string id, std::map<std::string, std::string> script)
    : id_(std::move(id)), behavior_(MockBehavior::scripted), script_(std::move(script)) {}

std::string MockEndpoint::complete(const PromptBundle& bundle) {
  switch (behavior_) {
    case MockBehavior::echo:
      return fence(code_from_prompt(bundle));
    case MockBehavior::rule_proxy:
      return fence(repair::repair(code_from_prompt(bundle)).repaired_source);
    case MockBehavior::scripted: {
      const std::string hash = prompt_hash(bundle);
      auto it = script_.find(hash);
      if (it == script_.end()) throw TransportError(id_ + ": no recorded reply for prompt " + hash);
      return it->second;
    }
  }
  throw TransportError("unreachable");
}

std::map<std::string, std::string> MockEndpoint::load_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read reply script " + path.string());
  std::map<std::string, std::string> out;
  std::size_t row = 0;
  for (std::string line; std::getline(in, line);) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      out[obj.at("prompt_hash").get<std::string>()] = obj.at("reply").get<std::string>();
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

RecordingEndpoint::RecordingEndpoint(std::shared_ptr<AgentEndpoint> inner, std::filesystem::path script_out)
    : inner_(std::move(inner)), out_(std::move(script_out)) {}

std::string RecordingEndpoint::complete(const PromptBundle& bundle) {
  std::string reply = inner_->complete(bundle);
  const json line = {{"prompt_hash", prompt_hash(bundle)}, {"reply", reply}};
  std::lock_guard lock(mu_);
  std::ofstream out(out_, std::ios::binary | std::ios::app);
  out << line.dump() << '\n';
  return reply;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Failure f) {
  switch (f) {
    case Failure::transport: return "transport";
    case Failure::refusal: return "refusal";
    case Failure::empty: return "empty";
    case Failure::unfenced: return "unfenced";
  }
  return "?";
}

Failure parse_failure(std::string_view s) {
  for (auto f : {Failure::transport, Failure::refusal, Failure::empty, Failure::unfenced})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown failure kind: " + std::string(s));
}

bool looks_like_refusal(std::string_view reply) {
  static const char* kPhrases[] = {"i can't",  "i cannot",   "i can not", "i won't",     "i will not",
                                   "i'm sorry", "i am sorry", "unable to", "not able to", "i'm not able"};
  const std::string text = lower(reply.substr(0, 400));
  return std::any_of(std::begin(kPhrases), std::end(kPhrases),
                     [&](const char* p) { return text.find(p) != std::string::npos; });
}

AgentReply run_agent(const PromptBundle& bundle, AgentEndpoint& endpoint, const RunOptions& options) {
  AgentReply reply;
  reply.agent_id = endpoint.id();
  const auto started = std::chrono::steady_clock::now();
  auto backoff = options.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    reply.attempts = attempt + 1;
    try {
      reply.raw_reply = endpoint.complete(bundle);
      reply.error_message.clear();
      break;
    } catch (const TransportError& e) {
      reply.error_message = e.what();
      if (attempt >= options.max_retries) {
        reply.failure = Failure::transport;
        break;
      }
      if (options.sleep) {
        options.sleep(backoff);
      } else {
        std::this_thread::sleep_for(backoff);
      }
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * options.backoff_multiplier));
    }
  }
  reply.latency_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
  if (reply.failure) return reply;

  if (reply.raw_reply.find_first_not_of(" \t\r\n") == std::string::npos) {
    reply.failure = Failure::empty;
  } else if (auto code = extract_first_fenced_block(reply.raw_reply)) {
    reply.repaired_source = std::move(*code);
  } else {
    reply.failure = looks_like_refusal(reply.raw_reply) ? Failure::refusal : Failure::unfenced;
  }
  return reply;
}

}  // namespace mend::agents
