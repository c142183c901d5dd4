#pragma once

// Prompt construction for the two context levels, repair-agent endpoints
// (HTTP chat completion and offline mocks), and reply parsing.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mend/compilecheck.hpp"
#include "mend/corpus.hpp"

namespace mend::agents {

enum class ContextLevel { low, high };
enum class Part { code, instructions, compiler_message, problem_statement, fewshot };

std::string_view to_string(ContextLevel level);
std::string_view to_string(Part part);
ContextLevel parse_context_level(std::string_view s);

struct Condition {
  std::string agent_id;
  ContextLevel level = ContextLevel::low;
  bool operator==(const Condition&) const = default;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  ContextLevel level = ContextLevel::low;
  std::set<Part> included_parts;
};

/// Text pieces of a prompt. Defaults are built in; any piece can be
/// replaced by a file of the same name (system.txt, instructions.txt, ...)
/// in a template directory.
struct PromptTemplates {
  std::string system;
  std::string instructions;
  std::string code_heading;
  std::string compiler_heading;
  std::string statement_heading;
  std::string fewshot_heading;
  std::string fewshot_correct;
  std::string fewshot_incorrect;

  static PromptTemplates defaults();
  /// Defaults overridden by whichever files exist in `dir`.
  static PromptTemplates load(const std::filesystem::path& dir);
};

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// High context requires the problem statement, diagnostics and at least
/// one few-shot pair; otherwise throws PromptError naming the missing part.
PromptBundle build_prompt(const corpus::Submission& submission, const corpus::Problem* problem,
                          const compilecheck::CompilerDiagnostics* diag, ContextLevel level,
                          const PromptTemplates& templates = PromptTemplates::defaults());

/// SHA-256 (hex) over the system and user text.
std::string prompt_hash(const PromptBundle& bundle);
std::string sha256_hex(std::string_view data);

/// Fenced block holding `code`; extract_first_fenced_block returns `code`
/// from it exactly. The fence grows when the code itself contains backticks.
std::string fence(std::string_view code, std::string_view info = "java");

/// Interior of the first closed ``` or ~~~ fence: the bytes between the
/// opening fence line and the closing fence line, minus the line break
/// before the closing fence.
std::optional<std::string> extract_first_fenced_block(std::string_view text);

// ---------------------------------------------------------------------------
// Endpoints

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One chat-style completion per call. Implementations must be safe to call
/// from several threads at once.
class AgentEndpoint {
 public:
  virtual ~AgentEndpoint() = default;
  virtual std::string id() const = 0;
  /// Returns the raw reply text; throws TransportError.
  virtual std::string complete(const PromptBundle& bundle) = 0;
};

struct HttpEndpointConfig {
  std::string id;
  // OpenAI-compatible base, e.g. https://api.example.com/v1; requests go to
  // <base_url>/chat/completions.
  std::string base_url;
  std::string model;
  // Name of the environment variable holding the bearer token (may be empty).
  std::string api_key_env;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::chrono::seconds timeout{120};
};

class HttpChatEndpoint : public AgentEndpoint {
 public:
  explicit HttpChatEndpoint(HttpEndpointConfig config);
  std::string id() const override { return config_.id; }
  std::string complete(const PromptBundle& bundle) override;

 private:
  HttpEndpointConfig config_;
};

enum class MockBehavior { echo, rule_proxy, scripted };
MockBehavior parse_mock_behavior(std::string_view s);

class MockEndpoint : public AgentEndpoint {
 public:
  MockEndpoint(std::string id, MockBehavior behavior);
  /// Scripted mock replaying prompt_hash -> reply.
  MockEndpoint(std::string id, std::map<std::string, std::string> script);

  std::string id() const override { return id_; }
  std::string complete(const PromptBundle& bundle) override;

  /// Reads JSONL lines {"prompt_hash": ..., "reply": ...}.
  static std::map<std::string, std::string> load_script(const std::filesystem::path& path);

 private:
  std::string id_;
  MockBehavior behavior_;
  std::map<std::string, std::string> script_;
};

/// Passes calls through and appends {"prompt_hash", "reply"} lines to a
/// JSONL file usable as a scripted mock table.
class RecordingEndpoint : public AgentEndpoint {
 public:
  RecordingEndpoint(std::shared_ptr<AgentEndpoint> inner, std::filesystem::path script_out);
  std::string id() const override { return inner_->id(); }
  std::string complete(const PromptBundle& bundle) override;

 private:
  std::shared_ptr<AgentEndpoint> inner_;
  std::filesystem::path out_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Invocation

enum class Failure { transport, refusal, empty, unfenced };
std::string_view to_string(Failure f);
Failure parse_failure(std::string_view s);

struct AgentReply {
  std::optional<std::string> repaired_source;
  std::string raw_reply;
  std::int64_t latency_ms = 0;
  std::string agent_id;
  std::optional<Failure> failure;
  int attempts = 0;
  std::string error_message;
};

struct RunOptions {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
  // Replaceable for tests.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Retries transport failures with exponential backoff; a reply without a
/// fenced block is a refusal when it reads like one, otherwise unfenced.
AgentReply run_agent(const PromptBundle& bundle, AgentEndpoint& endpoint, const RunOptions& options = {});

bool looks_like_refusal(std::string_view reply);

}  // namespace mend::agents
