#include <fstream>
#include <sstream>

#include "mend/harness.hpp"

namespace mend::harness {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

// Complete lines of a JSONL file; a trailing fragment without newline is
// dropped.
std::vector<std::string> complete_lines(const fs::path& path) {
  std::vector<std::string> out;
  if (!fs::exists(path)) return out;
  const std::string text = read_file(path);
  std::size_t pos = 0;
  while (true) {
    const std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) break;
    std::string line = text.substr(pos, eol - pos);
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(std::move(line));
    pos = eol + 1;
  }
  return out;
}

}  // namespace

std::string record_id(const std::string& submission_id, const std::string& agent_id, agents::ContextLevel level) {
  return submission_id + "/" + agent_id + "/" + std::string(agents::to_string(level));
}

json to_json(const compilecheck::CompilerDiagnostics& d) {
  json messages = json::array();
  for (const auto& m : d.messages) {
    messages.push_back({{"line", m.line}, {"col", m.col}, {"severity", compilecheck::to_string(m.severity)},
                        {"text", m.text}});
  }
  return {{"ok", d.ok}, {"backend", compilecheck::to_string(d.backend)}, {"wrapped", d.wrapped},
          {"messages", messages}};
}

compilecheck::CompilerDiagnostics diagnostics_from_json(const json& j) {
  compilecheck::CompilerDiagnostics d;
  d.ok = j.at("ok").get<bool>();
  d.backend = compilecheck::parse_backend(j.at("backend").get<std::string>());
  d.wrapped = get_or(j, "wrapped", false);
  for (const auto& m : j.at("messages")) {
    compilecheck::Message msg;
    msg.line = m.at("line").get<int>();
    msg.col = m.at("col").get<int>();
    const std::string sev = m.at("severity").get<std::string>();
    msg.severity = sev == "error"     ? compilecheck::Severity::error
                   : sev == "warning" ? compilecheck::Severity::warning
                                      : compilecheck::Severity::note;
    msg.text = m.at("text").get<std::string>();
    d.messages.push_back(std::move(msg));
  }
  return d;
}

json to_json(const metrics::RepairMetrics& m) {
  return {{"raw_levenshtein", m.raw_levenshtein},
          {"normalized_levenshtein", m.normalized_levenshtein},
          {"token_edit_count", m.token_edit_count},
          {"sp_auto", metrics::to_string(m.sp_auto)},
          {"lp_auto", metrics::to_string(m.lp_auto)},
          {"compiled", m.compiled}};
}

metrics::RepairMetrics metrics_from_json(const json& j) {
  metrics::RepairMetrics m;
  m.raw_levenshtein = j.at("raw_levenshtein").get<std::size_t>();
  m.normalized_levenshtein = j.at("normalized_levenshtein").get<double>();
  m.token_edit_count = j.at("token_edit_count").get<std::size_t>();
  m.sp_auto = metrics::parse_sp_auto(j.at("sp_auto").get<std::string>());
  m.lp_auto = metrics::parse_lp_auto(j.at("lp_auto").get<std::string>());
  m.compiled = j.at("compiled").get<bool>();
  return m;
}

json to_json(const RepairRecord& r) {
  json j = {{"id", r.id},
            {"submission_id", r.submission_id},
            {"problem_id", r.problem_id},
            {"agent_id", r.agent_id},
            {"context", agents::to_string(r.context)},
            {"prompt_hash", r.prompt_hash},
            {"repaired_source", r.repaired_source ? json(*r.repaired_source) : json(nullptr)},
            {"failure", r.failure ? json(agents::to_string(*r.failure)) : json(nullptr)},
            {"failure_message", r.failure_message},
            {"attempts", r.attempts},
            {"latency_ms", r.latency_ms},
            {"diagnostics", r.diagnostics ? to_json(*r.diagnostics) : json(nullptr)},
            {"metrics", r.metrics ? to_json(*r.metrics) : json(nullptr)},
            {"created_at", r.created_at}};
  return j;
}

RepairRecord record_from_json(const json& j) {
  RepairRecord r;
  r.id = j.at("id").get<std::string>();
  r.submission_id = j.at("submission_id").get<std::string>();
  r.problem_id = get_or<std::string>(j, "problem_id", "");
  r.agent_id = j.at("agent_id").get<std::string>();
  r.context = agents::parse_context_level(j.at("context").get<std::string>());
  r.prompt_hash = get_or<std::string>(j, "prompt_hash", "");
  if (!j.at("repaired_source").is_null()) r.repaired_source = j["repaired_source"].get<std::string>();
  if (auto it = j.find("failure"); it != j.end() && !it->is_null()) {
    r.failure = agents::parse_failure(it->get<std::string>());
  }
  r.failure_message = get_or<std::string>(j, "failure_message", "");
  r.attempts = get_or(j, "attempts", 0);
  r.latency_ms = get_or<std::int64_t>(j, "latency_ms", 0);
  if (auto it = j.find("diagnostics"); it != j.end() && !it->is_null()) r.diagnostics = diagnostics_from_json(*it);
  if (auto it = j.find("metrics"); it != j.end() && !it->is_null()) r.metrics = metrics_from_json(*it);
  r.created_at = get_or<std::string>(j, "created_at", "");
  return r;
}

json to_json(const corpus::Submission& s) {
  json j = {{"id", s.id},
            {"student_id", s.student_id},
            {"problem_id", s.problem_id},
            {"code", s.source},
            {"compile_status", corpus::to_string(s.compile_status)}};
  if (s.score) j["score"] = *s.score;
  if (s.submitted_at) j["timestamp"] = *s.submitted_at;
  return j;
}

corpus::Submission submission_from_json(const json& j) {
  corpus::Submission s;
  s.id = j.at("id").get<std::string>();
  s.student_id = j.at("student_id").get<std::string>();
  s.problem_id = j.at("problem_id").get<std::string>();
  s.source = j.at("code").get<std::string>();
  s.compile_status = corpus::parse_compile_status(get_or<std::string>(j, "compile_status", ""));
  if (auto it = j.find("score"); it != j.end() && !it->is_null()) s.score = it->get<double>();
  if (auto it = j.find("timestamp"); it != j.end() && !it->is_null()) s.submitted_at = it->get<std::string>();
  return s;
}

std::vector<RepairRecord> load_records(const fs::path& dir) {
  std::vector<RepairRecord> out;
  std::size_t row = 0;
  for (const auto& line : complete_lines(dir / kRecordsFile)) {
    ++row;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw HarnessError(std::string(kRecordsFile) + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

std::vector<corpus::Submission> load_sample(const fs::path& dir) {
  std::vector<corpus::Submission> out;
  for (const auto& line : complete_lines(dir / kSampleFile)) out.push_back(submission_from_json(json::parse(line)));
  return out;
}

ExperimentConfig parse_config(const json& doc, const fs::path& base) {
  ExperimentConfig c;
  try {
    c.corpus_path = resolve(base, doc.at("corpus").get<std::string>());
    c.problems_path = resolve(base, doc.at("problems").get<std::string>());
    const json& sample = doc.at("sample");
    c.sample_n = sample.at("n").get<std::size_t>();
    c.sample_seed = get_or<std::uint64_t>(sample, "seed", 0);
    c.problem_ids = get_or(sample, "problem_ids", std::vector<std::string>{});
    c.stratified = get_or(sample, "stratified", false);

    for (const auto& a : doc.at("agents")) {
      AgentSpec spec;
      spec.id = a.at("id").get<std::string>();
      spec.kind = get_or<std::string>(a, "kind", "mock");
      spec.max_retries = get_or(a, "max_retries", 3);
      spec.initial_backoff_ms = get_or(a, "initial_backoff_ms", 500);
      spec.max_requests_per_second = get_or(a, "max_requests_per_second", 0.0);
      if (spec.kind == "mock") {
        spec.behavior = agents::parse_mock_behavior(get_or<std::string>(a, "behavior", "echo"));
        if (spec.behavior == agents::MockBehavior::scripted) spec.script = resolve(base, a.at("script").get<std::string>());
      } else if (spec.kind == "http") {
        spec.http.id = spec.id;
        spec.http.base_url = a.at("base_url").get<std::string>();
        spec.http.model = a.at("model").get<std::string>();
        spec.http.api_key_env = get_or<std::string>(a, "api_key_env", "");
        spec.http.temperature = get_or(a, "temperature", 0.0);
        spec.http.max_tokens = get_or(a, "max_tokens", 2048);
        spec.http.timeout = std::chrono::seconds(get_or(a, "timeout_s", 120));
      } else {
        throw HarnessError("agent " + spec.id + ": unknown kind '" + spec.kind + "'");
      }
      for (const auto& prev : c.agents)
        if (prev.id == spec.id) throw HarnessError("duplicate agent id '" + spec.id + "'");
      c.agents.push_back(std::move(spec));
    }
    for (const auto& level : doc.at("contexts")) c.contexts.push_back(agents::parse_context_level(level.get<std::string>()));

    // "auto" picks javac when it is on PATH, else the internal parser.
    {
      const json compile = doc.value("compile", json::object());
      c.compile.compiler = get_or<std::string>(compile, "compiler", "javac");
      const std::string backend = get_or<std::string>(compile, "backend", "auto");
      if (backend == "auto") {
        c.compile.backend = compilecheck::compiler_available(c.compile.compiler) ? compilecheck::Backend::external_javac
                                                                                 : compilecheck::Backend::internal_parse;
      } else {
        c.compile.backend = compilecheck::parse_backend(backend);
      }
      c.compile.compiler_args = get_or(compile, "args", std::vector<std::string>{});
      c.compile.timeout = std::chrono::milliseconds(get_or<std::int64_t>(compile, "timeout_ms", 30000));
    }
    c.parallelism = std::max<std::size_t>(1, get_or<std::size_t>(doc, "parallelism", 1));
    c.output_dir = resolve(base, doc.at("output_dir").get<std::string>());
    if (auto it = doc.find("templates"); it != doc.end() && !it->is_null()) {
      c.templates_dir = resolve(base, it->get<std::string>());
    }
    if (auto it = doc.find("stop_after"); it != doc.end() && !it->is_null()) c.stop_after = it->get<std::size_t>();
  } catch (const json::exception& e) {
    throw HarnessError(std::string("invalid experiment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw HarnessError(std::string("invalid experiment config: ") + e.what());
  }
  if (c.agents.empty()) throw HarnessError("experiment config needs at least one agent");
  if (c.contexts.empty()) throw HarnessError("experiment config needs at least one context level");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw HarnessError(path.string() + ": " + e.what());
  }
  return parse_config(doc, fs::absolute(path).parent_path());
}

}  // namespace mend::harness
