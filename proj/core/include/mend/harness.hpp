#pragma once

// Experiment orchestration: sample -> prompt -> agent -> compile -> metrics
// for every (submission, agent, context) condition, an append-only JSONL
// record store, and the analysis report over it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mend/agents.hpp"
#include "mend/compilecheck.hpp"
#include "mend/corpus.hpp"
#include "mend/metrics.hpp"
#include "mend/stats.hpp"

namespace mend::harness {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentSpec {
  std::string id;
  // "mock" or "http".
  std::string kind = "mock";
  agents::MockBehavior behavior = agents::MockBehavior::echo;
  std::filesystem::path script;  // scripted mocks
  agents::HttpEndpointConfig http;
  int max_retries = 3;
  int initial_backoff_ms = 500;
  // 0 means unlimited.
  double max_requests_per_second = 0.0;
};

struct ExperimentConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path problems_path;
  std::size_t sample_n = 100;
  std::uint64_t sample_seed = 0;
  std::vector<std::string> problem_ids;
  bool stratified = false;
  std::vector<AgentSpec> agents;
  std::vector<agents::ContextLevel> contexts;
  compilecheck::CheckOptions compile;
  std::size_t parallelism = 1;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> templates_dir;
  // Stop after this many new records (simulates an interrupted run).
  std::optional<std::size_t> stop_after;
};

/// Reads a JSON config; relative paths resolve against the config file's
/// directory. Throws HarnessError on invalid content.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

struct RepairRecord {
  std::string id;  // "<submission>/<agent>/<context>"
  std::string submission_id;
  std::string problem_id;
  std::string agent_id;
  agents::ContextLevel context = agents::ContextLevel::low;
  std::string prompt_hash;
  std::optional<std::string> repaired_source;
  std::optional<agents::Failure> failure;
  std::string failure_message;
  int attempts = 0;
  std::int64_t latency_ms = 0;
  // Diagnostics of the repaired source; absent when no repair was produced.
  std::optional<compilecheck::CompilerDiagnostics> diagnostics;
  std::optional<metrics::RepairMetrics> metrics;
  std::string created_at;

  bool compiled() const { return diagnostics && diagnostics->ok; }
};

std::string record_id(const std::string& submission_id, const std::string& agent_id, agents::ContextLevel level);

nlohmann::json to_json(const RepairRecord& r);
RepairRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const compilecheck::CompilerDiagnostics& d);
compilecheck::CompilerDiagnostics diagnostics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const metrics::RepairMetrics& m);
metrics::RepairMetrics metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const corpus::Submission& s);
corpus::Submission submission_from_json(const nlohmann::json& j);

/// Output directory layout.
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kSampleFile = "sample.jsonl";
inline constexpr const char* kAnnotationsFile = "annotations.jsonl";

/// Reads complete lines of records.jsonl; a partial final line (no newline)
/// is ignored. Throws HarnessError on malformed complete lines.
std::vector<RepairRecord> load_records(const std::filesystem::path& dir);
std::vector<corpus::Submission> load_sample(const std::filesystem::path& dir);

struct ExperimentSummary {
  std::size_t sampled = 0;
  std::size_t conditions = 0;
  std::size_t planned = 0;
  std::size_t skipped_existing = 0;
  std::size_t written = 0;
  std::size_t agent_failures = 0;
  bool interrupted = false;
  // "<agent>/<context>" -> records in the store after the run.
  std::map<std::string, std::size_t> per_condition;
};

/// Runs every missing (submission, condition) pair and appends the records
/// in a fixed order (submission, then agent, then context), whatever the
/// parallelism. Existing records are skipped; a torn final line is removed.
ExperimentSummary run_experiment(const ExperimentConfig& config);

/// Endpoint for a spec (mock or HTTP).
std::shared_ptr<agents::AgentEndpoint> make_endpoint(const AgentSpec& spec);

/// Record ids whose prompt_hash does not match the prompt rebuilt from the
/// stored sample, problems and templates.
std::vector<std::string> verify_prompt_hashes(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Report

struct HumanLabel {
  int sp = 0;
  int lp = 0;
};

struct ReportOptions {
  bool normalized_distance = false;
  // LP tables only over repairs with SP = 1.
  bool lp_requires_sp = false;
};

struct TableReport {
  std::string name;
  std::string provenance;  // "auto", "human", "mixed" or "" for compilation tables
  stats::ContingencyTable table;
  std::optional<stats::ChiSquareResult> test;
  std::string note;
};

struct AnovaReport {
  std::string name;
  std::vector<std::string> groups;
  std::vector<double> means;
  std::vector<std::size_t> sizes;
  std::optional<stats::AnovaResult> test;
  std::string note;
};

struct AnalysisReport {
  std::size_t record_count = 0;
  std::vector<TableReport> tables;
  std::vector<AnovaReport> anovas;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Throws HarnessError on an empty store.
AnalysisReport report(const std::vector<RepairRecord>& records,
                      const std::map<std::string, HumanLabel>& human = {}, const ReportOptions& options = {});

/// "χ²(2, N = 600) = 3.21, p = .201"
std::string apa_chi_square(const stats::ChiSquareResult& r);
/// "F(2, 594) = 16.22, p < .001"
std::string apa_anova(const stats::AnovaResult& r);

}  // namespace mend::harness
