#pragma once

// Submission corpora (CSV / JSONL), problem files, and reproducible sampling
// of uncompilable submissions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mend/compilecheck.hpp"

namespace mend::corpus {

enum class CompileStatus { compilable, uncompilable, unknown };

std::string_view to_string(CompileStatus s);
/// Accepts the enum names plus common export spellings (success/error,
/// true/false, 1/0); empty means unknown.
CompileStatus parse_compile_status(std::string_view s);

struct Submission {
  std::string id;
  std::string student_id;
  std::string problem_id;
  std::string source;
  std::optional<std::string> submitted_at;
  CompileStatus compile_status = CompileStatus::unknown;
  std::optional<double> score;

  bool operator==(const Submission&) const = default;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientSample : public CorpusError {
 public:
  InsufficientSample(std::size_t requested, std::size_t available, const std::string& scope);
  std::size_t requested() const { return requested_; }
  std::size_t available() const { return available_; }

 private:
  std::size_t requested_;
  std::size_t available_;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Submission> items);

  /// Throws CorpusError on a duplicate id.
  void add(Submission s);
  const Submission* find(std::string_view id) const;

  const std::vector<Submission>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  bool operator==(const Corpus& other) const { return items_ == other.items_; }

 private:
  std::vector<Submission> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Format { csv, jsonl };

/// From the file extension (.csv, .jsonl / .ndjson).
Format format_for(const std::filesystem::path& path);

// Row numbers in errors count data rows from 1 (the CSV header is not a row).
Corpus parse_csv(std::string_view text);
Corpus parse_jsonl(std::string_view text);
Corpus ingest(const std::filesystem::path& path, Format format);
Corpus ingest(const std::filesystem::path& path);

std::string to_csv(const Corpus& corpus);
std::string to_jsonl(const Corpus& corpus);
void export_corpus(const Corpus& corpus, const std::filesystem::path& path, Format format);

/// RFC-4180 records; LF or CRLF line ends; quoted fields keep embedded line
/// breaks byte-exact. Throws CorpusError on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);

struct FewshotExample {
  std::string broken;
  std::string repaired;
  // false marks a counterexample (an unacceptable repair).
  bool correct = true;
};

struct Problem {
  std::string id;
  std::string statement;
  std::vector<FewshotExample> fewshot;
};

/// JSON array of {id, statement, fewshot: [{broken, repaired, label}]}, or an
/// object with a "problems" array. label is "correct" (default) or
/// "incorrect". Each pair must differ.
std::map<std::string, Problem> load_problems(const std::filesystem::path& path);
std::map<std::string, Problem> parse_problems(std::string_view json_text);

struct SampleOptions {
  // Empty selects every problem.
  std::vector<std::string> problem_ids;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  // Equal quotas per problem (remainder to the first problems in id order)
  // instead of a uniform draw over the pooled set.
  bool stratified = false;
  // Classifier for submissions whose compile_status is unknown.
  compilecheck::CheckOptions check;
};

/// Draws n distinct uncompilable submissions with non-blank source.
/// Deterministic in (corpus, options). Throws InsufficientSample.
std::vector<Submission> sample_uncompilable(const Corpus& corpus, const SampleOptions& options);

/// Seeded permutation of [0, n): Fisher-Yates over mt19937_64 with
/// rejection-sampled bounds, so it is identical across standard libraries.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace mend::corpus
