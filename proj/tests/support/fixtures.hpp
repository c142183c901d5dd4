#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mend/corpus.hpp"

namespace mend::testing {

std::filesystem::path data_dir();
std::filesystem::path seeds_dir();

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

struct Seed {
  std::string name;  // file stem
  std::string source;
};

/// Seed programs sorted by name.
std::vector<Seed> load_seeds();

struct Mutation {
  std::size_t offset = 0;
  char deleted = 0;
  std::string source;
};

/// Every single deletion of `;`, `}`, `)` or a literal's closing quote, in
/// source order.
std::vector<Mutation> single_deletions(const std::string& source);

/// Deterministic corpus built from the seeds: each seed's original
/// (compilable) plus three mutations (uncompilable), alternating between
/// problems "P1" and "P2"; every seventh mutation has unknown status.
corpus::Corpus fixture_corpus();

/// Problems JSON for P1 and P2, each with a correct and an incorrect pair.
std::string fixture_problems_json();

/// Writes corpus.csv and problems.json into `dir` and returns an experiment
/// config over them (agents "proxy" = rule_proxy and "echo", low and high
/// context, internal parser, output in dir/out). Resolve with parse_config.
nlohmann::json fixture_experiment(const std::filesystem::path& dir, std::size_t n);

/// Random byte soup biased towards Java lexemes; used by lexer properties.
std::string random_program(std::uint64_t seed);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace mend::testing
