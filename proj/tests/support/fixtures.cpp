#include "fixtures.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mend/javasyn.hpp"

namespace mend::testing {

namespace fs = std::filesystem;

fs::path data_dir() { return MEND_TEST_DATA_DIR; }
fs::path seeds_dir() { return data_dir() / "seeds"; }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<Seed> load_seeds() {
  std::vector<Seed> out;
  for (const auto& e : fs::directory_iterator(seeds_dir())) {
    if (e.path().extension() == ".java") out.push_back({e.path().stem().string(), read_text(e.path())});
  }
  std::sort(out.begin(), out.end(), [](const Seed& a, const Seed& b) { return a.name < b.name; });
  return out;
}

std::vector<Mutation> single_deletions(const std::string& source) {
  std::vector<Mutation> out;
  for (const auto& t : javasyn::tokenize(source).tokens) {
    std::size_t at = std::string::npos;
    if (t.is_sep(";") || t.is_sep("}") || t.is_sep(")")) {
      at = t.offset;
    } else if (t.kind == javasyn::TokenKind::string_literal || t.kind == javasyn::TokenKind::char_literal) {
      at = t.end() - 1;
    }
    if (at == std::string::npos) continue;
    Mutation m;
    m.offset = at;
    m.deleted = source[at];
    m.source = source;
    m.source.erase(at, 1);
    out.push_back(std::move(m));
  }
  return out;
}

corpus::Corpus fixture_corpus() {
  corpus::Corpus c;
  std::size_t mutation_no = 0;
  const auto seeds = load_seeds();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& seed = seeds[i];
    const std::string problem = i % 2 == 0 ? "P1" : "P2";
    const std::string student = "s" + std::to_string(100 + i);

    corpus::Submission orig;
    orig.id = seed.name + "-0";
    orig.student_id = student;
    orig.problem_id = problem;
    orig.source = seed.source;
    orig.compile_status = corpus::CompileStatus::compilable;
    orig.score = 1.0;
    c.add(orig);

    // Three deletions spread over the program.
    const auto muts = single_deletions(seed.source);
    for (std::size_t k = 0; k < 3 && k < muts.size(); ++k) {
      const auto& m = muts[(k * muts.size()) / 3];
      corpus::Submission s;
      s.id = seed.name + "-" + std::to_string(k + 1);
      s.student_id = student;
      s.problem_id = problem;
      s.source = m.source;
      s.compile_status = ++mutation_no % 7 == 0 ? corpus::CompileStatus::unknown : corpus::CompileStatus::uncompilable;
      s.submitted_at = "2025-02-" + std::to_string(10 + k) + "T09:00:00Z";
      c.add(std::move(s));
    }
  }
  return c;
}

std::string fixture_problems_json() {
  using nlohmann::json;
  const json doc = json::array({
      {{"id", "P1"},
       {"statement", "Write a method that returns the sum of the even numbers in an array of ints."},
       {"fewshot",
        json::array({{{"broken", "int s = 0\nfor (int x : a) s += x;"},
                      {"repaired", "int s = 0;\nfor (int x : a) s += x;"},
                      {"label", "correct"}},
                     {{"broken", "int s = 0\nfor (int x : a) s += x;"},
                      {"repaired", "int s = 0;\nfor (int i = 0; i < a.length; i++) s += a[i];"},
                      {"label", "incorrect"}}})}},
      {{"id", "P2"},
       {"statement", "Given a String, return a new String built from its characters according to the rule "
                     "in the exercise."},
       {"fewshot",
        json::array({{{"broken", "if (s.length() > 2 {\n  return s;\n}"},
                      {"repaired", "if (s.length() > 2) {\n  return s;\n}"},
                      {"label", "correct"}},
                     {{"broken", "if (s.length() > 2 {\n  return s;\n}"},
                      {"repaired", "return s.length() > 2 ? s : \"\";"},
                      {"label", "incorrect"}}})}},
  });
  return doc.dump(2) + "\n";
}

std::string random_program(std::uint64_t seed) {
  static const char* kPieces[] = {
      "int",  "x",  "=",  "1;",  "if",   "(",     ")",     "{",    "}",     "for",  "while", "return", "\"str\"",
      "\"",   "'",  "'a'", "//", "/*",   "*/",    "\n",    " ",    "\t",    "0x1F", "3.5e2", "1_000L", "\\",
      "\r\n", "@",  "#",  "é",   "\xE2\x82\xAC", "\"\\n\"", "'\\''", "\"\"\"", "->", "::", ">>>=", "...",
      "\xff", "`",  "$x", "_",   "String", "null",  "++",    ".",    ",",     "[",    "]",     "<",      ">"};
  std::mt19937_64 rng(seed);
  const std::size_t n = rng() % 120;
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 10 == 0) {
      out += static_cast<char>(rng() % 256);
    } else {
      out += kPieces[rng() % std::size(kPieces)];
    }
  }
  return out;
}

TempDir::TempDir() {
  std::string templ = (fs::temp_directory_path() / "mend-test-XXXXXX").string();
  if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

nlohmann::json fixture_experiment(const std::filesystem::path& dir, std::size_t n) {
  write_text(dir / "corpus.csv", corpus::to_csv(fixture_corpus()));
  write_text(dir / "problems.json", fixture_problems_json());
  return {
      {"corpus", "corpus.csv"},
      {"problems", "problems.json"},
      {"sample", {{"n", n}, {"seed", 7}, {"problem_ids", {"P1", "P2"}}}},
      {"agents", {{{"id", "proxy"}, {"kind", "mock"}, {"behavior", "rule_proxy"}},
                  {{"id", "echo"}, {"kind", "mock"}, {"behavior", "echo"}}}},
      {"contexts", {"low", "high"}},
      {"compile", {{"backend", "internal_parse"}}},
      {"output_dir", "out"},
  };
}

}  // namespace mend::testing
