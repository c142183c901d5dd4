#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>

#include "fixtures.hpp"

namespace t = mend::testing;
using nlohmann::json;

namespace {

struct Output {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args` (already shell-quoted); stderr is folded into out.
Output run_cli(const std::string& args) {
  const std::string cmd = std::string(MEND_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  Output o;
  std::array<char, 4096> buf;
  for (std::size_t n; (n = fread(buf.data(), 1, buf.size(), pipe)) > 0;) o.out.append(buf.data(), n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

}  // namespace

TEST(Cli, StatsChiSquare) {
  const auto o = run_cli("stats chi2 --table '[[197,3],[192,8],[191,9]]'");
  ASSERT_EQ(o.code, 0) << o.out;
  const json j = json::parse(o.out);
  EXPECT_NEAR(j["statistic"].get<double>(), 3.206896551724138, 1e-12);
  EXPECT_EQ(j["apa"], "χ²(2, N = 600) = 3.21, p = .201");
}

TEST(Cli, StatsKappaAndAnova) {
  auto o = run_cli("stats kappa --a '[1,1,1,0]' --b '[1,1,0,0]'");
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NEAR(json::parse(o.out)["kappa"].get<double>(), 0.5, 1e-12);
  o = run_cli("stats anova --groups '[[1,2],[3,4]]'");
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NEAR(json::parse(o.out)["f"].get<double>(), 8.0, 1e-12);
}

TEST(Cli, RepairAndCompile) {
  t::TempDir dir;
  const auto file = dir.path() / "a.java";
  t::write_text(file, "int x = 1\nreturn x;");
  auto o = run_cli("compile " + quote(file.string()));
  EXPECT_EQ(o.code, 3);
  EXPECT_FALSE(json::parse(o.out)["ok"].get<bool>());

  o = run_cli("repair --engine rules " + quote(file.string()) + " --fixes-out " + quote((dir.path() / "f.json").string()));
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_EQ(o.out, "int x = 1;\nreturn x;");
  EXPECT_EQ(json::parse(t::read_text(dir.path() / "f.json"))["fixes"][0]["rule_id"], "semicolon");

  t::write_text(file, o.out);
  EXPECT_EQ(run_cli("compile " + quote(file.string())).code, 0);
}

TEST(Cli, SkeletonAndMetrics) {
  auto o = run_cli("skeleton " + quote((t::seeds_dir() / "safe_divide.java").string()));
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_EQ(o.out, "METHOD\n  TRY\n    BLOCK\n  CATCH\n    BLOCK\n  BLOCK\n  RETURN\n");

  t::TempDir dir;
  t::write_text(dir.path() / "a.java", "int x = 1\n");
  t::write_text(dir.path() / "b.java", "int x = 1;\n");
  o = run_cli("metrics " + quote((dir.path() / "a.java").string()) + " " + quote((dir.path() / "b.java").string()));
  ASSERT_EQ(o.code, 0) << o.out;
  const json m = json::parse(o.out);
  EXPECT_EQ(m["raw_levenshtein"], 1);
  EXPECT_EQ(m["sp_auto"], "preserved");
}

TEST(Cli, ExperimentRunVerifyReport) {
  t::TempDir dir;
  t::write_text(dir.path() / "exp.json", t::fixture_experiment(dir.path(), 20).dump());
  const std::string cfg = quote((dir.path() / "exp.json").string());
  auto o = run_cli("run --config " + cfg);
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_EQ(json::parse(o.out)["written"], 80);

  EXPECT_EQ(run_cli("verify --config " + cfg).code, 0);

  o = run_cli("report --records " + quote((dir.path() / "out").string()) + " --format text");
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("compiled_by_agent"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("χ²(1, N = 80)"), std::string::npos) << o.out;

  o = run_cli("report --records " + quote((dir.path() / "out").string()) + " --format json");
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_EQ(json::parse(o.out)["record_count"], 80);

  // A tampered prompt hash is reported and fails verification.
  std::string records = t::read_text(dir.path() / "out" / "records.jsonl");
  const auto pos = records.find("\"prompt_hash\":\"") + 15;
  records[pos] = records[pos] == '0' ? '1' : '0';
  t::write_text(dir.path() / "out" / "records.jsonl", records);
  EXPECT_EQ(run_cli("verify --config " + cfg).code, 3);
}

TEST(Cli, Errors) {
  auto o = run_cli("compile /nonexistent/file.java");
  EXPECT_EQ(o.code, 1);
  EXPECT_EQ(o.out.rfind("mend: ", 0), 0u) << o.out;
  EXPECT_NE(run_cli("").code, 0);
  EXPECT_NE(run_cli("stats chi2 --table '[[1,2]'").code, 0);
}
