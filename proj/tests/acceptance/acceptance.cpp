// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "mend/agents.hpp"
#include "mend/annosvc.hpp"
#include "mend/compilecheck.hpp"
#include "mend/harness.hpp"
#include "mend/javasyn.hpp"
#include "mend/metrics.hpp"
#include "mend/repair.hpp"
#include "mend/stats.hpp"

using namespace mend;
using nlohmann::json;
namespace fs = std::filesystem;
namespace t = mend::testing;

namespace {

struct Failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(12);
  ss << v;
  return ss.str();
}

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<std::string()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ok && budget_s > 0 && secs >= budget_s) {
    ok = false;
    detail += " (took " + num(secs) + " s, budget " + num(budget_s) + " s)";
  }
  if (!ok) ++failures;
  std::cout << (ok ? "PASS " : "FAIL ") << name << " [" << std::fixed;
  std::cout.precision(3);
  std::cout << secs << " s] " << detail << std::endl;
  std::cout.unsetf(std::ios::fixed);
}

stats::ChiSquareResult chi(std::vector<std::vector<std::int64_t>> counts) {
  return stats::chi_square(stats::ContingencyTable::from_counts(std::move(counts)));
}

std::string random_string(std::mt19937_64& rng) {
  std::string s(rng() % 21, ' ');
  for (auto& c : s) c = static_cast<char>('a' + rng() % 4);
  return s;
}

std::size_t dp_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

// Records minus per-run timing fields.
std::vector<json> stable(const std::vector<harness::RepairRecord>& records) {
  std::vector<json> out;
  for (const auto& r : records) {
    json j = harness::to_json(r);
    j.erase("created_at");
    j.erase("latency_ms");
    out.push_back(std::move(j));
  }
  return out;
}

json e2e_config(const fs::path& dir) {
  json doc = t::fixture_experiment(dir, 100);
  doc["agents"] = json::array({{{"id", "rule_proxy"}, {"kind", "mock"}, {"behavior", "rule_proxy"}}});
  return doc;
}

// Yes/no counts per group, tallied straight from the JSONL text.
std::map<std::string, std::pair<int, int>> tally_compiled(const fs::path& records_file, const char* key) {
  std::map<std::string, std::pair<int, int>> out;
  std::ifstream in(records_file);
  for (std::string line; std::getline(in, line);) {
    const json j = json::parse(line);
    const bool ok = j.contains("diagnostics") && !j["diagnostics"].is_null() && j["diagnostics"]["ok"].get<bool>();
    auto& cell = out[j[key].get<std::string>()];
    (ok ? cell.first : cell.second)++;
  }
  return out;
}

}  // namespace

int main() {
  criterion("chi_square_regression", 1.0, [] {
    const auto a = chi({{197, 3}, {192, 8}, {191, 9}});
    require(std::abs(a.statistic - 3.21) <= 0.02, "statistic " + num(a.statistic));
    require(std::abs(a.p - 0.201) <= 0.002, "p " + num(a.p));
    require(a.df == 2 && a.n == 600, "df/n");
    require(harness::apa_chi_square(a) == "χ²(2, N = 600) = 3.21, p = .201", harness::apa_chi_square(a));
    const auto b = chi({{190, 7}, {186, 4}, {170, 22}});
    require(std::abs(b.statistic - 18.10) <= 0.05, "second table " + num(b.statistic));
    const auto c = chi({{166, 26}, {156, 30}, {116, 55}});
    require(std::abs(c.statistic - 22.36) <= 0.05, "third table " + num(c.statistic));
    return "3.21/p=" + num(a.p) + ", " + num(b.statistic) + ", " + num(c.statistic);
  });

  criterion("tail_functions", 1.0, [] {
    double worst = 0.0;
    for (int i = 0; i <= 5000; ++i) {
      const double x = i * 0.01;
      worst = std::max(worst, std::abs(stats::chi_square_sf(x, 2) - std::exp(-x / 2)));
    }
    require(worst <= 1e-10, "max |sf - exp(-x/2)| = " + num(worst));
    const auto r = stats::anova_oneway({{1, 2}, {3, 4}});
    require(std::abs(r.p - 0.1056) <= 0.0005, "anova p " + num(r.p));
    return "max err " + num(worst) + ", anova p " + num(r.p);
  });

  criterion("kappa", 1.0, [] {
    std::vector<int> v(60);
    for (int i = 0; i < 60; ++i) v[i] = i % 3 == 0;
    const auto same = stats::cohen_kappa(v, v);
    require(same.kappa == 1.0, "identical vectors " + num(same.kappa));

    std::vector<int> a, b;
    auto add = [&](int n, int x, int y) {
      for (int i = 0; i < n; ++i) {
        a.push_back(x);
        b.push_back(y);
      }
    };
    add(20, 1, 1);
    add(5, 1, 0);
    add(10, 0, 1);
    add(15, 0, 0);
    const auto k = stats::cohen_kappa(a, b);
    require(std::abs(k.kappa - 0.4) <= 1e-9, "[[20,5],[10,15]] " + num(k.kappa));

    // Gate: exactly 0.80 fails, identical labels pass.
    std::vector<annosvc::Annotation> anns;
    for (int i = 0; i < 60; ++i) {
      const int x = i < 30, y = i < 27 || (i >= 30 && i < 33);
      anns.push_back({"r" + std::to_string(i), "p", x, x, 1, "", std::nullopt});
      anns.push_back({"r" + std::to_string(i), "q", y, y, 1, "", std::nullopt});
    }
    const auto boundary = annosvc::compute_agreement(anns, 1, 0.80);
    require(boundary.pairs.at(0).sp.kappa == 0.8, "boundary kappa " + num(boundary.pairs.at(0).sp.kappa));
    require(!boundary.gate_passed, "kappa == 0.80 passed the gate");
    for (std::size_t i = 1; i < anns.size(); i += 2) anns[i].sp = anns[i].lp = anns[i - 1].sp;
    require(annosvc::compute_agreement(anns, 1, 0.80).gate_passed, "identical labels failed the gate");
    return "1, " + num(k.kappa) + ", gate strict at 0.80";
  });

  criterion("edit_distance_laws", 30.0, [] {
    std::mt19937_64 rng(20240601);
    for (int i = 0; i < 10000; ++i) {
      const auto a = random_string(rng), b = random_string(rng), c = random_string(rng);
      const auto ab = metrics::levenshtein(a, b);
      require(ab == dp_oracle(a, b), "oracle mismatch on '" + a + "' '" + b + "'");
      require(ab == metrics::levenshtein(b, a), "symmetry");
      require((ab == 0) == (a == b) && metrics::levenshtein(a, a) == 0, "identity");
      require(metrics::levenshtein(a, c) <= ab + metrics::levenshtein(b, c), "triangle");
    }
    return std::string("10000 triples");
  });

  criterion("lexer_losslessness", 0, [] {
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const auto src = t::random_program(i);
      require(javasyn::detokenize(javasyn::tokenize(src)) == src, "random program " + std::to_string(i));
    }
    const auto seeds = t::load_seeds();
    require(seeds.size() >= 50, "only " + std::to_string(seeds.size()) + " seed programs");
    for (const auto& s : seeds) require(javasyn::detokenize(javasyn::tokenize(s.source)) == s.source, s.name);
    return "1000 random + " + std::to_string(seeds.size()) + " programs";
  });

  criterion("mutation_repair_closure", 60.0, [] {
    const auto seeds = t::load_seeds();
    require(seeds.size() >= 50, "only " + std::to_string(seeds.size()) + " seed programs");
    std::size_t n = 0;
    for (const auto& s : seeds) {
      require(javasyn::parse(std::string_view(s.source)).ok(), s.name + " does not parse");
      for (const auto& m : t::single_deletions(s.source)) {
        ++n;
        const std::string where = s.name + " @" + std::to_string(m.offset) + " '" + std::string(1, m.deleted) + "'";
        const auto r = repair::repair(m.source);
        require(r.parse_ok_after, where + ": still does not parse");
        require(metrics::levenshtein(m.source, r.repaired_source) <= 3, where + ": distance > 3");
        require(metrics::sp_check(m.source, r.repaired_source) == metrics::SpAuto::preserved, where + ": sp");
        require(metrics::classify_edits(m.source, r.repaired_source) == metrics::LpAuto::syntactic_only,
                where + ": lp");
      }
    }
    return std::to_string(n) + " mutations over " + std::to_string(seeds.size()) + " seeds";
  });

  criterion("end_to_end_determinism", 0, [] {
    t::TempDir full_dir;
    const auto full_cfg = harness::parse_config(e2e_config(full_dir.path()), full_dir.path());
    const auto summary = harness::run_experiment(full_cfg);
    const auto full = harness::load_records(full_cfg.output_dir);
    require(summary.written == 200 && full.size() == 200, "records: " + std::to_string(full.size()));
    std::set<std::string> ids;
    for (const auto& r : full) ids.insert(r.id);
    require(ids.size() == 200, "duplicate record ids");

    // Report tables against counts tallied from the raw JSONL lines.
    const auto rep = harness::report(full);
    const auto by_agent = tally_compiled(full_cfg.output_dir / harness::kRecordsFile, "agent_id");
    const auto by_context = tally_compiled(full_cfg.output_dir / harness::kRecordsFile, "context");
    for (const auto& table : rep.tables) {
      if (table.name != "compiled_by_agent" && table.name != "compiled_by_context") continue;
      const auto& tally = table.name == "compiled_by_agent" ? by_agent : by_context;
      require(table.table.rows.size() == tally.size(), table.name + ": row count");
      for (std::size_t i = 0; i < table.table.rows.size(); ++i) {
        const auto& cell = tally.at(table.table.rows[i]);
        require(table.table.counts[i][0] == cell.first && table.table.counts[i][1] == cell.second,
                table.name + ": counts differ for " + table.table.rows[i]);
      }
    }
    require(harness::report(harness::load_records(full_cfg.output_dir)).to_json() == rep.to_json(),
            "report differs on reload");

    // Killed mid-run, then resumed.
    // The rate limit only slows the run down enough to be killed part way.
    t::TempDir killed_dir;
    json slow = e2e_config(killed_dir.path());
    slow["agents"][0]["max_requests_per_second"] = 100;
    const auto cfg = harness::parse_config(slow, killed_dir.path());
    const pid_t pid = fork();
    if (pid == 0) {
      try {
        harness::run_experiment(cfg);
      } catch (...) {
      }
      _exit(0);
    }
    const auto records_file = cfg.output_dir / harness::kRecordsFile;
    for (int i = 0; i < 500; ++i) {
      if (fs::exists(records_file) && fs::file_size(records_file) > 20000) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill(pid, SIGKILL);
    waitpid(pid, nullptr, 0);
    const std::size_t before = fs::exists(records_file) ? harness::load_records(cfg.output_dir).size() : 0;
    require(before < 200, "run finished before it could be killed");
    harness::run_experiment(cfg);
    require(stable(harness::load_records(cfg.output_dir)) == stable(full), "resumed store differs after kill");

    // Interrupted by stop_after, with a torn final line, then resumed.
    t::TempDir torn_dir;
    json doc = e2e_config(torn_dir.path());
    doc["stop_after"] = 73;
    harness::run_experiment(harness::parse_config(doc, torn_dir.path()));
    {
      std::ofstream f(torn_dir.path() / "out" / harness::kRecordsFile, std::ios::app);
      f << "{\"id\":\"torn";
    }
    doc.erase("stop_after");
    harness::run_experiment(harness::parse_config(doc, torn_dir.path()));
    const auto resumed = harness::load_records(torn_dir.path() / "out");
    require(stable(resumed) == stable(full), "resumed store differs after torn write");
    require(harness::report(resumed).to_json()["tables"] == rep.to_json()["tables"], "resumed report differs");
    return "200 records; kill after " + std::to_string(before) + " and torn resume reproduce the store";
  });

  criterion("prompt_condition_contract", 0, [] {
    t::TempDir dir;
    const auto cfg = harness::parse_config(e2e_config(dir.path()), dir.path());
    harness::run_experiment(cfg);
    const auto sample = harness::load_sample(cfg.output_dir);
    const auto problems = corpus::load_problems(cfg.problems_path);
    const auto tpl = agents::PromptTemplates::defaults();
    std::map<std::string, std::string> hashes;
    for (const auto& r : harness::load_records(cfg.output_dir)) hashes[r.id] = r.prompt_hash;

    std::size_t low = 0, high = 0;
    for (const auto& s : sample) {
      const auto& problem = problems.at(s.problem_id);
      const auto diag = compilecheck::check(s.source, cfg.compile);
      const std::string messages = compilecheck::format_messages(diag);
      require(!messages.empty(), s.id + ": sampled submission has no diagnostics");
      for (auto level : {agents::ContextLevel::low, agents::ContextLevel::high}) {
        const auto p = agents::build_prompt(s, &problem, &diag, level, tpl);
        require(agents::prompt_hash(p) == hashes.at(harness::record_id(s.id, "rule_proxy", level)),
                s.id + ": prompt differs from the one the run used");
        const std::string& u = p.user_text;
        const bool has_code = u.find(agents::fence(s.source)) != std::string::npos;
        const bool has_instructions = u.find(tpl.instructions) != std::string::npos;
        const bool has_statement = u.find(problem.statement) != std::string::npos;
        const bool has_diag = u.find(messages) != std::string::npos;
        bool has_fewshot = true;
        for (const auto& ex : problem.fewshot) {
          has_fewshot = has_fewshot && u.find(agents::fence(ex.broken)) != std::string::npos &&
                        u.find(agents::fence(ex.repaired)) != std::string::npos;
        }
        has_fewshot = has_fewshot && u.find(tpl.fewshot_incorrect) != std::string::npos;
        require(has_code && has_instructions, s.id + ": code or instructions missing");
        if (level == agents::ContextLevel::low) {
          require(!has_statement && !has_diag && u.find(tpl.fewshot_heading) == std::string::npos,
                  s.id + ": low-context prompt leaks high-context parts");
          ++low;
        } else {
          require(has_statement && has_diag && has_fewshot && p.included_parts.size() == 5,
                  s.id + ": high-context prompt lacks a part");
          ++high;
        }
      }
    }
    return std::to_string(low) + " low / " + std::to_string(high) + " high prompts";
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
