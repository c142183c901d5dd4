#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

#include "mend/harness.hpp"

namespace mend::harness {
namespace {

using nlohmann::json;

// Group keys in first-appearance order.
std::vector<std::string> agent_order(const std::vector<RepairRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (std::find(out.begin(), out.end(), r.agent_id) == out.end()) out.push_back(r.agent_id);
  return out;
}

std::vector<std::string> context_order(const std::vector<RepairRecord>& records) {
  std::vector<std::string> out;
  for (auto level : {agents::ContextLevel::low, agents::ContextLevel::high}) {
    const bool present = std::any_of(records.begin(), records.end(), [&](const auto& r) { return r.context == level; });
    if (present) out.emplace_back(agents::to_string(level));
  }
  return out;
}

struct Value {
  int v = 0;
  bool human = false;
};

std::optional<Value> sp_value(const RepairRecord& r, const std::map<std::string, HumanLabel>& human) {
  if (auto it = human.find(r.id); it != human.end()) return Value{it->second.sp, true};
  if (!r.metrics) return std::nullopt;
  switch (r.metrics->sp_auto) {
    case metrics::SpAuto::preserved: return Value{1, false};
    case metrics::SpAuto::changed: return Value{0, false};
    case metrics::SpAuto::undecidable: return std::nullopt;
  }
  return std::nullopt;
}

std::optional<Value> lp_value(const RepairRecord& r, const std::map<std::string, HumanLabel>& human) {
  if (auto it = human.find(r.id); it != human.end()) return Value{it->second.lp, true};
  if (!r.metrics) return std::nullopt;
  switch (r.metrics->lp_auto) {
    case metrics::LpAuto::syntactic_only: return Value{1, false};
    case metrics::LpAuto::semantic_change: return Value{0, false};
    case metrics::LpAuto::undecidable: return std::nullopt;
  }
  return std::nullopt;
}

std::string append_note(std::string note, const std::string& more) {
  if (more.empty()) return note;
  return note.empty() ? more : note + "; " + more;
}

void run_test(TableReport& t) {
  if (t.table.rows.size() < 2) {
    t.note = append_note(t.note, "single condition, no between-condition test");
    return;
  }
  try {
    t.test = stats::chi_square(t.table);
  } catch (const stats::StatsError& e) {
    t.note = append_note(t.note, std::string("test skipped: ") + e.what());
  }
}

TableReport build_table(const std::string& name, const std::vector<RepairRecord>& records,
                        const std::vector<std::string>& groups, bool by_agent,
                        const std::function<std::optional<Value>(const RepairRecord&)>& value,
                        std::size_t* excluded, bool labelled) {
  TableReport t;
  t.name = name;
  t.table.rows = groups;
  t.table.cols = {"yes", "no"};
  t.table.counts.assign(groups.size(), std::vector<std::int64_t>(2, 0));
  std::size_t n_human = 0, n_auto = 0;
  for (const auto& r : records) {
    const std::string key = by_agent ? r.agent_id : std::string(agents::to_string(r.context));
    const auto row = std::find(groups.begin(), groups.end(), key) - groups.begin();
    const auto v = value(r);
    if (!v) {
      if (excluded) ++*excluded;
      continue;
    }
    ++t.table.counts[row][v->v == 1 ? 0 : 1];
    ++(v->human ? n_human : n_auto);
  }
  if (labelled) {
    t.provenance = n_human == 0 ? "auto" : n_auto == 0 ? "human" : "mixed";
  }
  return t;
}

AnovaReport build_anova(const std::string& name, const std::vector<RepairRecord>& records,
                        const std::vector<std::string>& groups, bool by_agent, bool normalized) {
  AnovaReport a;
  a.name = name;
  a.groups = groups;
  std::vector<std::vector<double>> values(groups.size());
  for (const auto& r : records) {
    if (!r.metrics) continue;
    const std::string key = by_agent ? r.agent_id : std::string(agents::to_string(r.context));
    const auto g = std::find(groups.begin(), groups.end(), key) - groups.begin();
    values[g].push_back(normalized ? r.metrics->normalized_levenshtein
                                   : static_cast<double>(r.metrics->raw_levenshtein));
  }
  for (const auto& v : values) {
    a.sizes.push_back(v.size());
    double sum = 0;
    for (double x : v) sum += x;
    a.means.push_back(v.empty() ? 0.0 : sum / static_cast<double>(v.size()));
  }
  if (groups.size() < 2) {
    a.note = "single condition, no between-condition test";
    return a;
  }
  try {
    a.test = stats::anova_oneway(values);
  } catch (const stats::StatsError& e) {
    a.note = std::string("test skipped: ") + e.what();
  }
  return a;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Left-aligned first column, right-aligned rest.
std::string render_grid(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      if (c == 0) {
        line += row[c] + pad;
      } else {
        line += "  " + pad + row[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string apa_chi_square(const stats::ChiSquareResult& r) {
  return "χ²(" + std::to_string(r.df) + ", N = " + std::to_string(r.n) + ") = " + fmt("%.2f", r.statistic) +
         ", " + stats::format_p(r.p);
}

std::string apa_anova(const stats::AnovaResult& r) {
  return "F(" + std::to_string(r.df_between) + ", " + std::to_string(r.df_within) + ") = " + fmt("%.2f", r.f) + ", " +
         stats::format_p(r.p);
}

AnalysisReport report(const std::vector<RepairRecord>& records, const std::map<std::string, HumanLabel>& human,
                      const ReportOptions& options) {
  if (records.empty()) throw HarnessError("report: the record store is empty");
  AnalysisReport rep;
  rep.record_count = records.size();
  const auto by_agent = agent_order(records);
  const auto by_context = context_order(records);

  // Records without a repair count as not compiled.
  auto compiled = [](const RepairRecord& r) { return std::optional<Value>(Value{r.compiled() ? 1 : 0, false}); };
  rep.tables.push_back(build_table("compiled_by_agent", records, by_agent, true, compiled, nullptr, false));
  rep.tables.push_back(build_table("compiled_by_context", records, by_context, false, compiled, nullptr, false));

  std::vector<RepairRecord> compiled_records;
  for (const auto& r : records)
    if (r.compiled()) compiled_records.push_back(r);

  auto sp = [&](const RepairRecord& r) { return sp_value(r, human); };
  auto lp = [&](const RepairRecord& r) -> std::optional<Value> {
    if (options.lp_requires_sp) {
      const auto s = sp_value(r, human);
      if (!s || s->v != 1) return std::nullopt;
    }
    return lp_value(r, human);
  };

  for (const bool agent_axis : {true, false}) {
    const auto& groups = agent_axis ? by_agent : by_context;
    const std::string suffix = agent_axis ? "_by_agent" : "_by_context";
    std::size_t sp_excluded = 0, lp_excluded = 0;
    auto sp_table = build_table("sp" + suffix, compiled_records, groups, agent_axis, sp, &sp_excluded, true);
    auto lp_table = build_table("lp" + suffix, compiled_records, groups, agent_axis, lp, &lp_excluded, true);
    sp_table.note = "compiled repairs only";
    lp_table.note = options.lp_requires_sp ? "compiled repairs with SP = 1 only" : "compiled repairs only";
    if (sp_excluded) sp_table.note += "; " + std::to_string(sp_excluded) + " unlabelled or undecidable excluded";
    if (lp_excluded) lp_table.note += "; " + std::to_string(lp_excluded) + " excluded";
    rep.tables.push_back(std::move(sp_table));
    rep.tables.push_back(std::move(lp_table));
  }
  for (auto& t : rep.tables) run_test(t);

  const std::string metric = options.normalized_distance ? "normalized_edit_distance" : "edit_distance";
  rep.anovas.push_back(build_anova(metric + "_by_agent", records, by_agent, true, options.normalized_distance));
  rep.anovas.push_back(build_anova(metric + "_by_context", records, by_context, false, options.normalized_distance));
  return rep;
}

json AnalysisReport::to_json() const {
  json tables_json = json::array();
  for (const auto& t : tables) {
    json j = {{"name", t.name},
              {"rows", t.table.rows},
              {"cols", t.table.cols},
              {"counts", t.table.counts},
              {"note", t.note}};
    if (!t.provenance.empty()) j["provenance"] = t.provenance;
    if (t.test) {
      j["test"] = {{"statistic", t.test->statistic},
                   {"df", t.test->df},
                   {"p", t.test->p},
                   {"n", t.test->n},
                   {"apa", apa_chi_square(*t.test)}};
    }
    tables_json.push_back(std::move(j));
  }
  json anovas_json = json::array();
  for (const auto& a : anovas) {
    json j = {{"name", a.name}, {"groups", a.groups}, {"means", a.means}, {"sizes", a.sizes}, {"note", a.note}};
    if (a.test) {
      j["test"] = {{"f", a.test->f},
                   {"df_between", a.test->df_between},
                   {"df_within", a.test->df_within},
                   {"p", a.test->p},
                   {"apa", apa_anova(*a.test)}};
    }
    anovas_json.push_back(std::move(j));
  }
  return {{"record_count", record_count}, {"tables", tables_json}, {"anovas", anovas_json}};
}

std::string AnalysisReport::to_text() const {
  std::ostringstream out;
  out << "records: " << record_count << "\n";
  for (const auto& t : tables) {
    out << "\n" << t.name;
    if (!t.provenance.empty()) out << " [" << t.provenance << "]";
    out << "\n";
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"", "yes", "no", "total", "% yes"});
    for (std::size_t r = 0; r < t.table.rows.size(); ++r) {
      const auto yes = t.table.counts[r][0], no = t.table.counts[r][1];
      const auto total = yes + no;
      cells.push_back({t.table.rows[r], std::to_string(yes), std::to_string(no), std::to_string(total),
                       total ? fmt("%.1f", 100.0 * static_cast<double>(yes) / static_cast<double>(total)) : "-"});
    }
    out << render_grid(cells);
    if (t.test) out << apa_chi_square(*t.test) << "\n";
    if (!t.note.empty()) out << "note: " << t.note << "\n";
  }
  for (const auto& a : anovas) {
    out << "\n" << a.name << "\n";
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"", "n", "mean"});
    for (std::size_t g = 0; g < a.groups.size(); ++g) {
      cells.push_back({a.groups[g], std::to_string(a.sizes[g]), fmt("%.2f", a.means[g])});
    }
    out << render_grid(cells);
    if (a.test) out << apa_anova(*a.test) << "\n";
    if (!a.note.empty()) out << "note: " << a.note << "\n";
  }
  return out.str();
}

}  // namespace mend::harness
