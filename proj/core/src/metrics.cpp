#include "mend/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <stdexcept>

#include "mend/javasyn.hpp"

namespace mend::metrics {
namespace {

using javasyn::Token;
using javasyn::TokenKind;

std::vector<const Token*> significant(const javasyn::TokenStream& s) {
  std::vector<const Token*> out;
  for (const auto& t : s.tokens)
    if (t.kind != TokenKind::comment) out.push_back(&t);
  return out;
}

bool same_token(const Token* a, const Token* b) { return a->kind == b->kind && a->lexeme == b->lexeme; }

enum class EditOp { keep, sub, del, ins };

struct Step {
  EditOp op;
  std::size_t i;  // index into original (keep/sub/del)
  std::size_t j;  // index into repaired (keep/sub/ins)
};

// Full DP with backtrace from the end; prefers keep, then insertion, then
// substitution, so that insertions following a substituted token stay in the
// same run as it.
std::vector<Step> token_script(const std::vector<const Token*>& a, const std::vector<const Token*>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (same_token(a[i - 1], b[j - 1]) ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  std::vector<Step> steps;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && same_token(a[i - 1], b[j - 1]) && at(i, j) == at(i - 1, j - 1)) {
      steps.push_back({EditOp::keep, --i, --j});
    } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      steps.push_back({EditOp::ins, i, --j});
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      steps.push_back({EditOp::sub, --i, --j});
    } else {
      steps.push_back({EditOp::del, --i, j});
    }
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

bool is_insertable_delimiter(const Token* t) {
  if (t->kind != TokenKind::separator) return false;
  return t->lexeme == ";" || t->lexeme == "," || t->lexeme == "(" || t->lexeme == ")" || t->lexeme == "{" ||
         t->lexeme == "}" || t->lexeme == "[" || t->lexeme == "]";
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Run {
  std::vector<const Token*> removed;   // original side
  std::vector<const Token*> inserted;  // repaired side
};

// The removed text reappears in the inserted text with only quotes,
// delimiters and whitespace added.
bool is_literal_termination(const Run& run, std::string_view original, std::string_view repaired) {
  const bool has_literal = std::any_of(run.removed.begin(), run.removed.end(),
                                       [](const Token* t) { return t->is_unterminated_literal(); });
  if (!has_literal || run.inserted.empty()) return false;
  const std::string_view d =
      original.substr(run.removed.front()->offset, run.removed.back()->end() - run.removed.front()->offset);
  const std::string_view i =
      repaired.substr(run.inserted.front()->offset, run.inserted.back()->end() - run.inserted.front()->offset);
  std::size_t k = 0;
  bool quote_added = false;
  for (char c : i) {
    if (k < d.size() && d[k] == c) {
      ++k;
      continue;
    }
    if (c == '"' || c == '\'') {
      quote_added = true;
      continue;
    }
    if (std::string_view(";(){}[],. \t").find(c) == std::string_view::npos) return false;
  }
  return k == d.size() && quote_added;
}

bool is_token_fix(const Token* from, const Token* to, const std::vector<std::string>& declared) {
  if (from->kind == TokenKind::identifier && to->kind == TokenKind::keyword) return lower(from->lexeme) == to->lexeme;
  if (from->kind == TokenKind::identifier && to->kind == TokenKind::identifier) {
    return std::find(declared.begin(), declared.end(), to->lexeme) != declared.end() &&
           levenshtein(from->lexeme, to->lexeme) <= 2;
  }
  return false;
}

// Pairs removed tokens with inserted ones (each pair must be a token fix);
// unpaired inserted tokens must be delimiters; nothing may be dropped.
bool is_fix_run(const Run& run, const std::vector<std::string>& declared) {
  const auto& D = run.removed;
  const auto& I = run.inserted;
  // ok[i][j]: D[i..] and I[j..] can be matched.
  std::vector<std::vector<char>> ok(D.size() + 1, std::vector<char>(I.size() + 1, 0));
  ok[D.size()][I.size()] = 1;
  for (std::size_t j = I.size(); j-- > 0;) ok[D.size()][j] = ok[D.size()][j + 1] && is_insertable_delimiter(I[j]);
  for (std::size_t i = D.size(); i-- > 0;)
    for (std::size_t j = I.size(); j-- > 0;) {
      ok[i][j] = (is_token_fix(D[i], I[j], declared) && ok[i + 1][j + 1]) ||
                 (is_insertable_delimiter(I[j]) && ok[i][j + 1]);
    }
  return ok[0][0] != 0;
}

}  // namespace

std::string_view to_string(SpAuto v) {
  switch (v) {
    case SpAuto::preserved: return "preserved";
    case SpAuto::changed: return "changed";
    case SpAuto::undecidable: return "undecidable";
  }
  return "?";
}

std::string_view to_string(LpAuto v) {
  switch (v) {
    case LpAuto::syntactic_only: return "syntactic_only";
    case LpAuto::semantic_change: return "semantic_change";
    case LpAuto::undecidable: return "undecidable";
  }
  return "?";
}

SpAuto parse_sp_auto(std::string_view s) {
  for (auto v : {SpAuto::preserved, SpAuto::changed, SpAuto::undecidable})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown sp_auto value: " + std::string(s));
}

LpAuto parse_lp_auto(std::string_view s) {
  for (auto v : {LpAuto::syntactic_only, LpAuto::semantic_change, LpAuto::undecidable})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown lp_auto value: " + std::string(s));
}

std::string_view to_string(DiffSpan::Op op) {
  switch (op) {
    case DiffSpan::Op::equal: return "equal";
    case DiffSpan::Op::insert: return "insert";
    case DiffSpan::Op::remove: return "remove";
  }
  return "?";
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  while (!a.empty() && !b.empty() && a.front() == b.front()) {
    a.remove_prefix(1);
    b.remove_prefix(1);
  }
  while (!a.empty() && !b.empty() && a.back() == b.back()) {
    a.remove_suffix(1);
    b.remove_suffix(1);
  }
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double normalized_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

std::size_t token_edit_count(std::string_view a, std::string_view b) {
  const auto ta = javasyn::tokenize(a);
  const auto tb = javasyn::tokenize(b);
  std::size_t count = 0;
  for (const auto& s : token_script(significant(ta), significant(tb)))
    if (s.op != EditOp::keep) ++count;
  return count;
}

std::vector<DiffSpan> char_diff(std::string_view a, std::string_view b) {
  std::size_t pre = 0;
  while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) ++pre;
  std::size_t suf = 0;
  while (suf < a.size() - pre && suf < b.size() - pre && a[a.size() - 1 - suf] == b[b.size() - 1 - suf]) ++suf;
  const std::string_view ma = a.substr(pre, a.size() - pre - suf);
  const std::string_view mb = b.substr(pre, b.size() - pre - suf);

  std::vector<DiffSpan> spans;
  auto push = [&](DiffSpan::Op op, std::string_view text) {
    if (text.empty()) return;
    if (!spans.empty() && spans.back().op == op) {
      spans.back().text += text;
    } else {
      spans.push_back({op, std::string(text)});
    }
  };
  push(DiffSpan::Op::equal, a.substr(0, pre));

  const std::size_t n = ma.size(), m = mb.size();
  constexpr std::size_t kMaxCells = 16u << 20;
  if (n * m > kMaxCells) {
    push(DiffSpan::Op::remove, ma);
    push(DiffSpan::Op::insert, mb);
  } else {
    // Insert/delete-only alignment (LCS), so every span is a pure op.
    std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return lcs[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;)
      for (std::size_t j = m; j-- > 0;)
        at(i, j) = ma[i] == mb[j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
      if (i < n && j < m && ma[i] == mb[j]) {
        push(DiffSpan::Op::equal, ma.substr(i++, 1));
        ++j;
      } else if (j < m && (i == n || at(i, j + 1) >= at(i + 1, j))) {
        push(DiffSpan::Op::insert, mb.substr(j++, 1));
      } else {
        push(DiffSpan::Op::remove, ma.substr(i++, 1));
      }
    }
  }
  push(DiffSpan::Op::equal, a.substr(a.size() - suf));
  return spans;
}

LpAuto classify_edits(std::string_view original, std::string_view repaired) {
  const auto to = javasyn::tokenize(original);
  const auto tr = javasyn::tokenize(repaired);
  const auto a = significant(to);
  const auto b = significant(tr);
  if (std::any_of(b.begin(), b.end(), [](const Token* t) { return t->kind == TokenKind::error; }))
    return LpAuto::undecidable;

  const auto declared = javasyn::declared_identifiers(tr);
  std::vector<Run> runs;
  bool in_run = false;
  for (const auto& s : token_script(a, b)) {
    if (s.op == EditOp::keep) {
      in_run = false;
      continue;
    }
    if (!in_run) runs.emplace_back();
    in_run = true;
    if (s.op == EditOp::sub || s.op == EditOp::del) runs.back().removed.push_back(a[s.i]);
    if (s.op == EditOp::sub || s.op == EditOp::ins) runs.back().inserted.push_back(b[s.j]);
  }
  for (const auto& run : runs) {
    if (is_fix_run(run, declared)) continue;
    if (is_literal_termination(run, original, repaired)) continue;
    return LpAuto::semantic_change;
  }
  return LpAuto::syntactic_only;
}

SpAuto sp_check(std::string_view original, std::string_view repaired) {
  try {
    const auto so = javasyn::extract_skeleton(original);
    const auto sr = javasyn::extract_skeleton(repaired);
    return so == sr ? SpAuto::preserved : SpAuto::changed;
  } catch (const javasyn::SkeletonError&) {
    return SpAuto::undecidable;
  }
}

RepairMetrics compute(std::string_view original, std::string_view repaired, bool compiled) {
  RepairMetrics m;
  m.raw_levenshtein = levenshtein(original, repaired);
  m.normalized_levenshtein = normalized_levenshtein(original, repaired);
  m.token_edit_count = token_edit_count(original, repaired);
  m.sp_auto = sp_check(original, repaired);
  m.lp_auto = classify_edits(original, repaired);
  m.compiled = compiled;
  return m;
}

}  // namespace mend::metrics
