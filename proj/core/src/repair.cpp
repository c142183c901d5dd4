#include "mend/repair.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "mend/javasyn.hpp"
#include "mend/metrics.hpp"

namespace mend::repair {
namespace {

using javasyn::DefectKind;
using javasyn::DiagKind;
using javasyn::SemicolonSite;
using javasyn::Token;
using javasyn::TokenKind;

constexpr std::array kCapitalizable = {"if", "while", "for", "switch", "catch", "synchronized"};

struct Edit {
  std::size_t offset;
  std::size_t remove_len;
  std::string text;
};

class Repairer {
 public:
  explicit Repairer(std::string_view source) : text_(source) {}

  RuleRepairOutcome run() {
    for (int pass = 0; pass < kMaxPasses && !parses(); ++pass) {
      const std::size_t before = fixes_.size();
      terminate_literals();
      close_delimiters();
      open_delimiters();
      semicolons();
      keyword_case();
      identifier_spelling();
      if (fixes_.size() == before) break;
    }
    RuleRepairOutcome out;
    out.parse_ok_after = parses();
    out.repaired_source = std::move(text_);
    out.applied_fixes = std::move(fixes_);
    return out;
  }

 private:
  bool parses() const { return javasyn::parse(std::string_view(text_)).ok(); }

  void apply(std::string rule, const Edit& e) {
    Fix f;
    f.rule_id = std::move(rule);
    f.offset = e.offset;
    f.text = e.text;
    f.replaced = text_.substr(e.offset, e.remove_len);
    f.line = 1;
    f.col = 1;
    for (std::size_t k = 0; k < e.offset; ++k) {
      if (text_[k] == '\n') {
        ++f.line;
        f.col = 1;
      } else {
        ++f.col;
      }
    }
    text_.replace(e.offset, e.remove_len, e.text);
    fixes_.push_back(std::move(f));
  }

  // Applies non-overlapping edits right to left so offsets stay valid.
  void apply_all(const std::string& rule, std::vector<Edit> edits) {
    std::stable_sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.offset > b.offset; });
    for (const auto& e : edits) apply(rule, e);
  }

  // (1) Close each unterminated literal where the parse likes it best.
  void terminate_literals() {
    std::size_t resume = 0;
    while (true) {
      const auto stream = javasyn::tokenize(text_);
      const Token* lit = nullptr;
      for (const auto& t : stream.tokens) {
        if (t.offset >= resume && t.is_unterminated_literal()) {
          lit = &t;
          break;
        }
      }
      if (!lit) return;
      const std::size_t best_pos = javasyn::best_literal_close(text_, *lit);
      if (best_pos == std::string::npos) {
        resume = lit->end();
        continue;
      }
      const std::string quote(1, lit->error == javasyn::LexError::unterminated_string ? '"' : '\'');
      apply("terminate_literal", {best_pos, 0, quote});
      resume = best_pos + 1;
    }
  }

  // (2) Missing closers at the positions the balance checker suggests.
  void close_delimiters() {
    const auto report = javasyn::check_balance(javasyn::tokenize(text_));
    std::vector<Edit> edits;
    for (const auto& d : report.defects) {
      if (d.kind != DefectKind::missing_close || d.suggested_insert_position == std::string::npos) continue;
      std::string ins(1, d.delimiter);
      const std::size_t pos = std::min(d.suggested_insert_position, text_.size());
      if (d.delimiter == '}' && pos == text_.size() && !text_.empty() && text_.back() != '\n') ins = "\n}";
      edits.push_back({pos, 0, ins});
    }
    apply_all("close_delimiter", std::move(edits));
  }

  // (3) A lone closer gets its opener at the start of the brace-less body.
  void open_delimiters() {
    const auto report = javasyn::check_balance(javasyn::tokenize(text_));
    std::vector<Edit> edits;
    for (const auto& d : report.defects) {
      if (d.kind != DefectKind::missing_open || d.suggested_insert_position == std::string::npos) continue;
      edits.push_back({d.suggested_insert_position, 0, std::string(1, d.delimiter)});
    }
    apply_all("open_delimiter", std::move(edits));
  }

  // (4) `;` where a statement or for-header clause ends without one.
  void semicolons() {
    std::vector<Edit> edits;
    for (const auto& d : javasyn::parse(std::string_view(text_)).diagnostics) {
      if (d.kind != DiagKind::expected_semicolon || d.insert_at == std::string::npos) continue;
      if (!d.at_statement_boundary && d.site != SemicolonSite::for_header) continue;
      if (std::any_of(edits.begin(), edits.end(), [&](const Edit& e) { return e.offset == d.insert_at; })) continue;
      edits.push_back({d.insert_at, 0, ";"});
    }
    apply_all("semicolon", std::move(edits));
  }

  // (5) `If (` -> `if (` and friends.
  void keyword_case() {
    const auto stream = javasyn::tokenize(text_);
    std::vector<const Token*> toks;
    for (const auto& t : stream.tokens)
      if (t.kind != TokenKind::comment) toks.push_back(&t);
    std::vector<Edit> edits;
    for (std::size_t k = 0; k + 1 < toks.size(); ++k) {
      const Token* t = toks[k];
      if (t->kind != TokenKind::identifier || !toks[k + 1]->is_sep("(")) continue;
      if (k > 0 && toks[k - 1]->is_sep(".")) continue;
      std::string low = t->lexeme;
      for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (low == t->lexeme) continue;
      if (std::find(kCapitalizable.begin(), kCapitalizable.end(), low) == kCapitalizable.end()) continue;
      edits.push_back({t->offset, t->lexeme.size(), low});
    }
    apply_all("keyword_case", std::move(edits));
  }

  // (6) An undeclared variable that differs from exactly one declared name
  // only by case or by one character is respelled.
  void identifier_spelling() {
    const auto stream = javasyn::tokenize(text_);
    const auto declared = javasyn::declared_identifiers(stream);
    std::vector<const Token*> toks;
    for (const auto& t : stream.tokens)
      if (t.kind != TokenKind::comment) toks.push_back(&t);
    std::vector<Edit> edits;
    for (std::size_t k = 0; k < toks.size(); ++k) {
      const Token* t = toks[k];
      if (t->kind != TokenKind::identifier || t->lexeme.size() < 3) continue;
      if (!std::islower(static_cast<unsigned char>(t->lexeme[0]))) continue;
      if (std::find(declared.begin(), declared.end(), t->lexeme) != declared.end()) continue;
      if (k > 0 && toks[k - 1]->is_sep(".")) continue;
      if (k + 1 < toks.size() && (toks[k + 1]->is_sep("(") || toks[k + 1]->is_sep("."))) continue;
      const std::string* match = nullptr;
      int matches = 0;
      for (const auto& name : declared) {
        const bool close = metrics::levenshtein(name, t->lexeme) == 1 || same_ignoring_case(name, t->lexeme);
        if (close) {
          match = &name;
          ++matches;
        }
      }
      if (matches == 1) edits.push_back({t->offset, t->lexeme.size(), *match});
    }
    apply_all("identifier_spelling", std::move(edits));
  }

  static bool same_ignoring_case(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
  }

  std::string text_;
  std::vector<Fix> fixes_;
};

}  // namespace

RuleRepairOutcome repair(std::string_view source) { return Repairer(source).run(); }

std::string revert(std::string_view repaired, const std::vector<Fix>& fixes) {
  std::string text(repaired);
  for (auto it = fixes.rbegin(); it != fixes.rend(); ++it) text.replace(it->offset, it->text.size(), it->replaced);
  return text;
}

}  // namespace mend::repair
