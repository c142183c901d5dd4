#include <algorithm>
#include <array>

#include "mend/javasyn.hpp"

namespace mend::javasyn {
namespace {

constexpr std::array kStatementOnlyKeywords = {"return", "if",    "else",  "while",   "for",   "do",    "switch",
                                               "case",   "break", "continue", "try", "catch", "finally", "throw"};
constexpr std::array kControlKeywords = {"if", "while", "for", "switch", "catch", "synchronized"};
constexpr std::array kPrimitives = {"boolean", "byte", "char", "short", "int", "long", "float", "double"};
constexpr std::array kBinaryOnlyOps = {"*",  "/",  "%",  "==", "!=", "<",  ">",  "<=", ">=", "&&", "||", "&",
                                       "|",  "^",  "=",  "+=", "-=", "*=", "/=", "%=", "?",  ":",  "<<", ">>"};

template <std::size_t N>
bool in(const std::array<const char*, N>& set, std::string_view s) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

char closer_for(char open) {
  switch (open) {
    case '(': return ')';
    case '[': return ']';
    default: return '}';
  }
}

char opener_for(char close) {
  switch (close) {
    case ')': return '(';
    case ']': return '[';
    default: return '{';
  }
}

struct Open {
  char ch;
  const Token* tok;
  bool for_header;
  bool control_header;
};

bool ends_operand(const Token* t) {
  if (!t) return false;
  switch (t->kind) {
    case TokenKind::identifier:
    case TokenKind::int_literal:
    case TokenKind::float_literal:
    case TokenKind::string_literal:
    case TokenKind::char_literal:
      return true;
    case TokenKind::keyword:
      return t->lexeme == "true" || t->lexeme == "false" || t->lexeme == "null" || t->lexeme == "this";
    case TokenKind::separator:
      return t->lexeme == ")" || t->lexeme == "]";
    case TokenKind::op:
      return t->lexeme == "++" || t->lexeme == "--";
    default:
      return false;
  }
}

class BalanceChecker {
 public:
  explicit BalanceChecker(const TokenStream& stream) : stream_(stream) {
    for (const auto& t : stream.tokens) {
      if (t.kind == TokenKind::comment) continue;
      if (t.kind == TokenKind::error && !t.is_unterminated_literal()) continue;
      toks_.push_back(&t);
    }
    source_end_ = stream.trailing.size();
    if (!stream.empty()) source_end_ += stream.tokens.back().end();
  }

  BalanceReport run() {
    for (std::size_t k = 0; k < toks_.size(); ++k) step(k);
    finish();
    refine_with_structure();
    return std::move(report_);
  }

 private:
  const Token* at(std::size_t k) const { return k < toks_.size() ? toks_[k] : nullptr; }

  void missing_close(const Open& open, std::size_t insert_at) {
    BalanceDefect d;
    d.kind = DefectKind::missing_close;
    d.delimiter = closer_for(open.ch);
    d.line = open.tok->line;
    d.col = open.tok->col;
    d.suggested_insert_position = insert_at;
    report_.defects.push_back(d);
  }

  bool top_is_paren_like() const {
    return !stack_.empty() && (stack_.back().ch == '(' || stack_.back().ch == '[');
  }

  // Closes every ( / [ above the innermost { (or above a for-header paren
  // when `stop_at_for_header`), inserting right after `prev`.
  void close_paren_run(const Token* prev, bool stop_at_for_header) {
    const std::size_t insert_at = prev ? prev->end() : 0;
    while (top_is_paren_like()) {
      if (stop_at_for_header && stack_.back().for_header) break;
      missing_close(stack_.back(), insert_at);
      stack_.pop_back();
    }
  }

  void step(std::size_t k) {
    const Token* t = toks_[k];
    const Token* prev = k > 0 ? toks_[k - 1] : nullptr;

    if (t->is_unterminated_literal()) {
      BalanceDefect d;
      d.kind = DefectKind::unterminated_literal;
      d.delimiter = t->error == LexError::unterminated_string ? '"' : '\'';
      d.line = t->line;
      d.col = t->col;
      d.suggested_insert_position = t->end();
      report_.defects.push_back(d);
      return;
    }

    if (top_is_paren_like()) {
      const Open& top = stack_.back();
      if (t->is_sep(";")) {
        if (!(top.ch == '(' && top.for_header)) close_paren_run(prev, true);
      } else if (t->is_sep("{")) {
        // `new int[] {` and `x -> {` are the only braces allowed inside parens.
        const Token* prev2 = k > 1 ? toks_[k - 2] : nullptr;
        const bool array_init = prev && prev->is_sep("]") && prev2 && prev2->is_sep("[");
        if (!(array_init || (prev && prev->is_op("->")))) close_paren_run(prev, false);
      } else if (t->kind == TokenKind::keyword && in(kStatementOnlyKeywords, t->lexeme)) {
        close_paren_run(prev, false);
      } else if (top.control_header && prev && t->line > prev->line && ends_operand(prev) &&
                 !t->is_sep(")")) {
        close_paren_run(prev, false);
      }
    }

    if (t->kind != TokenKind::separator) return;
    const std::string& s = t->lexeme;
    if (s == "(") {
      open_paren(k);
    } else if (s == "[" || s == "{") {
      stack_.push_back({s[0], t, false, false});
    } else if (s == ")" || s == "]" || s == "}") {
      close(k, s[0]);
    }
  }

  void open_paren(std::size_t k) {
    const Token* t = toks_[k];
    const Token* prev = k > 0 ? toks_[k - 1] : nullptr;
    const Token* next = at(k + 1);
    const Token* next2 = at(k + 2);

    // `(` that can only be a cast: `(int x` is missing its `)` after the type.
    const bool prev_allows_cast =
        !prev || !(prev->kind == TokenKind::identifier || prev->is_sep(")") || prev->is_sep("]") ||
                   prev->is_op(">") || (prev->kind == TokenKind::keyword && in(kControlKeywords, prev->lexeme)));
    if (prev_allows_cast && next && next->kind == TokenKind::keyword && in(kPrimitives, next->lexeme) && next2 &&
        !(next2->is_sep(")") || next2->is_sep("[") || next2->is_sep(".") || next2->is_sep("..."))) {
      missing_close({'(', t, false, false}, next->end());
      return;
    }
    // `(` directly followed by `.` or a binary-only operator closes immediately.
    if (next && (next->is_sep(".") || (next->kind == TokenKind::op && in(kBinaryOnlyOps, next->lexeme)))) {
      missing_close({'(', t, false, false}, t->end());
      return;
    }
    const bool control = prev && prev->kind == TokenKind::keyword && in(kControlKeywords, prev->lexeme);
    stack_.push_back({'(', t, prev && prev->is_kw("for"), control});
  }

  void close(std::size_t k, char c) {
    const Token* t = toks_[k];
    const Token* prev = k > 0 ? toks_[k - 1] : nullptr;
    const char want = opener_for(c);
    if (stack_.empty()) {
      lone_closer(k, c);
      return;
    }
    if (stack_.back().ch == want) {
      stack_.pop_back();
      return;
    }
    auto match = std::find_if(stack_.rbegin(), stack_.rend(), [&](const Open& o) { return o.ch == want; });
    if (match == stack_.rend()) {
      BalanceDefect d;
      d.kind = DefectKind::mismatched_pair;
      d.delimiter = c;
      d.line = t->line;
      d.col = t->col;
      report_.defects.push_back(d);
      return;
    }
    const std::size_t keep = static_cast<std::size_t>(stack_.rend() - match) - 1;
    const std::size_t insert_at = prev ? prev->end() : t->offset;
    while (stack_.size() > keep + 1) {
      missing_close(stack_.back(), insert_at);
      stack_.pop_back();
    }
    stack_.pop_back();
  }

  // A closer with nothing open: suggest an opener at the start of the
  // nearest brace-less body (after a control header, `else`, `do`, `try`,
  // or a method header).
  void lone_closer(std::size_t k, char c) {
    const Token* t = toks_[k];
    BalanceDefect d;
    d.kind = DefectKind::missing_open;
    d.delimiter = opener_for(c);
    d.line = t->line;
    d.col = t->col;
    if (c == '}') d.suggested_insert_position = find_block_start(k);
    report_.defects.push_back(d);
  }

  std::size_t find_block_start(std::size_t k) const {
    int depth = 0;
    for (std::size_t j = k; j-- > 0;) {
      const Token* t = toks_[j];
      const Token* after = at(j + 1);
      const bool after_is_brace = after && after->is_sep("{");
      if (depth == 0 && !after_is_brace && j + 1 < k) {
        if (t->kind == TokenKind::keyword && (t->lexeme == "else" || t->lexeme == "do" || t->lexeme == "try"))
          return t->end();
        if (t->is_sep(")") && header_paren(j)) return t->end();
      }
      if (t->is_sep(")") || t->is_sep("]") || t->is_sep("}")) {
        ++depth;
      } else if (t->is_sep("(") || t->is_sep("[") || t->is_sep("{")) {
        if (depth == 0) break;
        --depth;
      }
    }
    return std::string::npos;
  }

  // Whether the `)` at j closes a control header or a method parameter list.
  bool header_paren(std::size_t j) const {
    int depth = 0;
    for (std::size_t i = j + 1; i-- > 0;) {
      const Token* t = toks_[i];
      if (t->is_sep(")")) ++depth;
      if (t->is_sep("(") && --depth == 0) {
        if (i == 0) return false;
        const Token* before = toks_[i - 1];
        if (before->kind == TokenKind::keyword && in(kControlKeywords, before->lexeme)) return true;
        const Token* type = i >= 2 ? toks_[i - 2] : nullptr;
        return before->kind == TokenKind::identifier && type &&
               (type->kind == TokenKind::identifier || (type->kind == TokenKind::keyword && type->lexeme != "new") ||
                type->is_sep("]") || type->is_op(">"));
      }
    }
    return false;
  }

  void finish() {
    const std::size_t after_last = toks_.empty() ? 0 : toks_.back()->end();
    while (!stack_.empty()) {
      const Open& o = stack_.back();
      missing_close(o, o.ch == '{' ? source_end_ : after_last);
      stack_.pop_back();
    }
  }

  // Braces left open at end of input are moved to where the parser found
  // structural evidence of the missing `}` (an orphan `else`, a member
  // declaration inside a method body, ...).
  void refine_with_structure() {
    std::vector<BalanceDefect*> eof_braces;
    for (auto& d : report_.defects) {
      if (d.kind == DefectKind::missing_close && d.delimiter == '}' && d.suggested_insert_position == source_end_)
        eof_braces.push_back(&d);
    }
    if (eof_braces.empty()) return;
    std::vector<std::size_t> evidence;
    for (const auto& diag : parse(stream_).diagnostics) {
      if (diag.kind == DiagKind::missing_close_brace && diag.insert_at < source_end_) evidence.push_back(diag.insert_at);
    }
    std::sort(evidence.begin(), evidence.end());
    for (std::size_t i = 0; i < eof_braces.size() && i < evidence.size(); ++i)
      eof_braces[i]->suggested_insert_position = evidence[i];
  }

  const TokenStream& stream_;
  std::vector<const Token*> toks_;
  std::vector<Open> stack_;
  std::size_t source_end_ = 0;
  BalanceReport report_;
};

}  // namespace

std::string_view to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::missing_close: return "missing_close";
    case DefectKind::missing_open: return "missing_open";
    case DefectKind::mismatched_pair: return "mismatched_pair";
    case DefectKind::unterminated_literal: return "unterminated_literal";
  }
  return "?";
}

BalanceReport check_balance(const TokenStream& tokens) { return BalanceChecker(tokens).run(); }

}  // namespace mend::javasyn
