#include <algorithm>
#include <array>
#include <tuple>

#include "mend/javasyn.hpp"

namespace mend::javasyn {
namespace {

using Nodes = std::vector<ControlFlowSkeleton>;

constexpr std::array kPrimitiveTypes = {"boolean", "byte", "char", "short", "int", "long", "float", "double", "void"};
constexpr std::array kModifiers = {"public",    "private",  "protected", "static",   "final",   "abstract",
                                   "synchronized", "native", "transient", "volatile", "strictfp", "default"};
constexpr std::array kBinaryOps = {"=",  "+=", "-=", "*=", "/=", "%=",  "&=",  "|=",  "^=",  "<<=", ">>=", ">>>=",
                                   "||", "&&", "|",  "^",  "&",  "==",  "!=",  "<",   ">",   "<=",  ">=",  "<<",
                                   ">>", ">>>", "+", "-",  "*",  "/",   "%"};

template <std::size_t N>
bool contains(const std::array<const char*, N>& set, std::string_view s) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

enum class BlockKind { plain, method_body, if_then, else_body, loop, do_body, try_body, catch_body, lambda };

ControlFlowSkeleton node(NodeKind kind, Nodes children = {}) {
  ControlFlowSkeleton n;
  n.node = kind;
  n.children = std::move(children);
  return n;
}

class Parser {
 public:
  Parser(const TokenStream& stream, std::size_t source_end) : source_end_(source_end) {
    for (const auto& t : stream.tokens) {
      if (t.kind == TokenKind::comment) continue;
      if (t.kind == TokenKind::error) {
        ParseDiagnostic d;
        d.kind = DiagKind::lexical;
        d.line = t.line;
        d.col = t.col;
        d.message = std::string(to_string(t.error));
        diags_.push_back(std::move(d));
        // Unterminated literals still behave as operands; other errors vanish.
        if (!t.is_unterminated_literal()) continue;
      }
      toks_.push_back(&t);
    }
  }

  ParseResult run() {
    std::vector<Nodes> units;  // each entry: nodes contributed by one top-level construct
    bool only_methods = true;
    std::size_t method_count = 0;
    while (!at_end()) {
      const std::size_t start = i_;
      if (kw("package") || kw("import")) {
        skip_past_semicolon();
        continue;
      }
      if (sep("}")) {
        error_here(DiagKind::unexpected_token, "unexpected '}'");
        ++i_;
        continue;
      }
      if (sep(";")) {
        ++i_;
        continue;
      }
      if (is_class_decl(i_)) {
        Nodes methods;
        parse_class(methods);
        method_count += methods.size();
        for (auto& m : methods) units.push_back(Nodes{std::move(m)});
      } else if (is_method_decl(i_)) {
        units.push_back(Nodes{parse_method()});
        ++method_count;
      } else {
        only_methods = false;
        units.push_back(parse_statement());
      }
      if (i_ == start) {
        error_here(DiagKind::unexpected_token, "unexpected token");
        ++i_;
      }
    }

    ParseResult result;
    if (only_methods && method_count == 1 && units.size() == 1) {
      result.skeleton = std::move(units.front().front());
    } else {
      result.skeleton = node(NodeKind::METHOD);
      for (auto& u : units)
        for (auto& n : u) result.skeleton.children.push_back(std::move(n));
    }
    std::stable_sort(diags_.begin(), diags_.end(), [](const ParseDiagnostic& a, const ParseDiagnostic& b) {
      return std::tie(a.line, a.col) < std::tie(b.line, b.col);
    });
    result.diagnostics = std::move(diags_);
    return result;
  }

 private:
  // -- token access ---------------------------------------------------------

  bool at_end(std::size_t k = 0) const { return i_ + k >= toks_.size(); }
  const Token* tok(std::size_t k = 0) const { return at_end(k) ? nullptr : toks_[i_ + k]; }
  const Token* tok_at(std::size_t pos) const { return pos < toks_.size() ? toks_[pos] : nullptr; }
  bool sep(std::string_view s, std::size_t k = 0) const { return tok(k) && tok(k)->is_sep(s); }
  bool op(std::string_view s, std::size_t k = 0) const { return tok(k) && tok(k)->is_op(s); }
  bool kw(std::string_view s, std::size_t k = 0) const { return tok(k) && tok(k)->is_kw(s); }
  bool ident(std::size_t k = 0) const { return tok(k) && tok(k)->kind == TokenKind::identifier; }
  bool sep_at(std::size_t pos, std::string_view s) const { return tok_at(pos) && tok_at(pos)->is_sep(s); }
  bool op_at(std::size_t pos, std::string_view s) const { return tok_at(pos) && tok_at(pos)->is_op(s); }
  bool kw_at(std::size_t pos, std::string_view s) const { return tok_at(pos) && tok_at(pos)->is_kw(s); }

  std::size_t prev_end() const { return i_ == 0 ? 0 : toks_[i_ - 1]->end(); }

  // -- diagnostics ----------------------------------------------------------

  void error_here(DiagKind kind, std::string message) {
    ParseDiagnostic d;
    d.kind = kind;
    if (const Token* t = tok()) {
      d.line = t->line;
      d.col = t->col;
    } else {
      set_eof_position(d);
    }
    d.message = std::move(message);
    diags_.push_back(std::move(d));
  }

  void set_eof_position(ParseDiagnostic& d) const {
    if (toks_.empty()) {
      d.line = 1;
      d.col = 1;
    } else {
      const Token* last = toks_.back();
      d.line = last->line;
      d.col = last->col + static_cast<int>(last->lexeme.size());
    }
  }

  // Reports that `text` is required before the current token; insertion goes
  // right after the previous token.
  void expected(std::string_view text) {
    ParseDiagnostic d;
    d.kind = DiagKind::expected_token;
    d.expected = std::string(text);
    d.insert_at = prev_end();
    if (i_ > 0) {
      const Token* p = toks_[i_ - 1];
      d.line = p->line;
      d.col = p->col + static_cast<int>(p->lexeme.size());
    } else {
      d.line = 1;
      d.col = 1;
    }
    d.message = "'" + d.expected + "' expected";
    diags_.push_back(std::move(d));
  }

  bool expect_sep(std::string_view s) {
    if (sep(s)) {
      ++i_;
      return true;
    }
    expected(s);
    return false;
  }

  void expect_semicolon(SemicolonSite site) {
    if (sep(";")) {
      ++i_;
      return;
    }
    expected(";");
    auto& d = diags_.back();
    d.kind = DiagKind::expected_semicolon;
    d.site = site;
    const Token* next = tok();
    const Token* prev = i_ > 0 ? toks_[i_ - 1] : nullptr;
    d.at_statement_boundary = next == nullptr || next->is_sep("}") || (prev && next->line > prev->line);
  }

  void implicit_close(std::size_t insert_at) {
    ParseDiagnostic d;
    d.kind = DiagKind::missing_close_brace;
    d.expected = "}";
    d.insert_at = insert_at;
    if (const Token* t = tok()) {
      d.line = t->line;
      d.col = t->col;
    } else {
      set_eof_position(d);
    }
    d.message = "'}' expected";
    diags_.push_back(std::move(d));
  }

  // -- recovery -------------------------------------------------------------

  // Skips to just past the next `;` at nesting depth 0, or to a `}` that
  // would close the enclosing block.
  void sync_statement() {
    int depth = 0;
    while (!at_end()) {
      const Token* t = tok();
      if (t->is_sep("(") || t->is_sep("[") || t->is_sep("{")) {
        ++depth;
      } else if (t->is_sep(")") || t->is_sep("]") || t->is_sep("}")) {
        if (depth == 0) {
          if (t->is_sep("}")) return;
        } else {
          --depth;
        }
      } else if (t->is_sep(";") && depth == 0) {
        ++i_;
        return;
      }
      ++i_;
    }
  }

  void skip_past_semicolon() {
    while (!at_end() && !sep(";")) ++i_;
    if (!at_end()) ++i_;
  }

  // Skips a balanced group starting at the current opener.
  void skip_group() {
    int depth = 0;
    while (!at_end()) {
      const Token* t = tok();
      if (t->is_sep("(") || t->is_sep("[") || t->is_sep("{")) ++depth;
      if (t->is_sep(")") || t->is_sep("]") || t->is_sep("}")) --depth;
      ++i_;
      if (depth <= 0) return;
    }
  }

  // -- type scanning (pure lookahead) ---------------------------------------

  std::size_t scan_type_args(std::size_t pos) const {
    if (!op_at(pos, "<")) return std::string::npos;
    int depth = 0;
    while (pos < toks_.size()) {
      const Token* t = toks_[pos];
      if (t->is_op("<")) {
        depth += 1;
      } else if (t->is_op(">")) {
        depth -= 1;
      } else if (t->is_op(">>")) {
        depth -= 2;
      } else if (t->is_op(">>>")) {
        depth -= 3;
      } else if (!(t->kind == TokenKind::identifier || t->is_sep(",") || t->is_op("?") || t->is_sep(".") ||
                   t->is_sep("[") || t->is_sep("]") || t->is_op("&") || t->is_kw("extends") ||
                   t->is_kw("super") || (t->kind == TokenKind::keyword && contains(kPrimitiveTypes, t->lexeme)))) {
        return std::string::npos;
      }
      ++pos;
      if (depth < 0) return std::string::npos;
      if (depth == 0) return pos;
    }
    return std::string::npos;
  }

  // Returns the position after a type starting at `pos`, or npos.
  std::size_t scan_type(std::size_t pos) const {
    const Token* t = tok_at(pos);
    if (!t) return std::string::npos;
    if (t->kind == TokenKind::keyword && contains(kPrimitiveTypes, t->lexeme)) {
      ++pos;
    } else if (t->kind == TokenKind::identifier) {
      ++pos;
      if (std::size_t after = scan_type_args(pos); after != std::string::npos) pos = after;
      while (sep_at(pos, ".") && tok_at(pos + 1) && tok_at(pos + 1)->kind == TokenKind::identifier) {
        pos += 2;
        if (std::size_t after = scan_type_args(pos); after != std::string::npos) pos = after;
      }
    } else {
      return std::string::npos;
    }
    while (sep_at(pos, "[") && sep_at(pos + 1, "]")) pos += 2;
    return pos;
  }

  std::size_t skip_modifiers(std::size_t pos) const {
    while (const Token* t = tok_at(pos)) {
      if (t->kind == TokenKind::keyword && contains(kModifiers, t->lexeme)) {
        ++pos;
      } else if (t->is_sep("@") && tok_at(pos + 1) && tok_at(pos + 1)->kind == TokenKind::identifier &&
                 !kw_at(pos + 1, "interface")) {
        pos += 2;
        while (sep_at(pos, ".") && tok_at(pos + 1)) pos += 2;
        if (sep_at(pos, "(")) pos = skip_group_at(pos);
      } else {
        break;
      }
    }
    return pos;
  }

  std::size_t skip_group_at(std::size_t pos) const {
    int depth = 0;
    while (pos < toks_.size()) {
      const Token* t = toks_[pos];
      if (t->is_sep("(") || t->is_sep("[") || t->is_sep("{")) ++depth;
      if (t->is_sep(")") || t->is_sep("]") || t->is_sep("}")) --depth;
      ++pos;
      if (depth <= 0) break;
    }
    return pos;
  }

  bool is_class_decl(std::size_t pos) const {
    pos = skip_modifiers(pos);
    return kw_at(pos, "class") || kw_at(pos, "interface") || kw_at(pos, "enum") ||
           (sep_at(pos, "@") && kw_at(pos + 1, "interface"));
  }

  bool is_method_decl(std::size_t pos) const {
    pos = skip_modifiers(pos);
    if (std::size_t after = scan_type_args(pos); after != std::string::npos) pos = after;
    const std::size_t after_type = scan_type(pos);
    if (after_type == std::string::npos) return false;
    const Token* name = tok_at(after_type);
    return name && name->kind == TokenKind::identifier && sep_at(after_type + 1, "(");
  }

  bool is_local_var_decl(std::size_t pos) const {
    while (kw_at(pos, "final") || sep_at(pos, "@")) {
      if (kw_at(pos, "final")) {
        ++pos;
      } else {
        pos += 2;
        if (sep_at(pos, "(")) pos = skip_group_at(pos);
      }
    }
    const std::size_t after_type = scan_type(pos);
    if (after_type == std::string::npos) return false;
    const Token* name = tok_at(after_type);
    return name && name->kind == TokenKind::identifier;
  }

  // At `while`: its condition is directly followed by `;`, as in the tail
  // of a do statement.
  bool is_do_while_tail() const {
    if (!kw("while") || !sep("(", 1)) return false;
    int depth = 0;
    for (std::size_t j = i_ + 1; j < toks_.size(); ++j) {
      if (toks_[j]->is_sep("(")) ++depth;
      if (toks_[j]->is_sep(")") && --depth == 0) return j + 1 < toks_.size() && toks_[j + 1]->is_sep(";");
      if (toks_[j]->is_sep("{") || toks_[j]->is_sep("}")) return false;
    }
    return false;
  }

  bool is_member_start_in_body() const {
    const Token* t = tok();
    if (!t || t->kind != TokenKind::keyword) return false;
    return t->lexeme == "public" || t->lexeme == "private" || t->lexeme == "protected" || t->lexeme == "static";
  }

  // -- declarations ---------------------------------------------------------

  bool parse_type() {
    const std::size_t after = scan_type(i_);
    if (after == std::string::npos) {
      error_here(DiagKind::unexpected_token, "type expected");
      return false;
    }
    i_ = after;
    return true;
  }

  void parse_class(Nodes& methods) {
    i_ = skip_modifiers(i_);
    const bool is_enum = kw("enum");
    if (sep("@")) ++i_;
    ++i_;  // class / interface / enum
    std::string name;
    if (ident()) {
      name = tok()->lexeme;
      ++i_;
    } else {
      error_here(DiagKind::unexpected_token, "class name expected");
    }
    while (!at_end() && !sep("{") && !sep(";") && !sep("}")) ++i_;
    if (!sep("{")) {
      expected("{");
      return;
    }
    ++i_;
    if (is_enum) parse_enum_constants();
    parse_class_body(name, methods);
  }

  void parse_enum_constants() {
    while (!at_end() && !sep(";") && !sep("}")) {
      if (sep("(") || sep("{")) {
        skip_group();
      } else {
        ++i_;
      }
    }
    if (sep(";")) ++i_;
  }

  // Current token is the first member; consumes the closing brace.
  void parse_class_body(const std::string& class_name, Nodes& methods) {
    while (true) {
      if (at_end()) {
        implicit_close(source_end_);
        return;
      }
      if (sep("}")) {
        ++i_;
        return;
      }
      if (sep(";")) {
        ++i_;
        continue;
      }
      const std::size_t start = i_;
      parse_member(class_name, methods);
      if (i_ == start) {
        error_here(DiagKind::unexpected_token, "unexpected token in class body");
        ++i_;
      }
    }
  }

  void parse_member(const std::string& class_name, Nodes& methods) {
    if (is_class_decl(i_)) {
      parse_class(methods);
      return;
    }
    const std::size_t after_mods = skip_modifiers(i_);
    if (sep_at(after_mods, "{")) {
      i_ = after_mods;
      parse_block(BlockKind::plain);
      return;
    }
    if (is_method_decl(i_)) {
      methods.push_back(parse_method());
      return;
    }
    std::size_t pos = after_mods;
    if (std::size_t after = scan_type_args(pos); after != std::string::npos) pos = after;
    if (tok_at(pos) && tok_at(pos)->kind == TokenKind::identifier && tok_at(pos)->lexeme == class_name &&
        sep_at(pos + 1, "(")) {
      i_ = pos + 1;
      methods.push_back(parse_method_rest());
      return;
    }
    i_ = after_mods;
    if (is_local_var_decl(i_)) {
      parse_type();
      parse_declarators();
      expect_semicolon(SemicolonSite::member);
      return;
    }
    error_here(DiagKind::unexpected_token, "member declaration expected");
    sync_statement();
  }

  ControlFlowSkeleton parse_method() {
    i_ = skip_modifiers(i_);
    if (const std::size_t after = scan_type_args(i_); after != std::string::npos) i_ = after;
    parse_type();
    ++i_;  // name
    return parse_method_rest();
  }

  // At the `(` of the parameter list.
  ControlFlowSkeleton parse_method_rest() {
    ++i_;
    parse_parameters();
    while (sep("[") && sep("]", 1)) i_ += 2;
    if (kw("throws")) {
      ++i_;
      do {
        if (!parse_type()) break;
      } while (sep(",") && (++i_, true));
    }
    ControlFlowSkeleton method = node(NodeKind::METHOD);
    if (sep(";")) {
      ++i_;
      return method;
    }
    if (!sep("{")) {
      expected("{");
      sync_statement();
      return method;
    }
    ++method_depth_;
    ControlFlowSkeleton body = parse_block(BlockKind::method_body);
    --method_depth_;
    method.children = std::move(body.children);
    return method;
  }

  // After `(`; consumes through `)`.
  void parse_parameters() {
    if (sep(")")) {
      ++i_;
      return;
    }
    while (!at_end()) {
      i_ = skip_modifiers(i_);
      if (!parse_type()) {
        skip_to_paren_close();
        return;
      }
      if (sep("...")) ++i_;
      if (ident()) {
        ++i_;
      } else {
        error_here(DiagKind::unexpected_token, "parameter name expected");
        skip_to_paren_close();
        return;
      }
      while (sep("[") && sep("]", 1)) i_ += 2;
      if (sep(",")) {
        ++i_;
        continue;
      }
      if (sep(")")) {
        ++i_;
        return;
      }
      expected(")");
      return;
    }
    expected(")");
  }

  void skip_to_paren_close() {
    int depth = 0;
    while (!at_end()) {
      if (sep("(")) ++depth;
      if (sep(")")) {
        if (depth == 0) {
          ++i_;
          return;
        }
        --depth;
      }
      if (sep("{") || sep(";")) return;
      ++i_;
    }
  }

  // Declarators after the type: name [dims] [= init] {, ...}
  bool parse_declarators() {
    while (true) {
      if (!ident()) {
        error_here(DiagKind::unexpected_token, "variable name expected");
        sync_statement();
        return false;
      }
      ++i_;
      while (sep("[") && sep("]", 1)) i_ += 2;
      if (op("=")) {
        ++i_;
        const bool ok = sep("{") ? parse_array_initializer() : parse_expression();
        if (!ok) {
          sync_statement();
          return false;
        }
      }
      if (!sep(",")) return true;
      ++i_;
    }
  }

  bool parse_array_initializer() {
    ++i_;  // {
    while (!at_end() && !sep("}")) {
      const bool ok = sep("{") ? parse_array_initializer() : parse_expression();
      if (!ok) return false;
      if (sep(",")) {
        ++i_;
        continue;
      }
      break;
    }
    expect_sep("}");
    return true;
  }

  // -- statements -----------------------------------------------------------

  // At `{`. Returns a BLOCK node; consumes the closing brace when present.
  ControlFlowSkeleton parse_block(BlockKind kind) {
    ++i_;
    ControlFlowSkeleton block = node(NodeKind::BLOCK);
    while (true) {
      if (at_end()) {
        implicit_close(source_end_);
        return block;
      }
      if (sep("}")) {
        ++i_;
        return block;
      }
      // Structural evidence that this block was never closed.
      if ((kind == BlockKind::if_then && kw("else")) ||
          ((kind == BlockKind::try_body || kind == BlockKind::catch_body) && (kw("catch") || kw("finally"))) ||
          (kind == BlockKind::do_body && is_do_while_tail()) ||
          (method_depth_ > 0 && is_member_start_in_body())) {
        implicit_close(tok()->offset);
        return block;
      }
      const std::size_t start = i_;
      for (auto& n : parse_statement()) block.children.push_back(std::move(n));
      if (i_ == start) {
        error_here(DiagKind::unexpected_token, "unexpected '" + tok()->lexeme + "'");
        ++i_;
      }
    }
  }

  Nodes parse_body(BlockKind kind) {
    if (sep("{")) return Nodes{parse_block(kind)};
    if (at_end()) {
      error_here(DiagKind::unexpected_token, "statement expected");
      return {};
    }
    return parse_statement();
  }

  bool parse_paren_condition() {
    if (!sep("(")) {
      expected("(");
      return false;
    }
    ++i_;
    if (!parse_expression()) {
      sync_to_paren_close();
      return false;
    }
    expect_sep(")");
    return true;
  }

  void sync_to_paren_close() {
    int depth = 0;
    while (!at_end()) {
      if (sep("(")) ++depth;
      if (sep(")")) {
        if (depth == 0) {
          ++i_;
          return;
        }
        --depth;
      }
      if (sep("{") || sep(";") || sep("}")) return;
      ++i_;
    }
  }

  Nodes parse_statement() {
    const Token* t = tok();
    if (!t) return {};

    if (t->is_sep("{")) return Nodes{parse_block(BlockKind::plain)};
    if (t->is_sep(";")) {
      ++i_;
      return {};
    }
    if (t->kind == TokenKind::keyword) {
      const std::string& k = t->lexeme;
      if (k == "if") return parse_if();
      if (k == "while") {
        ++i_;
        parse_paren_condition();
        return Nodes{node(NodeKind::WHILE, parse_body(BlockKind::loop))};
      }
      if (k == "do") {
        ++i_;
        Nodes body = parse_body(BlockKind::do_body);
        if (kw("while")) {
          ++i_;
          parse_paren_condition();
          expect_semicolon(SemicolonSite::do_while);
        } else {
          expected("while");
        }
        return Nodes{node(NodeKind::DO, std::move(body))};
      }
      if (k == "for") return parse_for();
      if (k == "switch") return parse_switch();
      if (k == "return") {
        ++i_;
        if (!sep(";") && !sep("}") && !at_end() && !parse_expression()) {
          sync_statement();
          return Nodes{node(NodeKind::RETURN)};
        }
        expect_semicolon(SemicolonSite::statement);
        return Nodes{node(NodeKind::RETURN)};
      }
      if (k == "break" || k == "continue") {
        const Token* kwtok = t;
        ++i_;
        if (ident() && tok()->line == kwtok->line) ++i_;
        expect_semicolon(SemicolonSite::statement);
        return Nodes{node(k == "break" ? NodeKind::BREAK : NodeKind::CONTINUE)};
      }
      if (k == "throw") {
        ++i_;
        if (!parse_expression()) {
          sync_statement();
          return {};
        }
        expect_semicolon(SemicolonSite::statement);
        return {};
      }
      if (k == "try") return parse_try();
      if (k == "else") {
        error_here(DiagKind::unexpected_token, "'else' without 'if'");
        ++i_;
        return Nodes{node(NodeKind::ELSE, parse_body(BlockKind::else_body))};
      }
      if (k == "case" || k == "default") {
        error_here(DiagKind::unexpected_token, "'" + k + "' outside switch");
        while (!at_end() && !op(":") && !sep(";") && !sep("}")) ++i_;
        if (op(":")) ++i_;
        return {};
      }
      if (k == "catch" || k == "finally") {
        error_here(DiagKind::unexpected_token, "'" + k + "' without 'try'");
        ++i_;
        if (sep("(")) skip_group();
        if (sep("{")) parse_block(BlockKind::catch_body);
        return {};
      }
      if (k == "synchronized" && sep("(", 1)) {
        ++i_;
        parse_paren_condition();
        return parse_body(BlockKind::plain);
      }
      if (k == "assert") {
        ++i_;
        if (!parse_expression()) {
          sync_statement();
          return {};
        }
        if (op(":")) {
          ++i_;
          if (!parse_expression()) {
            sync_statement();
            return {};
          }
        }
        expect_semicolon(SemicolonSite::statement);
        return {};
      }
      if (is_class_decl(i_)) {
        Nodes discarded;
        parse_class(discarded);
        return {};
      }
    }
    if (t->kind == TokenKind::identifier && op(":", 1)) {  // label
      i_ += 2;
      return parse_statement();
    }
    if (is_local_var_decl(i_)) {
      i_ = skip_modifiers(i_);
      parse_type();
      if (parse_declarators()) expect_semicolon(SemicolonSite::statement);
      return {};
    }
    if (!parse_expression()) {
      sync_statement();
      return {};
    }
    expect_semicolon(SemicolonSite::statement);
    return {};
  }

  Nodes parse_if() {
    ++i_;
    parse_paren_condition();
    Nodes out;
    out.push_back(node(NodeKind::IF, parse_body(BlockKind::if_then)));
    if (kw("else")) {
      ++i_;
      out.push_back(node(NodeKind::ELSE, parse_body(BlockKind::else_body)));
    }
    return out;
  }

  bool is_for_each_header() const {
    std::size_t pos = i_;
    while (kw_at(pos, "final")) ++pos;
    const std::size_t after_type = scan_type(pos);
    if (after_type == std::string::npos) return false;
    const Token* name = tok_at(after_type);
    return name && name->kind == TokenKind::identifier && op_at(after_type + 1, ":");
  }

  Nodes parse_for() {
    ++i_;
    if (!expect_sep("(")) {
      sync_statement();
      return Nodes{node(NodeKind::FOR)};
    }
    bool header_ok = true;
    if (is_for_each_header()) {
      while (kw("final")) ++i_;
      parse_type();
      i_ += 2;  // name and ':'
      header_ok = parse_expression();
    } else {
      if (!sep(";")) {
        if (is_local_var_decl(i_)) {
          while (kw("final")) ++i_;
          parse_type();
          header_ok = parse_declarators();
        } else {
          header_ok = parse_expression_list();
        }
      }
      if (header_ok) {
        expect_semicolon(SemicolonSite::for_header);
        if (!sep(";")) header_ok = parse_expression();
        if (header_ok) expect_semicolon(SemicolonSite::for_header);
        if (header_ok && !sep(")")) header_ok = parse_expression_list();
      }
    }
    if (header_ok) {
      expect_sep(")");
    } else {
      sync_to_paren_close();
    }
    return Nodes{node(NodeKind::FOR, parse_body(BlockKind::loop))};
  }

  bool parse_expression_list() {
    while (true) {
      if (!parse_expression()) return false;
      if (!sep(",")) return true;
      ++i_;
    }
  }

  Nodes parse_switch() {
    ++i_;
    parse_paren_condition();
    ControlFlowSkeleton sw = node(NodeKind::SWITCH);
    if (!sep("{")) {
      expected("{");
      return Nodes{std::move(sw)};
    }
    ++i_;
    while (true) {
      if (at_end()) {
        implicit_close(source_end_);
        break;
      }
      if (sep("}")) {
        ++i_;
        break;
      }
      if (method_depth_ > 0 && is_member_start_in_body()) {
        implicit_close(tok()->offset);
        break;
      }
      if (kw("case") || kw("default")) {
        sw.children.push_back(parse_case());
        continue;
      }
      error_here(DiagKind::unexpected_token, "'case' or 'default' expected");
      const std::size_t start = i_;
      parse_statement();
      if (i_ == start) ++i_;
    }
    return Nodes{std::move(sw)};
  }

  ControlFlowSkeleton parse_case() {
    ControlFlowSkeleton c = node(NodeKind::CASE);
    const bool is_default = kw("default");
    ++i_;
    if (!is_default) {
      if (!parse_expression_list()) {
        while (!at_end() && !op(":") && !op("->") && !sep("}")) ++i_;
      }
    }
    if (op("->")) {
      ++i_;
      if (sep("{")) {
        c.children.push_back(parse_block(BlockKind::plain));
      } else if (kw("throw")) {
        parse_statement();
      } else {
        if (!parse_expression()) {
          sync_statement();
        } else {
          expect_semicolon(SemicolonSite::statement);
        }
      }
      return c;
    }
    if (op(":")) {
      ++i_;
    } else {
      expected(":");
    }
    while (!at_end() && !sep("}") && !kw("case") && !kw("default")) {
      if (method_depth_ > 0 && is_member_start_in_body()) break;
      const std::size_t start = i_;
      for (auto& n : parse_statement()) c.children.push_back(std::move(n));
      if (i_ == start) {
        error_here(DiagKind::unexpected_token, "unexpected '" + tok()->lexeme + "'");
        ++i_;
      }
    }
    return c;
  }

  Nodes parse_try() {
    ++i_;
    bool has_resources = false;
    if (sep("(")) {
      has_resources = true;
      skip_group();
    }
    Nodes out;
    if (!sep("{")) {
      expected("{");
      sync_statement();
      return out;
    }
    out.push_back(node(NodeKind::TRY, Nodes{parse_block(BlockKind::try_body)}));
    bool handled = has_resources;
    while (kw("catch")) {
      handled = true;
      ++i_;
      if (expect_sep("(")) {
        i_ = skip_modifiers(i_);
        parse_type();
        while (op("|")) {
          ++i_;
          parse_type();
        }
        if (ident()) ++i_;
        expect_sep(")");
      }
      if (sep("{")) {
        out.push_back(node(NodeKind::CATCH, Nodes{parse_block(BlockKind::catch_body)}));
      } else {
        expected("{");
        out.push_back(node(NodeKind::CATCH));
      }
    }
    if (kw("finally")) {
      handled = true;
      ++i_;
      if (sep("{")) {
        out.push_back(parse_block(BlockKind::plain));
      } else {
        expected("{");
      }
    }
    if (!handled) expected("catch");
    return out;
  }

  // -- expressions ----------------------------------------------------------

  bool is_binary_op(const Token* t) const {
    return t && t->kind == TokenKind::op && contains(kBinaryOps, t->lexeme);
  }

  bool parse_expression() {
    if (!parse_unary()) return false;
    while (const Token* t = tok()) {
      if (t->is_op("?")) {
        ++i_;
        if (!parse_expression()) return false;
        if (!op(":")) {
          expected(":");
          return false;
        }
        ++i_;
        if (!parse_unary()) return false;
        continue;
      }
      if (t->is_op("->")) {
        ++i_;
        if (!parse_lambda_body()) return false;
        continue;
      }
      if (t->is_kw("instanceof")) {
        ++i_;
        if (kw("final")) ++i_;
        if (!parse_type()) return false;
        if (ident()) ++i_;
        continue;
      }
      if (is_binary_op(t)) {
        ++i_;
        if (!parse_unary()) return false;
        continue;
      }
      break;
    }
    return true;
  }

  bool parse_lambda_body() {
    if (sep("{")) {
      const int saved = method_depth_;
      method_depth_ = 0;
      parse_block(BlockKind::lambda);
      method_depth_ = saved;
      return true;
    }
    return parse_expression();
  }

  bool starts_operand(const Token* t) const {
    if (!t) return false;
    switch (t->kind) {
      case TokenKind::identifier:
      case TokenKind::int_literal:
      case TokenKind::float_literal:
      case TokenKind::string_literal:
      case TokenKind::char_literal:
      case TokenKind::error:
        return true;
      case TokenKind::keyword:
        return t->lexeme == "this" || t->lexeme == "new" || t->lexeme == "super" || t->lexeme == "true" ||
               t->lexeme == "false" || t->lexeme == "null";
      case TokenKind::op:
        return t->lexeme == "!" || t->lexeme == "~";
      case TokenKind::separator:
        return t->lexeme == "(";
      default:
        return false;
    }
  }

  // `(` at i_: cast if it encloses a type and is followed by an operand.
  std::size_t cast_end() const {
    const Token* first = tok(1);
    if (!first) return std::string::npos;
    const std::size_t after_type = scan_type(i_ + 1);
    if (after_type == std::string::npos || !sep_at(after_type, ")")) return std::string::npos;
    if (first->kind == TokenKind::keyword) return after_type + 1;  // primitive cast
    const Token* next = tok_at(after_type + 1);
    if (starts_operand(next)) return after_type + 1;
    return std::string::npos;
  }

  bool is_paren_lambda() const {
    const std::size_t close = skip_group_at(i_);
    return op_at(close, "->") && sep_at(close - 1, ")");
  }

  bool parse_unary() {
    const Token* t = tok();
    if (!t) {
      error_here(DiagKind::unexpected_token, "expression expected");
      return false;
    }
    if (t->kind == TokenKind::op &&
        (t->lexeme == "+" || t->lexeme == "-" || t->lexeme == "!" || t->lexeme == "~" || t->lexeme == "++" ||
         t->lexeme == "--")) {
      ++i_;
      return parse_unary();
    }
    if (t->is_sep("(")) {
      if (is_paren_lambda()) {
        i_ = skip_group_at(i_) + 1;
        return parse_lambda_body();
      }
      if (std::size_t end = cast_end(); end != std::string::npos) {
        i_ = end;
        return parse_unary();
      }
    }
    if (!parse_primary()) return false;
    return parse_postfix();
  }

  bool parse_primary() {
    const Token* t = tok();
    switch (t->kind) {
      case TokenKind::int_literal:
      case TokenKind::float_literal:
      case TokenKind::string_literal:
      case TokenKind::char_literal:
      case TokenKind::error:
        ++i_;
        return true;
      case TokenKind::identifier:
        ++i_;
        if (op("->")) {
          ++i_;
          return parse_lambda_body();
        }
        return true;
      case TokenKind::keyword:
        if (t->lexeme == "true" || t->lexeme == "false" || t->lexeme == "null" || t->lexeme == "this" ||
            t->lexeme == "super") {
          ++i_;
          return true;
        }
        if (t->lexeme == "new") return parse_creator();
        if (contains(kPrimitiveTypes, t->lexeme)) {
          // int.class, int[].class, int[]::new
          const std::size_t after = scan_type(i_);
          if (sep_at(after, ".") && kw_at(after + 1, "class")) {
            i_ = after + 2;
            return true;
          }
          if (sep_at(after, "::")) {
            i_ = after;
            return true;
          }
        }
        break;
      case TokenKind::separator:
        if (t->lexeme == "(") {
          ++i_;
          if (!parse_expression()) return false;
          expect_sep(")");
          return true;
        }
        break;
      default:
        break;
    }
    error_here(DiagKind::unexpected_token, "expression expected before '" + t->lexeme + "'");
    return false;
  }

  bool parse_postfix() {
    while (const Token* t = tok()) {
      if (t->is_sep(".")) {
        ++i_;
        if (const std::size_t after = scan_type_args(i_); after != std::string::npos) i_ = after;
        if (ident() || kw("this") || kw("class") || kw("super")) {
          ++i_;
          continue;
        }
        if (kw("new")) {
          if (!parse_creator()) return false;
          continue;
        }
        error_here(DiagKind::unexpected_token, "identifier expected after '.'");
        return false;
      }
      if (t->is_sep("(")) {
        if (!parse_arguments()) return false;
        continue;
      }
      if (t->is_sep("[")) {
        ++i_;
        if (!parse_expression()) return false;
        expect_sep("]");
        continue;
      }
      if (t->is_op("++") || t->is_op("--")) {
        ++i_;
        continue;
      }
      if (t->is_sep("::")) {
        ++i_;
        if (ident() || kw("new")) {
          ++i_;
          continue;
        }
        error_here(DiagKind::unexpected_token, "method reference expected");
        return false;
      }
      break;
    }
    return true;
  }

  // At `(`. A missing `)` is diagnosed and treated as present.
  bool parse_arguments() {
    ++i_;
    if (sep(")")) {
      ++i_;
      return true;
    }
    if (sep(";") || sep("{") || sep("}")) {
      expected(")");
      return true;
    }
    while (true) {
      if (!parse_expression()) return false;
      if (sep(",")) {
        ++i_;
        continue;
      }
      if (sep(")")) {
        ++i_;
        return true;
      }
      expected(")");
      return true;
    }
  }

  bool parse_creator() {
    ++i_;  // new
    const std::size_t after = scan_type(i_);
    if (after == std::string::npos) {
      error_here(DiagKind::unexpected_token, "type expected after 'new'");
      return false;
    }
    // scan_type swallows empty dims (`new int[] {..}`); back up to the first `[`.
    std::size_t pos = i_ + 1;
    while (pos < after && !sep_at(pos, "[")) ++pos;
    i_ = pos;
    if (op("<") && op(">", 1)) i_ += 2;  // diamond
    if (sep("(")) {
      if (!parse_arguments()) return false;
      if (sep("{")) {
        ++i_;
        Nodes discarded;
        parse_class_body("", discarded);
      }
      return true;
    }
    if (!sep("[")) {
      error_here(DiagKind::unexpected_token, "'(' or '[' expected");
      return false;
    }
    while (sep("[")) {
      ++i_;
      if (!sep("]") && !parse_expression()) return false;
      expect_sep("]");
    }
    if (sep("{")) return parse_array_initializer();
    return true;
  }

  std::vector<const Token*> toks_;
  std::size_t i_ = 0;
  std::size_t source_end_;
  int method_depth_ = 0;
  std::vector<ParseDiagnostic> diags_;
};

void render_into(const ControlFlowSkeleton& n, int depth, std::string& out) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += to_string(n.node);
  out += '\n';
  for (const auto& c : n.children) render_into(c, depth + 1, out);
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::IF: return "IF";
    case NodeKind::ELSE: return "ELSE";
    case NodeKind::FOR: return "FOR";
    case NodeKind::WHILE: return "WHILE";
    case NodeKind::DO: return "DO";
    case NodeKind::SWITCH: return "SWITCH";
    case NodeKind::CASE: return "CASE";
    case NodeKind::RETURN: return "RETURN";
    case NodeKind::BREAK: return "BREAK";
    case NodeKind::CONTINUE: return "CONTINUE";
    case NodeKind::TRY: return "TRY";
    case NodeKind::CATCH: return "CATCH";
    case NodeKind::BLOCK: return "BLOCK";
    case NodeKind::METHOD: return "METHOD";
  }
  return "?";
}

std::string render(const ControlFlowSkeleton& skeleton) {
  std::string out;
  render_into(skeleton, 0, out);
  return out;
}

ParseResult parse(const TokenStream& tokens) {
  std::size_t end = tokens.trailing.size();
  if (!tokens.empty()) end += tokens.tokens.back().end();
  return Parser(tokens, end).run();
}

ParseResult parse(std::string_view source) { return parse(tokenize(source)); }

std::size_t best_literal_close(std::string_view source, const Token& literal) {
  const char quote = literal.error == LexError::unterminated_char ? '\'' : '"';
  std::size_t best_pos = std::string::npos;
  std::size_t best_score = static_cast<std::size_t>(-1);
  std::string candidate;
  for (std::size_t pos = literal.offset + 1; pos <= literal.end(); ++pos) {
    candidate.assign(source);
    candidate.insert(candidate.begin() + static_cast<std::ptrdiff_t>(pos), quote);
    const TokenStream tokens = tokenize(candidate);
    auto closed = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) { return t.offset == literal.offset; });
    if (closed == tokens.end() || closed->kind == TokenKind::error || closed->end() != pos + 1) continue;
    const std::size_t score = parse(tokens).diagnostics.size();
    if (score <= best_score) {
      best_score = score;
      best_pos = pos;
    }
  }
  return best_pos;
}

std::string close_unterminated_literals(std::string_view source) {
  std::string text(source);
  std::size_t resume = 0;
  while (true) {
    const TokenStream tokens = tokenize(text);
    auto lit = std::find_if(tokens.begin(), tokens.end(),
                            [&](const Token& t) { return t.offset >= resume && t.is_unterminated_literal(); });
    if (lit == tokens.end()) return text;
    const std::size_t pos = best_literal_close(text, *lit);
    if (pos == std::string::npos) {
      resume = lit->end();
      continue;
    }
    text.insert(pos, 1, lit->error == LexError::unterminated_char ? '\'' : '"');
    resume = pos + 1;
  }
}

ControlFlowSkeleton extract_skeleton(std::string_view source) {
  const TokenStream tokens = tokenize(close_unterminated_literals(source));
  const BalanceReport balance = check_balance(tokens);
  for (const auto& d : balance.defects) {
    if (d.kind == DefectKind::missing_open || d.kind == DefectKind::mismatched_pair) {
      throw SkeletonError("unrecoverable nesting: " + std::string(to_string(d.kind)) + " '" +
                          std::string(1, d.delimiter) + "' at line " + std::to_string(d.line) + ", col " +
                          std::to_string(d.col));
    }
  }
  return parse(tokens).skeleton;
}

}  // namespace mend::javasyn
