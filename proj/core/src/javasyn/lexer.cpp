#include <algorithm>
#include <array>
#include <cctype>

#include "mend/javasyn.hpp"

namespace mend::javasyn {
namespace {

constexpr std::array kKeywords = {
    "abstract", "assert",     "boolean",  "break",     "byte",      "case",         "catch",
    "char",     "class",      "const",    "continue",  "default",   "do",           "double",
    "else",     "enum",       "extends",  "final",     "finally",   "float",        "for",
    "goto",     "if",         "implements", "import",  "instanceof", "int",         "interface",
    "long",     "native",     "new",      "package",   "private",   "protected",    "public",
    "return",   "short",      "static",   "strictfp",  "super",     "switch",       "synchronized",
    "this",     "throw",      "throws",   "transient", "try",       "void",         "volatile",
    "while",    "true",       "false",    "null",
};

// Longest first so that maximal munch is a linear scan.
constexpr std::array kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "->", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=",
    "*=",   "/=",  "&=",  "|=",  "^=", "%=", "<<", ">>", "=",  ">",  "<",  "!",  "~",  "?",  ":",
    "+",    "-",   "*",   "/",   "&",  "|",  "^",  "%",
};

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80; }
bool is_ident_part(unsigned char c) { return is_ident_start(c) || std::isdigit(c); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    TokenStream out;
    while (true) {
      const std::size_t ws_begin = pos_;
      while (pos_ < src_.size() && is_space(src_[pos_])) advance();
      std::string leading(src_.substr(ws_begin, pos_ - ws_begin));
      if (pos_ >= src_.size()) {
        out.trailing = std::move(leading);
        break;
      }
      Token tok = next();
      tok.leading = std::move(leading);
      out.tokens.push_back(std::move(tok));
    }
    return out;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    const char c = src_[pos_++];
    if (c == '\n' || (c == '\r' && peek() != '\n')) {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
  }

  Token make(TokenKind kind, std::size_t begin, int line, int col, LexError err = LexError::none) const {
    Token t;
    t.kind = kind;
    t.lexeme = std::string(src_.substr(begin, pos_ - begin));
    t.offset = begin;
    t.line = line;
    t.col = col;
    t.error = err;
    return t;
  }

  Token next() {
    const std::size_t begin = pos_;
    const int line = line_;
    const int col = col_;
    const char c = peek();

    if (c == '/' && peek(1) == '/') {
      while (pos_ < src_.size() && peek() != '\n' && peek() != '\r') advance();
      return make(TokenKind::comment, begin, line, col);
    }
    if (c == '/' && peek(1) == '*') {
      advance();
      advance();
      while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
      if (pos_ >= src_.size()) return make(TokenKind::error, begin, line, col, LexError::unterminated_comment);
      advance();
      advance();
      return make(TokenKind::comment, begin, line, col);
    }
    if (c == '"' && peek(1) == '"' && peek(2) == '"') return text_block(begin, line, col);
    if (c == '"') return quoted(c, begin, line, col);
    if (c == '\'') return char_literal(begin, line, col);
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      return number(begin, line, col);
    }
    if (is_ident_start(static_cast<unsigned char>(c))) {
      while (pos_ < src_.size() && is_ident_part(static_cast<unsigned char>(peek()))) advance();
      Token t = make(TokenKind::identifier, begin, line, col);
      if (is_java_keyword(t.lexeme)) t.kind = TokenKind::keyword;
      return t;
    }
    for (std::string_view sep : {"...", "::"}) {
      if (src_.substr(pos_, sep.size()) == sep) {
        for (std::size_t i = 0; i < sep.size(); ++i) advance();
        return make(TokenKind::separator, begin, line, col);
      }
    }
    if (std::string_view("(){}[];,.@").find(c) != std::string_view::npos) {
      advance();
      return make(TokenKind::separator, begin, line, col);
    }
    for (std::string_view op : kOperators) {
      if (src_.substr(pos_, op.size()) == op) {
        for (std::size_t i = 0; i < op.size(); ++i) advance();
        return make(TokenKind::op, begin, line, col);
      }
    }
    advance();
    return make(TokenKind::error, begin, line, col, LexError::unexpected_character);
  }

  // String or char literal; an unescaped line break or end of input before
  // the closing quote yields an error token that stops at the end of line.
  Token quoted(char quote, std::size_t begin, int line, int col) {
    advance();
    while (pos_ < src_.size()) {
      const char c = peek();
      if (c == '\n' || c == '\r') break;
      if (c == '\\' && pos_ + 1 < src_.size() && peek(1) != '\n' && peek(1) != '\r') {
        advance();
        advance();
        continue;
      }
      advance();
      if (c == quote) {
        return make(quote == '"' ? TokenKind::string_literal : TokenKind::char_literal, begin, line, col);
      }
    }
    return make(TokenKind::error, begin, line, col,
                quote == '"' ? LexError::unterminated_string : LexError::unterminated_char);
  }

  // One character or escape sequence between quotes. Anything else is an
  // unterminated literal running to the end of the line.
  Token char_literal(std::size_t begin, int line, int col) {
    advance();
    if (peek() == '\\' && pos_ + 1 < src_.size() && peek(1) != '\n' && peek(1) != '\r') {
      advance();
      if (peek() == 'u') {
        while (peek() == 'u') advance();
        for (int k = 0; k < 4 && std::isxdigit(static_cast<unsigned char>(peek())); ++k) advance();
      } else if (peek() >= '0' && peek() <= '7') {
        for (int k = 0; k < 3 && peek() >= '0' && peek() <= '7'; ++k) advance();
      } else {
        advance();
      }
    } else if (pos_ < src_.size() && peek() != '\'' && peek() != '\n' && peek() != '\r') {
      const auto lead = static_cast<unsigned char>(peek());
      advance();
      if (lead >= 0xC0) {
        while (pos_ < src_.size() && (static_cast<unsigned char>(peek()) & 0xC0) == 0x80) advance();
      }
    }
    if (peek() == '\'' && pos_ > begin + 1) {
      advance();
      return make(TokenKind::char_literal, begin, line, col);
    }
    while (pos_ < src_.size() && peek() != '\n' && peek() != '\r') advance();
    return make(TokenKind::error, begin, line, col, LexError::unterminated_char);
  }

  Token text_block(std::size_t begin, int line, int col) {
    for (int i = 0; i < 3; ++i) advance();
    while (pos_ < src_.size()) {
      if (peek() == '\\' && pos_ + 1 < src_.size()) {
        advance();
        advance();
        continue;
      }
      if (peek() == '"' && peek(1) == '"' && peek(2) == '"') {
        for (int i = 0; i < 3; ++i) advance();
        return make(TokenKind::string_literal, begin, line, col);
      }
      advance();
    }
    return make(TokenKind::error, begin, line, col, LexError::unterminated_string);
  }

  Token number(std::size_t begin, int line, int col) {
    auto digits = [&](auto pred) {
      while (pos_ < src_.size() && (pred(static_cast<unsigned char>(peek())) || peek() == '_')) advance();
    };
    auto is_dec = [](unsigned char ch) { return std::isdigit(ch) != 0; };
    bool is_float = false;

    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance();
      advance();
      digits([](unsigned char ch) { return std::isxdigit(ch) != 0; });
    } else if (peek() == '0' && (peek(1) == 'b' || peek(1) == 'B')) {
      advance();
      advance();
      digits([](unsigned char ch) { return ch == '0' || ch == '1'; });
    } else {
      digits(is_dec);
      if (peek() == '.' && !is_ident_start(static_cast<unsigned char>(peek(1))) && peek(1) != '.') {
        is_float = true;
        advance();
        digits(is_dec);
      }
      if (peek() == 'e' || peek() == 'E') {
        const char sign = peek(1);
        const bool has_sign = sign == '+' || sign == '-';
        if (std::isdigit(static_cast<unsigned char>(peek(has_sign ? 2 : 1)))) {
          is_float = true;
          advance();
          if (has_sign) advance();
          digits(is_dec);
        }
      }
      if (std::string_view("fFdD").find(peek()) != std::string_view::npos && peek() != '\0') {
        is_float = true;
        advance();
        return make(TokenKind::float_literal, begin, line, col);
      }
    }
    if (!is_float && (peek() == 'l' || peek() == 'L')) advance();
    return make(is_float ? TokenKind::float_literal : TokenKind::int_literal, begin, line, col);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

bool is_java_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::keyword: return "keyword";
    case TokenKind::identifier: return "identifier";
    case TokenKind::int_literal: return "int_literal";
    case TokenKind::float_literal: return "float_literal";
    case TokenKind::string_literal: return "string_literal";
    case TokenKind::char_literal: return "char_literal";
    case TokenKind::op: return "operator";
    case TokenKind::separator: return "separator";
    case TokenKind::comment: return "comment";
    case TokenKind::error: return "error";
  }
  return "?";
}

std::string_view to_string(LexError reason) {
  switch (reason) {
    case LexError::none: return "none";
    case LexError::unterminated_string: return "unterminated string literal";
    case LexError::unterminated_char: return "unterminated char literal";
    case LexError::unterminated_comment: return "unterminated comment";
    case LexError::unexpected_character: return "unexpected character";
  }
  return "?";
}

TokenStream tokenize(std::string_view source) { return Lexer(source).run(); }

std::string detokenize(const TokenStream& stream) {
  std::string out;
  for (const auto& t : stream.tokens) {
    out += t.leading;
    out += t.lexeme;
  }
  out += stream.trailing;
  return out;
}

std::vector<std::string> declared_identifiers(const TokenStream& stream) {
  std::vector<const Token*> toks;
  for (const auto& t : stream.tokens)
    if (t.kind != TokenKind::comment) toks.push_back(&t);

  std::vector<std::string> out;
  for (std::size_t i = 1; i + 1 < toks.size(); ++i) {
    const Token* t = toks[i];
    if (t->kind != TokenKind::identifier) continue;
    const Token* before = toks[i - 1];
    const Token* after = toks[i + 1];
    const bool type_before =
        before->kind == TokenKind::identifier || before->is_sep("]") || before->is_op(">") ||
        (before->kind == TokenKind::keyword &&
         (before->lexeme == "int" || before->lexeme == "double" || before->lexeme == "boolean" ||
          before->lexeme == "char" || before->lexeme == "long" || before->lexeme == "float" ||
          before->lexeme == "short" || before->lexeme == "byte" || before->lexeme == "void"));
    const bool decl_after = after->is_op("=") || after->is_sep(";") || after->is_sep(",") || after->is_op(":") ||
                            after->is_sep(")") || after->is_sep("(") || after->is_sep("[");
    if (type_before && decl_after && std::find(out.begin(), out.end(), t->lexeme) == out.end())
      out.push_back(t->lexeme);
  }
  return out;
}

}  // namespace mend::javasyn
