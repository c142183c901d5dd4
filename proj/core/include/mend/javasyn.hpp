#pragma once

// Lossless tokenizer, delimiter balance checker and best-effort parser for the
// subset of Java that shows up in introductory programming exercises.
//
// Generics are not parsed as delimiters: `<` and `>` are always operators.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mend::javasyn {

enum class TokenKind {
  keyword,
  identifier,
  int_literal,
  float_literal,
  string_literal,
  char_literal,
  op,
  separator,
  comment,
  error,
};

enum class LexError {
  none,
  unterminated_string,
  unterminated_char,
  unterminated_comment,
  unexpected_character,
};

std::string_view to_string(TokenKind kind);
std::string_view to_string(LexError reason);

struct Token {
  TokenKind kind = TokenKind::error;
  std::string lexeme;
  int line = 1;  // 1-based
  int col = 1;   // 1-based, in bytes
  std::size_t offset = 0;
  // Whitespace between the previous token (or start of input) and this one.
  std::string leading;
  LexError error = LexError::none;

  std::size_t end() const { return offset + lexeme.size(); }
  bool is(TokenKind k, std::string_view text) const { return kind == k && lexeme == text; }
  bool is_sep(std::string_view text) const { return is(TokenKind::separator, text); }
  bool is_op(std::string_view text) const { return is(TokenKind::op, text); }
  bool is_kw(std::string_view text) const { return is(TokenKind::keyword, text); }
  bool is_unterminated_literal() const {
    return error == LexError::unterminated_string || error == LexError::unterminated_char;
  }
};

struct TokenStream {
  std::vector<Token> tokens;
  // Whitespace after the last token.
  std::string trailing;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }
  auto begin() const { return tokens.begin(); }
  auto end() const { return tokens.end(); }
};

/// Never fails: malformed input yields error tokens carrying a reason.
TokenStream tokenize(std::string_view source);
/// Inverse of tokenize: detokenize(tokenize(s)) == s for every s.
std::string detokenize(const TokenStream& stream);

bool is_java_keyword(std::string_view word);

/// Identifiers that appear in declaration position (after a type, before
/// `=`, `;`, `,`, `:`, `)`, `(` or `[`): locals, fields, parameters, methods.
std::vector<std::string> declared_identifiers(const TokenStream& tokens);

// ---------------------------------------------------------------------------
// Delimiter balance

enum class DefectKind { missing_close, missing_open, mismatched_pair, unterminated_literal };

std::string_view to_string(DefectKind kind);

struct BalanceDefect {
  DefectKind kind = DefectKind::missing_close;
  // The delimiter that is missing (missing_close / missing_open), the
  // offending closer (mismatched_pair), or the quote character.
  char delimiter = 0;
  // Location of the unmatched delimiter or literal in the source.
  int line = 0;
  int col = 0;
  // Byte offset where inserting `delimiter` would repair the defect, or
  // npos when no sensible insertion point exists.
  std::size_t suggested_insert_position = std::string::npos;
};

struct BalanceReport {
  std::vector<BalanceDefect> defects;
  bool clean() const { return defects.empty(); }
};

/// Stack simulation over (), {} and []. Comments and literals are opaque.
BalanceReport check_balance(const TokenStream& tokens);

// ---------------------------------------------------------------------------
// Parsing and control-flow skeletons

enum class NodeKind { IF, ELSE, FOR, WHILE, DO, SWITCH, CASE, RETURN, BREAK, CONTINUE, TRY, CATCH, BLOCK, METHOD };

std::string_view to_string(NodeKind kind);

struct ControlFlowSkeleton {
  NodeKind node = NodeKind::METHOD;
  std::vector<ControlFlowSkeleton> children;

  bool operator==(const ControlFlowSkeleton&) const = default;
};

/// One node per line, two-space indentation per nesting level.
std::string render(const ControlFlowSkeleton& skeleton);

enum class DiagKind {
  lexical,              // error token from the tokenizer
  expected_semicolon,   // statement/header ended without `;`
  expected_token,       // some other required token is absent
  unexpected_token,
  missing_close_brace,  // block implicitly closed (end of input or structural evidence)
};

// Where an expected `;` was missing.
enum class SemicolonSite { statement, for_header, member, do_while };

struct ParseDiagnostic {
  DiagKind kind = DiagKind::unexpected_token;
  int line = 0;
  int col = 0;
  std::string message;
  // Insertion point that would satisfy the parser (for expected_* and
  // missing_close_brace), else npos.
  std::size_t insert_at = std::string::npos;
  std::string expected;
  SemicolonSite site = SemicolonSite::statement;
  // For expected_semicolon: the next token starts a new line or is `}` /
  // end of input.
  bool at_statement_boundary = false;
};

struct ParseResult {
  std::vector<ParseDiagnostic> diagnostics;
  ControlFlowSkeleton skeleton;
  bool ok() const { return diagnostics.empty(); }
};

/// Best-effort recursive-descent parse with statement-level recovery.
ParseResult parse(const TokenStream& tokens);
ParseResult parse(std::string_view source);

/// Offset at which inserting the closing quote of the unterminated literal
/// `literal` leaves the fewest parse diagnostics (ties: end of line). Only
/// positions where the quote actually terminates the literal are considered;
/// npos when there is none (e.g. a char literal with several characters).
std::size_t best_literal_close(std::string_view source, const Token& literal);

/// Closes every unterminated string/char literal at its best_literal_close
/// position; literals that cannot be closed are left as they are. Used for
/// lexical recovery before skeleton extraction.
std::string close_unterminated_literals(std::string_view source);

class SkeletonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extracts the METHOD-rooted control-flow tree. Unterminated literals are
/// closed first. Throws SkeletonError when the block structure is ambiguous
/// (stray or mismatched closers).
ControlFlowSkeleton extract_skeleton(std::string_view source);

}  // namespace mend::javasyn
