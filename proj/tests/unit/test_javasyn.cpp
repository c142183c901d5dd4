#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "mend/javasyn.hpp"

using namespace mend::javasyn;
namespace t = mend::testing;

namespace {

std::vector<std::string> lexemes(std::string_view src) {
  std::vector<std::string> out;
  for (const auto& tok : tokenize(src)) out.push_back(tok.lexeme);
  return out;
}

bool has_diag(const ParseResult& r, DiagKind kind) {
  return std::any_of(r.diagnostics.begin(), r.diagnostics.end(), [&](const auto& d) { return d.kind == kind; });
}

}  // namespace

TEST(Lexer, KindsAndPositions) {
  const auto s = tokenize("int x = 1;\nString s = \"a\";");
  ASSERT_EQ(s.size(), 10u);
  EXPECT_EQ(s[0].kind, TokenKind::keyword);
  EXPECT_EQ(s[1].kind, TokenKind::identifier);
  EXPECT_EQ(s[2].kind, TokenKind::op);
  EXPECT_EQ(s[3].kind, TokenKind::int_literal);
  EXPECT_EQ(s[4].kind, TokenKind::separator);
  EXPECT_EQ(s[5].line, 2);
  EXPECT_EQ(s[5].col, 1);
  EXPECT_EQ(s[8].kind, TokenKind::string_literal);
  EXPECT_EQ(s[8].lexeme, "\"a\"");
  EXPECT_EQ(s[8].offset, 22u);
}

TEST(Lexer, NumbersAndOperators) {
  EXPECT_EQ(lexemes("x>>>=0x1F+3.5e2-1_000L"),
            (std::vector<std::string>{"x", ">>>=", "0x1F", "+", "3.5e2", "-", "1_000L"}));
  const auto s = tokenize("a->b::c...");
  EXPECT_EQ(s[1].lexeme, "->");
  EXPECT_EQ(s[3].lexeme, "::");
  EXPECT_EQ(s[5].lexeme, "...");
  EXPECT_EQ(tokenize("2.5f")[0].kind, TokenKind::float_literal);
}

TEST(Lexer, UnterminatedStringStopsAtEndOfLine) {
  const auto s = tokenize("s = \"ab;\nint y;");
  EXPECT_EQ(s[2].kind, TokenKind::error);
  EXPECT_EQ(s[2].error, LexError::unterminated_string);
  EXPECT_EQ(s[2].lexeme, "\"ab;");
  EXPECT_TRUE(s[2].is_unterminated_literal());
  EXPECT_EQ(s[3].lexeme, "int");
}

TEST(Lexer, CharLiteralsAreStrict) {
  EXPECT_EQ(tokenize("'\\n'")[0].kind, TokenKind::char_literal);
  EXPECT_EQ(tokenize("'\\u0041'")[0].kind, TokenKind::char_literal);
  EXPECT_EQ(tokenize("'\xC3\xA9'")[0].kind, TokenKind::char_literal);
  // Missing closing quote: error to end of line, not a swallowed neighbour.
  const auto s = tokenize("c = 'a;\nx = 'b';");
  EXPECT_EQ(s[2].error, LexError::unterminated_char);
  EXPECT_EQ(s[2].lexeme, "'a;");
  EXPECT_EQ(s[5].kind, TokenKind::char_literal);
}

TEST(Lexer, CommentsAndErrors) {
  const auto s = tokenize("// line\n/* block */ x /* open");
  EXPECT_EQ(s[0].kind, TokenKind::comment);
  EXPECT_EQ(s[1].kind, TokenKind::comment);
  EXPECT_EQ(s[3].error, LexError::unterminated_comment);
  EXPECT_EQ(tokenize("#")[0].error, LexError::unexpected_character);
}

TEST(Lexer, LosslessOnSeeds) {
  for (const auto& seed : t::load_seeds()) EXPECT_EQ(detokenize(tokenize(seed.source)), seed.source) << seed.name;
}

TEST(Lexer, LosslessOnRandomInput) {
  for (std::uint64_t i = 0; i < 500; ++i) {
    const std::string src = t::random_program(i);
    ASSERT_EQ(detokenize(tokenize(src)), src) << "seed " << i;
  }
}

TEST(Lexer, OffsetsMatchSource) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    const std::string src = t::random_program(1000 + i);
    for (const auto& tok : tokenize(src)) ASSERT_EQ(src.substr(tok.offset, tok.lexeme.size()), tok.lexeme);
  }
}

TEST(Lexer, Keywords) {
  EXPECT_TRUE(is_java_keyword("while"));
  EXPECT_TRUE(is_java_keyword("instanceof"));
  EXPECT_FALSE(is_java_keyword("While"));
  EXPECT_FALSE(is_java_keyword("String"));
}

TEST(Lexer, DeclaredIdentifiers) {
  const auto ids = declared_identifiers(tokenize("int total = 0; String[] names; for (int i = 0; i < n; i++) f(total);"));
  EXPECT_NE(std::find(ids.begin(), ids.end(), "total"), ids.end());
  EXPECT_NE(std::find(ids.begin(), ids.end(), "names"), ids.end());
  EXPECT_NE(std::find(ids.begin(), ids.end(), "i"), ids.end());
  EXPECT_EQ(std::find(ids.begin(), ids.end(), "n"), ids.end());
  EXPECT_EQ(std::find(ids.begin(), ids.end(), "f"), ids.end());
}

TEST(Balance, CleanSeeds) {
  for (const auto& seed : t::load_seeds()) EXPECT_TRUE(check_balance(tokenize(seed.source)).clean()) << seed.name;
}

TEST(Balance, MissingCloseAtEndOfFile) {
  const std::string src = "void f() {\n  int x = 1;\n";
  const auto r = check_balance(tokenize(src));
  ASSERT_EQ(r.defects.size(), 1u);
  EXPECT_EQ(r.defects[0].kind, DefectKind::missing_close);
  EXPECT_EQ(r.defects[0].delimiter, '}');
  EXPECT_EQ(r.defects[0].suggested_insert_position, src.size());
}

TEST(Balance, MissingParenClosesBeforeBrace) {
  const std::string src = "if (a > b {\n  x = 1;\n}\n";
  const auto r = check_balance(tokenize(src));
  ASSERT_EQ(r.defects.size(), 1u);
  EXPECT_EQ(r.defects[0].delimiter, ')');
  EXPECT_EQ(r.defects[0].suggested_insert_position, src.find(" {"));
}

TEST(Balance, StrayCloser) {
  const auto r = check_balance(tokenize("x = 1; }"));
  ASSERT_EQ(r.defects.size(), 1u);
  EXPECT_EQ(r.defects[0].kind, DefectKind::missing_open);
  EXPECT_EQ(r.defects[0].delimiter, '{');
}

TEST(Balance, LiteralsAreOpaque) {
  EXPECT_TRUE(check_balance(tokenize("s = \"(((\"; c = '}';")).clean());
  const auto r = check_balance(tokenize("s = \"abc;\n"));
  ASSERT_EQ(r.defects.size(), 1u);
  EXPECT_EQ(r.defects[0].kind, DefectKind::unterminated_literal);
}

TEST(Parser, SeedsParse) {
  for (const auto& seed : t::load_seeds()) {
    const auto r = parse(std::string_view(seed.source));
    EXPECT_TRUE(r.ok()) << seed.name << ": " << (r.diagnostics.empty() ? "" : r.diagnostics[0].message);
  }
}

TEST(Parser, EverySingleDeletionIsDetected) {
  for (const auto& seed : t::load_seeds())
    for (const auto& m : t::single_deletions(seed.source))
      EXPECT_FALSE(parse(std::string_view(m.source)).ok()) << seed.name << " @" << m.offset;
}

TEST(Parser, MissingSemicolon) {
  const std::string src = "int x = 1\nint y = 2;\n";
  const auto r = parse(std::string_view(src));
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.diagnostics[0].kind, DiagKind::expected_semicolon);
  EXPECT_EQ(r.diagnostics[0].insert_at, src.find('\n'));
  EXPECT_TRUE(r.diagnostics[0].at_statement_boundary);
  EXPECT_EQ(r.diagnostics[0].line, 1);
}

TEST(Parser, ForHeaderSemicolon) {
  const auto r = parse(std::string_view("for (int i = 0 i < 3; i++) { }"));
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.diagnostics[0].kind, DiagKind::expected_semicolon);
  EXPECT_EQ(r.diagnostics[0].site, SemicolonSite::for_header);
}

TEST(Parser, MissingCloseBrace) {
  EXPECT_TRUE(has_diag(parse(std::string_view("void f() {\n  return;\n")), DiagKind::missing_close_brace));
}

TEST(Parser, LexicalErrorsSurface) {
  EXPECT_TRUE(has_diag(parse(std::string_view("s = \"abc;\n")), DiagKind::lexical));
}

TEST(Skeleton, Golden) {
  const std::string src =
      "if (a > 0) {\n  x = 1;\n} else {\n  while (b) { b--; }\n}\n"
      "for (;;) { break; }\ndo { y(); } while (z);\n"
      "switch (k) { case 1: return; default: continue; }\n";
  EXPECT_EQ(render(extract_skeleton(src)),
            "METHOD\n"
            "  IF\n"
            "    BLOCK\n"
            "  ELSE\n"
            "    BLOCK\n"
            "      WHILE\n"
            "        BLOCK\n"
            "  FOR\n"
            "    BLOCK\n"
            "      BREAK\n"
            "  DO\n"
            "    BLOCK\n"
            "  SWITCH\n"
            "    CASE\n"
            "      RETURN\n"
            "    CASE\n"
            "      CONTINUE\n");
}

TEST(Skeleton, TryCatch) {
  EXPECT_EQ(render(extract_skeleton(t::read_text(t::seeds_dir() / "safe_divide.java"))),
            "METHOD\n  TRY\n    BLOCK\n  CATCH\n    BLOCK\n  BLOCK\n  RETURN\n");
}

TEST(Skeleton, IgnoresStraightLineCode) {
  EXPECT_EQ(extract_skeleton("int a = 1; a++; f(a);"), extract_skeleton("String s = g();"));
  EXPECT_EQ(extract_skeleton("if (x) { a = 1; }"), extract_skeleton("if (y > 3) { foo(); bar(); }"));
}

TEST(Skeleton, UnterminatedLiteralsAreClosedFirst) {
  EXPECT_EQ(extract_skeleton("if (x) {\n  s = \"a;\n}\n"), extract_skeleton("if (x) {\n  s = \"a\";\n}\n"));
}

TEST(Skeleton, StrayCloserIsAmbiguous) {
  EXPECT_THROW(extract_skeleton("if (x) { a(); } }\n}"), SkeletonError);
}

TEST(Literals, CloseAtBestPosition) {
  const std::string src = "System.out.println(\"hi);\n";
  EXPECT_EQ(close_unterminated_literals(src), "System.out.println(\"hi\");\n");
  const auto toks = tokenize(src);
  EXPECT_EQ(best_literal_close(src, toks[6]), src.find(')'));
}
