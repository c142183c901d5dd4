#include <gtest/gtest.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "mend/compilecheck.hpp"

using namespace mend::compilecheck;
namespace t = mend::testing;

namespace {

CheckOptions fake_javac() {
  CheckOptions o;
  o.backend = Backend::external_javac;
  o.compiler = (t::data_dir() / "fake_javac.sh").string();
  o.timeout = std::chrono::milliseconds(5000);
  return o;
}

}  // namespace

TEST(Wrap, BareMethodGetsShell) {
  const auto w = wrap_snippet("public int f(){return 1;}");
  EXPECT_EQ(w.line_offset, 1);
  EXPECT_EQ(w.source, std::string(kShellHeader) + "public int f(){return 1;}\n}\n");
}

TEST(Wrap, ClassIsLeftAlone) {
  const std::string src = "public class Hello {\n  public static void main(String[] a) { }\n}\n";
  const auto w = wrap_snippet(src);
  EXPECT_EQ(w.line_offset, 0);
  EXPECT_EQ(w.source, src);
}

TEST(Wrap, ClassKeywordInsideMethodDoesNotCount) {
  EXPECT_EQ(wrap_snippet("void f() { Object o = String.class; }").line_offset, 1);
  EXPECT_EQ(wrap_snippet("// class notes\nvoid f() { }").line_offset, 1);
}

TEST(Wrap, EmptySource) {
  const auto w = wrap_snippet("");
  EXPECT_EQ(w.line_offset, 1);
  EXPECT_EQ(w.source, std::string(kShellHeader) + "}\n");
}

TEST(ParseOutput, ShiftsLinesAndReadsCaret) {
  const std::string out =
      "/tmp/x/Submission.java:4: error: ';' expected\n"
      "        int y = 2\n"
      "                 ^\n"
      "/tmp/x/Submission.java:1: warning: something\n"
      "1 error\n";
  const auto msgs = parse_javac_output(out, 1);
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].line, 3);
  EXPECT_EQ(msgs[0].col, 18);
  EXPECT_EQ(msgs[0].severity, Severity::error);
  EXPECT_EQ(msgs[0].text, "';' expected");
  EXPECT_EQ(msgs[1].line, 1);  // clamped
  EXPECT_EQ(msgs[1].severity, Severity::warning);
}

TEST(ParseOutput, WindowsPathsAndNoise) {
  const auto msgs = parse_javac_output("Note: Some input files use unchecked operations.\r\n"
                                       "C:\\tmp\\Submission.java:7: error: cannot find symbol\r\n",
                                       0);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0].line, 7);
}

TEST(Internal, ValidAndInvalid) {
  const auto ok = check("public int f(){return 1;}");
  EXPECT_TRUE(ok.ok);
  EXPECT_TRUE(ok.messages.empty());
  EXPECT_EQ(ok.backend, Backend::internal_parse);

  const auto bad = check("int f() {\n  int x = 1\n  return x;\n}\n");
  EXPECT_FALSE(bad.ok);
  ASSERT_FALSE(bad.messages.empty());
  EXPECT_EQ(bad.messages[0].line, 2);
  EXPECT_EQ(bad.messages[0].severity, Severity::error);
}

TEST(External, MissingCompiler) {
  CheckOptions o = fake_javac();
  o.compiler = "definitely-not-a-javac-binary";
  EXPECT_FALSE(compiler_available(o.compiler));
  EXPECT_THROW(check("int x;", o), CompilerMissing);
}

TEST(External, CleanCompile) {
  ASSERT_TRUE(compiler_available(fake_javac().compiler));
  const auto d = check("public int f() { return 1; }\n", fake_javac());
  EXPECT_TRUE(d.ok);
  EXPECT_TRUE(d.wrapped);
  EXPECT_EQ(d.backend, Backend::external_javac);
}

TEST(External, ErrorLineMapsToSnippet) {
  const std::string src = "int f() {\n  int a = 1;\n  int b = 2 // MISSING_SEMI\n  return a + b;\n}\n";
  const auto d = check(src, fake_javac());
  EXPECT_FALSE(d.ok);
  ASSERT_EQ(d.messages.size(), 1u);
  EXPECT_EQ(d.messages[0].line, 3);
  EXPECT_EQ(d.messages[0].col, 9);
}

TEST(External, UnwrappedClassKeepsLines) {
  const std::string src = "public class Foo {\n  int b = 2 // MISSING_SEMI\n}\n";
  const auto d = check(src, fake_javac());
  EXPECT_FALSE(d.wrapped);
  ASSERT_EQ(d.messages.size(), 1u);
  EXPECT_EQ(d.messages[0].line, 2);
}

TEST(External, FileNamedAfterPublicClass) {
  t::TempDir dir;
  const auto log = dir.path() / "args.txt";
  setenv("FAKE_JAVAC_LOG", log.c_str(), 1);
  check("public class Foo { }\n", fake_javac());
  check("void f() { }\n", fake_javac());
  unsetenv("FAKE_JAVAC_LOG");
  const std::string args = t::read_text(log);
  EXPECT_NE(args.find("/Foo.java"), std::string::npos) << args;
  EXPECT_NE(args.find("/Submission.java"), std::string::npos) << args;
}

TEST(External, WarningsDoNotFail) {
  const auto d = check("void f() { } // UNCHECKED\n", fake_javac());
  EXPECT_TRUE(d.ok);
  ASSERT_EQ(d.messages.size(), 1u);
  EXPECT_EQ(d.messages[0].severity, Severity::warning);
}

TEST(External, Timeout) {
  CheckOptions o = fake_javac();
  o.timeout = std::chrono::milliseconds(300);
  EXPECT_THROW(check("// SLEEP_FOREVER\n", o), CompilerTimeout);
}

TEST(Format, MessagesAsLines) {
  CompilerDiagnostics d;
  d.messages = {{3, 5, Severity::error, "';' expected"}};
  EXPECT_EQ(format_messages(d), "line 3: error: ';' expected\n");
}

TEST(Backend, Names) {
  EXPECT_EQ(parse_backend("internal"), Backend::internal_parse);
  EXPECT_EQ(parse_backend(to_string(Backend::external_javac)), Backend::external_javac);
  EXPECT_THROW(parse_backend("gcc"), std::invalid_argument);
}
