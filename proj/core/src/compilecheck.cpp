#include "mend/compilecheck.hpp"

#include <stdlib.h>

#include <algorithm>
#include <boost/process.hpp>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "mend/javasyn.hpp"

namespace mend::compilecheck {
namespace {

namespace bp = boost::process;
namespace fs = std::filesystem;

using javasyn::TokenKind;

struct TopLevelType {
  bool found = false;
  std::string public_name;
};

TopLevelType find_top_level_type(std::string_view source) {
  TopLevelType out;
  const auto stream = javasyn::tokenize(source);
  std::vector<const javasyn::Token*> toks;
  for (const auto& t : stream.tokens)
    if (t.kind != TokenKind::comment) toks.push_back(&t);
  int depth = 0;
  for (std::size_t k = 0; k < toks.size(); ++k) {
    const auto* t = toks[k];
    if (t->is_sep("{")) ++depth;
    if (t->is_sep("}")) --depth;
    if (depth != 0 || !(t->is_kw("class") || t->is_kw("interface") || t->is_kw("enum"))) continue;
    if (k > 0 && toks[k - 1]->is_sep(".")) continue;
    out.found = true;
    bool is_public = false;
    for (std::size_t m = k; m-- > 0;) {
      const auto* mod = toks[m];
      if (mod->is_kw("public")) is_public = true;
      if (!(mod->is_kw("public") || mod->is_kw("final") || mod->is_kw("abstract") || mod->is_kw("static") ||
            mod->is_kw("strictfp")))
        break;
    }
    if (is_public && k + 1 < toks.size() && toks[k + 1]->kind == TokenKind::identifier) {
      out.public_name = toks[k + 1]->lexeme;
    }
    return out;
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "mend-XXXXXX").string();
    if (!mkdtemp(templ.data())) throw CompileError("cannot create temporary directory");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve_compiler(const std::string& compiler) {
  if (compiler.find('/') != std::string::npos) {
    std::error_code ec;
    const auto st = fs::status(compiler, ec);
    if (ec || !fs::is_regular_file(st)) return {};
    if ((st.permissions() & fs::perms::owner_exec) == fs::perms::none) return {};
    return compiler;
  }
  return bp::search_path(compiler).string();
}

CompilerDiagnostics check_external(std::string_view source, const CheckOptions& options) {
  const std::string exe = resolve_compiler(options.compiler);
  if (exe.empty()) throw CompilerMissing("compiler not found: " + options.compiler);

  const TopLevelType top = find_top_level_type(source);
  const Wrapped wrapped = wrap_snippet(source);
  const std::string class_name = top.public_name.empty() ? std::string(kShellClass) : top.public_name;

  TempDir dir;
  const fs::path file = dir.path() / (class_name + ".java");
  const fs::path out_dir = dir.path() / "classes";
  fs::create_directory(out_dir);
  {
    std::ofstream out(file, std::ios::binary);
    out << wrapped.source;
  }
  std::vector<std::string> args = options.compiler_args;
  args.insert(args.end(), {"-d", out_dir.string(), file.string()});

  const fs::path out_log = dir.path() / "stdout.txt";
  const fs::path err_log = dir.path() / "stderr.txt";
  bp::child child(exe, bp::args(args), bp::std_in < bp::null, bp::std_out > out_log.string(),
                  bp::std_err > err_log.string());
  if (!child.wait_for(options.timeout)) {
    child.terminate();
    throw CompilerTimeout("compiler timed out after " + std::to_string(options.timeout.count()) + " ms");
  }
  const int exit_code = child.exit_code();

  CompilerDiagnostics diag;
  diag.backend = Backend::external_javac;
  diag.wrapped = wrapped.line_offset > 0;
  const std::string output = read_file(err_log) + read_file(out_log);
  diag.messages = parse_javac_output(output, wrapped.line_offset);
  // Errors reported on the shell's closing line belong to the snippet's end.
  const int last_line = 1 + static_cast<int>(std::count(source.begin(), source.end(), '\n')) -
                        (!source.empty() && source.back() == '\n' ? 1 : 0);
  for (auto& m : diag.messages) m.line = std::min(m.line, std::max(1, last_line));
  const bool has_error = std::any_of(diag.messages.begin(), diag.messages.end(),
                                     [](const Message& m) { return m.severity == Severity::error; });
  if (exit_code != 0 && !has_error) {
    Message m;
    m.line = 1;
    m.col = 1;
    const std::string first_line = output.substr(0, output.find('\n'));
    m.text = first_line.empty() ? "compiler exited with status " + std::to_string(exit_code) : first_line;
    diag.messages.push_back(std::move(m));
  }
  diag.ok = exit_code == 0 && !has_error;
  return diag;
}

CompilerDiagnostics check_internal(std::string_view source) {
  CompilerDiagnostics diag;
  diag.backend = Backend::internal_parse;
  for (const auto& d : javasyn::parse(source).diagnostics) {
    diag.messages.push_back({d.line, d.col, Severity::error, d.message});
  }
  diag.ok = diag.messages.empty();
  return diag;
}

}  // namespace

std::string_view to_string(Backend b) {
  return b == Backend::external_javac ? "external_javac" : "internal_parse";
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::error: return "error";
    case Severity::warning: return "warning";
    case Severity::note: return "note";
  }
  return "?";
}

Backend parse_backend(std::string_view s) {
  if (s == "external_javac" || s == "javac" || s == "external") return Backend::external_javac;
  if (s == "internal_parse" || s == "internal") return Backend::internal_parse;
  throw std::invalid_argument("unknown compile backend: " + std::string(s));
}

Wrapped wrap_snippet(std::string_view source) {
  if (find_top_level_type(source).found) return {std::string(source), 0};
  std::string out(kShellHeader);
  out += source;
  if (!source.empty() && source.back() != '\n') out += '\n';
  out += "}\n";
  return {std::move(out), 1};
}

std::vector<Message> parse_javac_output(std::string_view output, int line_offset) {
  static const std::regex header(R"(^(.*?):(\d+): (error|warning|note): (.*)$)");
  std::vector<std::string> lines;
  std::istringstream in{std::string(output)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  std::vector<Message> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    if (!std::regex_match(lines[i], m, header)) continue;
    Message msg;
    msg.line = std::max(1, std::stoi(m[2].str()) - line_offset);
    const std::string kind = m[3].str();
    msg.severity = kind == "error" ? Severity::error : kind == "warning" ? Severity::warning : Severity::note;
    msg.text = m[4].str();
    msg.col = 1;
    // javac echoes the source line, then a caret line marking the column.
    for (std::size_t k = i + 1; k < lines.size() && k <= i + 3; ++k) {
      if (std::regex_match(lines[k], header)) break;
      const auto caret = lines[k].find('^');
      if (caret != std::string::npos && lines[k].find_first_not_of(" \t") == caret) {
        msg.col = static_cast<int>(caret) + 1;
        break;
      }
    }
    out.push_back(std::move(msg));
  }
  return out;
}

bool compiler_available(const std::string& compiler) { return !resolve_compiler(compiler).empty(); }

CompilerDiagnostics check(std::string_view source, const CheckOptions& options) {
  return options.backend == Backend::external_javac ? check_external(source, options) : check_internal(source);
}

std::string format_messages(const CompilerDiagnostics& diag) {
  std::string out;
  for (const auto& m : diag.messages) {
    out += "line " + std::to_string(m.line) + ": " + std::string(to_string(m.severity)) + ": " + m.text + "\n";
  }
  return out;
}

}  // namespace mend::compilecheck
