#pragma once

// Compilability checks through an external Java compiler or the internal
// parser, with diagnostics reported in snippet coordinates.

#include <chrono>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mend::compilecheck {

enum class Backend { external_javac, internal_parse };
enum class Severity { error, warning, note };

std::string_view to_string(Backend b);
std::string_view to_string(Severity s);
Backend parse_backend(std::string_view s);

struct Message {
  int line = 0;
  int col = 0;
  Severity severity = Severity::error;
  std::string text;
};

struct CompilerDiagnostics {
  bool ok = false;
  std::vector<Message> messages;
  Backend backend = Backend::internal_parse;
  bool wrapped = false;
};

/// The synthetic shell is one line, so wrapped code starts on line 2.
inline constexpr std::string_view kShellClass = "Submission";
inline constexpr std::string_view kShellHeader = "import java.util.*; public class Submission {\n";

struct Wrapped {
  std::string source;
  int line_offset = 0;
};

/// Wraps bare methods/statements in the shell class; sources that already
/// declare a top-level class, interface or enum are returned unchanged.
Wrapped wrap_snippet(std::string_view source);

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CompilerMissing : public CompileError {
 public:
  using CompileError::CompileError;
};
class CompilerTimeout : public CompileError {
 public:
  using CompileError::CompileError;
};

struct CheckOptions {
  Backend backend = Backend::internal_parse;
  // Executable name (looked up on PATH) or path.
  std::string compiler = "javac";
  std::vector<std::string> compiler_args;
  std::chrono::milliseconds timeout{30000};
};

/// Throws CompilerMissing / CompilerTimeout for the external backend.
CompilerDiagnostics check(std::string_view source, const CheckOptions& options = {});

/// Parses `<file>:<line>: error: <msg>` diagnostics (plus the caret line
/// for the column), shifting lines by -line_offset and clamping to >= 1.
std::vector<Message> parse_javac_output(std::string_view output, int line_offset);

/// Whether `compiler` resolves to an executable.
bool compiler_available(const std::string& compiler);

/// "line 3: error: ';' expected" per message, newline separated.
std::string format_messages(const CompilerDiagnostics& diag);

}  // namespace mend::compilecheck
