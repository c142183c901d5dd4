#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "mend/agents.hpp"

namespace mend::agents {
namespace {

std::string read_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::size_t longest_run(std::string_view text, char c) {
  std::size_t best = 0, run = 0;
  for (char x : text) {
    run = x == c ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

std::string_view to_string(ContextLevel level) { return level == ContextLevel::low ? "low" : "high"; }

std::string_view to_string(Part part) {
  switch (part) {
    case Part::code: return "code";
    case Part::instructions: return "instructions";
    case Part::compiler_message: return "compiler_message";
    case Part::problem_statement: return "problem_statement";
    case Part::fewshot: return "fewshot";
  }
  return "?";
}

ContextLevel parse_context_level(std::string_view s) {
  if (s == "low") return ContextLevel::low;
  if (s == "high") return ContextLevel::high;
  throw std::invalid_argument("unknown context level: " + std::string(s));
}

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.system = "You fix compile errors in Java programs written by beginning programmers.";
  t.instructions =
      "Repair the student's Java code so that it compiles. Make syntax-only changes with minimal edits: "
      "add missing delimiters or semicolons, close literals, and correct misspelled keywords or variable names. "
      "Keep the control flow, identifiers and formatting exactly as the student wrote them. Do not fix logic "
      "errors, complete unfinished code, or restyle anything. Reply with the whole repaired program in one "
      "```java fenced block.";
  t.code_heading = "Student code:";
  t.compiler_heading = "Compiler output:";
  t.statement_heading = "Problem statement:";
  t.fewshot_heading = "Examples:";
  t.fewshot_correct = "Acceptable repair";
  t.fewshot_incorrect = "Unacceptable repair (it rewrites the student's solution)";
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t = defaults();
  const std::pair<const char*, std::string*> files[] = {
      {"system.txt", &t.system},
      {"instructions.txt", &t.instructions},
      {"code_heading.txt", &t.code_heading},
      {"compiler_heading.txt", &t.compiler_heading},
      {"statement_heading.txt", &t.statement_heading},
      {"fewshot_heading.txt", &t.fewshot_heading},
      {"fewshot_correct.txt", &t.fewshot_correct},
      {"fewshot_incorrect.txt", &t.fewshot_incorrect},
  };
  for (const auto& [name, field] : files) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) *field = read_template(path);
  }
  return t;
}

std::string fence(std::string_view code, std::string_view info) {
  const std::string marks(std::max<std::size_t>(3, longest_run(code, '`') + 1), '`');
  std::string out = marks;
  out += info;
  out += '\n';
  out += code;
  out += '\n';
  out += marks;
  out += '\n';
  return out;
}

PromptBundle build_prompt(const corpus::Submission& submission, const corpus::Problem* problem,
                          const compilecheck::CompilerDiagnostics* diag, ContextLevel level,
                          const PromptTemplates& templates) {
  if (level == ContextLevel::high) {
    if (!problem || blank(problem->statement)) throw PromptError("problem statement missing");
    if (!diag) throw PromptError("compiler message missing");
    if (problem->fewshot.empty()) throw PromptError("fewshot missing");
  }

  PromptBundle b;
  b.level = level;
  b.system_text = templates.system;
  b.user_text = templates.instructions + "\n\n" + templates.code_heading + "\n" + fence(submission.source);
  b.included_parts = {Part::instructions, Part::code};
  if (level == ContextLevel::low) return b;

  std::string messages = compilecheck::format_messages(*diag);
  if (messages.empty()) messages = "(no messages)\n";
  b.user_text += "\n" + templates.compiler_heading + "\n" + messages;
  b.user_text += "\n" + templates.statement_heading + "\n" + problem->statement + "\n";
  b.user_text += "\n" + templates.fewshot_heading + "\n";
  for (const auto& ex : problem->fewshot) {
    b.user_text += "\n" + (ex.correct ? templates.fewshot_correct : templates.fewshot_incorrect) + "\n";
    b.user_text += "Before:\n" + fence(ex.broken) + "After:\n" + fence(ex.repaired);
  }
  b.included_parts.insert({Part::compiler_message, Part::problem_statement, Part::fewshot});
  return b;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string prompt_hash(const PromptBundle& bundle) {
  std::string data = bundle.system_text;
  data += '\0';
  data += bundle.user_text;
  return sha256_hex(data);
}

std::optional<std::string> extract_first_fenced_block(std::string_view text) {
  // Walk line by line looking for an opening fence (up to three spaces of
  // indentation, three or more backticks or tildes).
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    const std::size_t line_end = eol == std::string_view::npos ? text.size() : eol;
    std::string_view line = text.substr(pos, line_end - pos);
    const std::size_t indent = line.find_first_not_of(' ');
    if (indent != std::string_view::npos && indent <= 3 && eol != std::string_view::npos) {
      const char mark = line[indent];
      if (mark == '`' || mark == '~') {
        std::size_t n = 0;
        while (indent + n < line.size() && line[indent + n] == mark) ++n;
        const std::string_view info = line.substr(indent + n);
        if (n >= 3 && (mark == '~' || info.find('`') == std::string_view::npos)) {
          // Find the closing fence: same mark, at least n long, nothing else.
          const std::size_t body = eol + 1;
          std::size_t p = body;
          while (p <= text.size()) {
            std::size_t e = text.find('\n', p);
            const std::size_t le = e == std::string_view::npos ? text.size() : e;
            std::string_view l = text.substr(p, le - p);
            if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
            const std::size_t ci = l.find_first_not_of(' ');
            if (ci != std::string_view::npos && ci <= 3 && l[ci] == mark) {
              std::size_t m = 0;
              while (ci + m < l.size() && l[ci + m] == mark) ++m;
              if (m >= n && l.find_first_not_of(" \t", ci + m) == std::string_view::npos) {
                if (p == body) return std::string();
                std::string_view interior = text.substr(body, p - body);
                interior.remove_suffix(1);  // the '\n' before the closing fence
                return std::string(interior);
              }
            }
            if (e == std::string_view::npos) break;
            p = e + 1;
          }
          return std::nullopt;  // unclosed fence
        }
      }
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return std::nullopt;
}

}  // namespace mend::agents
