#pragma once

// Deterministic syntax-only repair: token insertions and single-token
// substitutions that make a snippet parse, never deletions.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mend::repair {

struct Fix {
  std::string rule_id;
  // Position in the text as it was when the fix was applied.
  int line = 0;
  int col = 0;
  std::size_t offset = 0;
  std::string text;      // inserted or replacement text
  std::string replaced;  // substituted token; empty for insertions
};

struct RuleRepairOutcome {
  std::string repaired_source;
  std::vector<Fix> applied_fixes;
  bool parse_ok_after = false;
};

inline constexpr int kMaxPasses = 3;

/// Rule order per pass: terminate literals, close delimiters, open
/// delimiters, semicolons, keyword case, identifier spelling. Passes repeat
/// while the parse fails and the previous pass changed something.
RuleRepairOutcome repair(std::string_view source);

/// Applies the fixes in reverse, reconstructing the input text.
std::string revert(std::string_view repaired, const std::vector<Fix>& fixes);

}  // namespace mend::repair
