#pragma once

// Edit-distance measures and automated structural/logic preservation
// pre-screens for (original, repaired) program pairs.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mend::metrics {

enum class SpAuto { preserved, changed, undecidable };
enum class LpAuto { syntactic_only, semantic_change, undecidable };

std::string_view to_string(SpAuto v);
std::string_view to_string(LpAuto v);
SpAuto parse_sp_auto(std::string_view s);
LpAuto parse_lp_auto(std::string_view s);

struct RepairMetrics {
  std::size_t raw_levenshtein = 0;
  double normalized_levenshtein = 0.0;
  std::size_t token_edit_count = 0;
  SpAuto sp_auto = SpAuto::undecidable;
  LpAuto lp_auto = LpAuto::undecidable;
  bool compiled = false;
};

/// Character (byte) edit distance with unit-cost insert/delete/substitute.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// levenshtein / max(|a|, |b|); 0 when both are empty.
double normalized_levenshtein(std::string_view a, std::string_view b);

/// Minimal edit count between the non-comment token streams.
std::size_t token_edit_count(std::string_view a, std::string_view b);

/// Character-level alignment of two texts as runs of kept, deleted and
/// inserted bytes. Concatenating equal+deleted spans yields `a`;
/// equal+inserted spans yields `b`.
struct DiffSpan {
  enum class Op { equal, insert, remove };
  Op op = Op::equal;
  std::string text;
};
std::vector<DiffSpan> char_diff(std::string_view a, std::string_view b);
std::string_view to_string(DiffSpan::Op op);

/// Logic-preservation pre-screen: syntactic_only iff every token-level edit
/// is a delimiter/separator insertion, a keyword case fix, a literal
/// termination, or a respelling to a declared identifier within distance 2.
LpAuto classify_edits(std::string_view original, std::string_view repaired);

/// Structural-preservation pre-screen via control-flow skeleton equality.
SpAuto sp_check(std::string_view original, std::string_view repaired);

RepairMetrics compute(std::string_view original, std::string_view repaired, bool compiled);

}  // namespace mend::metrics
