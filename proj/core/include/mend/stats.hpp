#pragma once

// Chi-square test of independence, one-way ANOVA and Cohen's kappa, with the
// tail-probability functions they need. Everything here is computed from
// first principles; no external statistics library is involved.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mend::stats {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ContingencyTable {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  // Row-major, rows.size() x cols.size().
  std::vector<std::vector<std::int64_t>> counts;

  // Builds a table with generated labels ("r0", "c0", ...).
  static ContingencyTable from_counts(std::vector<std::vector<std::int64_t>> counts);

  std::int64_t total() const;
  std::int64_t row_sum(std::size_t r) const;
  std::int64_t col_sum(std::size_t c) const;
};

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p = 1.0;
  std::int64_t n = 0;
};

struct AnovaResult {
  double f = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p = 1.0;
};

struct KappaResult {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  std::size_t n = 0;
  // Both raters used a single identical category (pe == 1); kappa is reported as 1.
  bool degenerate = false;
};

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);
/// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_sf(double x, int df);
/// Upper tail of the F distribution.
double f_sf(double f, int df1, int df2);

/// Pearson chi-square test of independence (no continuity correction).
/// Throws StatsError for tables smaller than 2x2, ragged rows, negative
/// counts, or any zero row/column marginal (the message names the label).
ChiSquareResult chi_square(const ContingencyTable& table);

/// One-way ANOVA. Requires >= 2 non-empty groups, n > k, and non-zero
/// within-group variation.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

/// Cohen's kappa over two equally long label vectors.
KappaResult cohen_kappa(std::span<const int> a, std::span<const int> b);
KappaResult cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

/// APA-style p formatting: "p < .001" or "p = .201".
std::string format_p(double p);

}  // namespace mend::stats
