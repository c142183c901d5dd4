#include "mend/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace mend::stats {
namespace {

constexpr int kMaxIterations = 10000;
constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Series expansion of P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kMaxIterations; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz); used for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double clamp_unit(double p) { return std::clamp(p, 0.0, 1.0); }

template <typename T>
KappaResult kappa_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw StatsError("cohen_kappa: label vectors differ in length (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw StatsError("cohen_kappa: no items");

  std::map<T, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++agree;
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  const double n = static_cast<double>(a.size());
  KappaResult out;
  out.n = a.size();
  out.observed_agreement = agree / n;
  double pe = 0.0;
  for (const auto& [label, m] : marginals) pe += (m.first / n) * (m.second / n);
  out.expected_agreement = pe;
  if (pe >= 1.0 - 1e-15) {
    out.kappa = 1.0;
    out.degenerate = true;
    return out;
  }
  out.kappa = (out.observed_agreement - pe) / (1.0 - pe);
  return out;
}

}  // namespace

ContingencyTable ContingencyTable::from_counts(std::vector<std::vector<std::int64_t>> counts) {
  ContingencyTable t;
  for (std::size_t r = 0; r < counts.size(); ++r) t.rows.push_back("r" + std::to_string(r));
  const std::size_t ncols = counts.empty() ? 0 : counts.front().size();
  for (std::size_t c = 0; c < ncols; ++c) t.cols.push_back("c" + std::to_string(c));
  t.counts = std::move(counts);
  return t;
}

std::int64_t ContingencyTable::total() const {
  std::int64_t n = 0;
  for (const auto& row : counts)
    for (auto v : row) n += v;
  return n;
}

std::int64_t ContingencyTable::row_sum(std::size_t r) const {
  std::int64_t s = 0;
  for (auto v : counts.at(r)) s += v;
  return s;
}

std::int64_t ContingencyTable::col_sum(std::size_t c) const {
  std::int64_t s = 0;
  for (const auto& row : counts) s += row.at(c);
  return s;
}

double gamma_p(double a, double x) {
  if (a <= 0.0) throw StatsError("gamma_p: shape must be positive");
  if (x < 0.0) throw StatsError("gamma_p: x must be non-negative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return clamp_unit(gamma_p_series(a, x));
  return clamp_unit(1.0 - gamma_q_fraction(a, x));
}

double gamma_q(double a, double x) {
  if (a <= 0.0) throw StatsError("gamma_q: shape must be positive");
  if (x < 0.0) throw StatsError("gamma_q: x must be non-negative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return clamp_unit(1.0 - gamma_p_series(a, x));
  return clamp_unit(gamma_q_fraction(a, x));
}

double beta_inc(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw StatsError("beta_inc: shape parameters must be positive");
  if (x < 0.0 || x > 1.0) throw StatsError("beta_inc: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return clamp_unit(front * beta_fraction(a, b, x) / a);
  return clamp_unit(1.0 - front * beta_fraction(b, a, 1.0 - x) / b);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw StatsError("chi_square_sf: df must be >= 1");
  if (x <= 0.0) return 1.0;
  return gamma_q(df / 2.0, x / 2.0);
}

double f_sf(double f, int df1, int df2) {
  if (df1 < 1 || df2 < 1) throw StatsError("f_sf: degrees of freedom must be >= 1");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double x = df2 / (df2 + f * df1);
  return beta_inc(df2 / 2.0, df1 / 2.0, x);
}

ChiSquareResult chi_square(const ContingencyTable& table) {
  const std::size_t nr = table.counts.size();
  if (nr < 2) throw StatsError("chi_square: table needs at least 2 rows");
  const std::size_t nc = table.counts.front().size();
  if (nc < 2) throw StatsError("chi_square: table needs at least 2 columns");
  for (std::size_t r = 0; r < nr; ++r) {
    if (table.counts[r].size() != nc) throw StatsError("chi_square: ragged table at row " + std::to_string(r));
    for (auto v : table.counts[r])
      if (v < 0) throw StatsError("chi_square: negative count in row " + std::to_string(r));
  }
  auto row_label = [&](std::size_t r) { return r < table.rows.size() ? table.rows[r] : "#" + std::to_string(r); };
  auto col_label = [&](std::size_t c) { return c < table.cols.size() ? table.cols[c] : "#" + std::to_string(c); };

  std::vector<double> row_sums(nr), col_sums(nc);
  for (std::size_t r = 0; r < nr; ++r) {
    row_sums[r] = static_cast<double>(table.row_sum(r));
    if (row_sums[r] == 0) throw StatsError("chi_square: zero marginal for row '" + row_label(r) + "'");
  }
  for (std::size_t c = 0; c < nc; ++c) {
    col_sums[c] = static_cast<double>(table.col_sum(c));
    if (col_sums[c] == 0) throw StatsError("chi_square: zero marginal for column '" + col_label(c) + "'");
  }
  const double n = static_cast<double>(table.total());

  ChiSquareResult out;
  out.n = table.total();
  out.df = static_cast<int>((nr - 1) * (nc - 1));
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      const double expected = row_sums[r] * col_sums[c] / n;
      const double diff = static_cast<double>(table.counts[r][c]) - expected;
      out.statistic += diff * diff / expected;
    }
  }
  out.p = chi_square_sf(out.statistic, out.df);
  return out;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  const std::size_t k = groups.size();
  if (k < 2) throw StatsError("anova_oneway: need at least 2 groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    if (groups[g].empty()) throw StatsError("anova_oneway: group " + std::to_string(g) + " is empty");
    n += groups[g].size();
    for (double v : groups[g]) grand += v;
  }
  if (n <= k) throw StatsError("anova_oneway: need more observations than groups");
  grand /= static_cast<double>(n);

  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& group : groups) {
    double mean = 0.0;
    for (double v : group) mean += v;
    mean /= static_cast<double>(group.size());
    ssb += static_cast<double>(group.size()) * (mean - grand) * (mean - grand);
    for (double v : group) ssw += (v - mean) * (v - mean);
  }
  if (ssw == 0.0) {
    throw StatsError(ssb == 0.0 ? "anova_oneway: no variation at all; F is undefined"
                                : "anova_oneway: zero within-group variance with unequal means; F is infinite");
  }

  AnovaResult out;
  out.df_between = static_cast<int>(k - 1);
  out.df_within = static_cast<int>(n - k);
  // Round-off can leave a tiny positive SSB for identical group means.
  if (ssb < 1e-12 * (ssb + ssw)) ssb = 0.0;
  out.f = (ssb / out.df_between) / (ssw / out.df_within);
  out.p = f_sf(out.f, out.df_between, out.df_within);
  return out;
}

KappaResult cohen_kappa(std::span<const int> a, std::span<const int> b) { return kappa_impl(a, b); }

KappaResult cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  return kappa_impl(a, b);
}

std::string format_p(double p) {
  if (p < 0.001) return "p < .001";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", p);
  std::string s = buf;
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return "p = " + s;
}

}  // namespace mend::stats
