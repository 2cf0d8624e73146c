#include "recaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "recaudit/errors.hpp"

namespace recaudit::stats {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(Errc::NonFiniteInput, std::string(what) + " contains a non-finite value");
  }
}

std::vector<double> sorted_copy(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Median of sorted[first, first+count).
double median_of(const std::vector<double>& sorted, std::size_t first, std::size_t count) {
  const std::size_t mid = first + count / 2;
  if (count % 2 == 1) return sorted[mid];
  return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

double pearson_on(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) fail(Errc::DegenerateVariance, "constant input to correlation");
  return sxy / std::sqrt(sxx * syy);
}

double spearman_exact_pvalue(const std::vector<double>& rx, const std::vector<double>& ry,
                             double rho_obs) {
  const std::size_t n = rx.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  std::vector<double> cx(n), cy(n);
  double sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cx[i] = rx[i] - mx;
    cy[i] = ry[i] - my;
    sxx += cx[i] * cx[i];
    syy += cy[i] * cy[i];
  }
  const double denom = std::sqrt(sxx * syy);
  const double target = std::abs(rho_obs) * denom - 1e-9 * denom;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t total = 0, hits = 0;
  std::sort(idx.begin(), idx.end());
  do {
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) num += cx[i] * cy[idx[i]];
    if (std::abs(num) >= target) ++hits;
    ++total;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double mean(std::span<const double> values) {
  if (values.empty()) fail(Errc::EmptyInput, "mean of empty sample");
  require_finite(values, "mean input");
  // Neumaier-compensated sum: unlike plain Kahan, the correction also survives
  // addends larger in magnitude than the running sum (e.g. {1e16, 1, -1e16}).
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return (sum + comp) / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) fail(Errc::TooFewSamples, "variance needs at least 2 values");
  const double m = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return acc / static_cast<double>(values.size() - 1);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(Errc::InvalidSpec, "spearman inputs differ in length");
  if (x.size() < 3) fail(Errc::TooFewPairs, "spearman needs at least 3 pairs");
  require_finite(x, "spearman x");
  require_finite(y, "spearman y");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  SpearmanResult r;
  r.n = x.size();
  r.rho = pearson_on(rx, ry);
  const double n = static_cast<double>(r.n);
  if (r.n <= 10) {
    r.p_value = spearman_exact_pvalue(rx, ry, r.rho);
  } else if (std::abs(r.rho) >= 1.0 - 1e-15) {
    r.p_value = 0.0;
  } else {
    const double t = r.rho * std::sqrt((n - 2.0) / (1.0 - r.rho * r.rho));
    r.p_value = two_sided_t_pvalue(t, n - 2.0);
  }
  return r;
}

KsResult ks_test(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(Errc::EmptyInput, "ks_test needs non-empty samples");
  require_finite(a, "ks_test a");
  require_finite(b, "ks_test b");
  const std::vector<double> sa = sorted_copy(a);
  const std::vector<double> sb = sorted_copy(b);
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.d = d;
  r.n_a = sa.size();
  r.n_b = sb.size();
  const double ne = na * nb / (na + nb);
  r.p_value = kolmogorov_q(std::sqrt(ne) * d);
  return r;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) fail(Errc::TooFewSamples, "cohens_d needs n >= 2 per group");
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
  if (pooled <= 0.0) fail(Errc::ZeroPooledVariance, "pooled variance is zero");
  return (mean(a) - mean(b)) / std::sqrt(pooled);
}

Quartiles quartiles(std::span<const double> values) {
  if (values.size() < 4) fail(Errc::TooFewSamples, "quartiles need at least 4 values");
  require_finite(values, "quartiles input");
  const std::vector<double> s = sorted_copy(values);
  const std::size_t n = s.size();
  const std::size_t half = n / 2;
  Quartiles q;
  q.q1 = median_of(s, 0, half);
  q.q3 = median_of(s, (n + 1) / 2, half);
  return q;
}

IqrShift iqr_shift(std::span<const double> a, std::span<const double> b) {
  const Quartiles qa = quartiles(a);
  const Quartiles qb = quartiles(b);
  IqrShift r;
  r.iqr_a = qa.q3 - qa.q1;
  r.iqr_b = qb.q3 - qb.q1;
  const double lo = std::max(qa.q1, qb.q1);
  const double hi = std::min(qa.q3, qb.q3);
  const double inter = std::max(0.0, hi - lo);
  const double uni = r.iqr_a + r.iqr_b - inter;
  // Union of width zero means both IQRs collapse to the same point.
  r.overlap_fraction = uni <= 0.0 ? 1.0 : inter / uni;
  return r;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) fail(Errc::EmptySet, "jaccard of two empty sets");
  std::size_t inter = 0;
  for (const auto& v : a) inter += b.count(v);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

OlsFit ols(const std::vector<std::vector<double>>& rows, std::span<const double> y,
           const std::vector<std::string>& names) {
  const std::size_t m = rows.size();
  if (m == 0 || y.size() != m) fail(Errc::EmptyInput, "ols needs matching X rows and y");
  const std::size_t k = rows[0].size();
  if (k == 0 || names.size() != k) fail(Errc::InvalidSpec, "ols term names mismatch design width");
  for (const auto& row : rows) {
    if (row.size() != k) fail(Errc::InvalidSpec, "ragged design matrix");
  }
  if (m < k + 1) fail(Errc::TooFewGroups, "fewer rows than parameters plus one");
  require_finite(y, "ols y");

  // Householder QR on a column-major copy of X; qty accumulates Q'y.
  std::vector<double> a(m * k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) a[j * m + i] = rows[i][j];
  }
  std::vector<double> qty(y.begin(), y.end());

  double max_abs = 0.0;
  for (double v : a) max_abs = std::max(max_abs, std::abs(v));
  const double tol = std::max(max_abs, 1.0) * static_cast<double>(m) *
                     std::numeric_limits<double>::epsilon() * 16.0;

  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0.0;
    for (std::size_t i = j; i < m; ++i) norm += a[j * m + i] * a[j * m + i];
    norm = std::sqrt(norm);
    if (norm <= tol) fail(Errc::RankDeficientDesign, "column " + names[j] + " is dependent");
    double alpha = a[j * m + j] > 0 ? -norm : norm;
    std::vector<double> v(m - j);
    v[0] = a[j * m + j] - alpha;
    for (std::size_t i = j + 1; i < m; ++i) v[i - j] = a[j * m + i];
    double vnorm2 = 0.0;
    for (double t : v) vnorm2 += t * t;
    if (vnorm2 <= tol * tol) {
      a[j * m + j] = alpha;
      for (std::size_t i = j + 1; i < m; ++i) a[j * m + i] = 0.0;
      continue;
    }
    for (std::size_t c = j; c < k; ++c) {
      double dot = 0.0;
      for (std::size_t i = j; i < m; ++i) dot += v[i - j] * a[c * m + i];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = j; i < m; ++i) a[c * m + i] -= f * v[i - j];
    }
    double dot = 0.0;
    for (std::size_t i = j; i < m; ++i) dot += v[i - j] * qty[i];
    const double f = 2.0 * dot / vnorm2;
    for (std::size_t i = j; i < m; ++i) qty[i] -= f * v[i - j];
  }

  for (std::size_t j = 0; j < k; ++j) {
    if (std::abs(a[j * m + j]) <= tol) {
      fail(Errc::RankDeficientDesign, "column " + names[j] + " is dependent");
    }
  }

  std::vector<double> beta(k);
  for (std::size_t j = k; j-- > 0;) {
    double acc = qty[j];
    for (std::size_t c = j + 1; c < k; ++c) acc -= a[c * m + j] * beta[c];
    beta[j] = acc / a[j * m + j];
  }

  double rss = 0.0;
  for (std::size_t i = k; i < m; ++i) rss += qty[i] * qty[i];
  const std::size_t df = m - k;
  const double s2 = rss / static_cast<double>(df);

  // R^{-1} via back-substitution; diag((X'X)^-1)_j = sum_c Rinv[j][c]^2.
  std::vector<double> rinv(k * k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    rinv[c * k + c] = 1.0 / a[c * m + c];
    for (std::size_t j = c; j-- > 0;) {
      double acc = 0.0;
      for (std::size_t l = j + 1; l <= c; ++l) acc += a[l * m + j] * rinv[c * k + l];
      rinv[c * k + j] = -acc / a[j * m + j];
    }
  }

  OlsFit fit;
  fit.residual_df = df;
  fit.terms.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    double diag = 0.0;
    for (std::size_t c = j; c < k; ++c) diag += rinv[c * k + j] * rinv[c * k + j];
    OlsTerm& term = fit.terms[j];
    term.name = names[j];
    term.estimate = beta[j];
    term.std_error = std::sqrt(s2 * diag);
    if (term.std_error > 0.0) {
      term.p_value = two_sided_t_pvalue(term.estimate / term.std_error, static_cast<double>(df));
    } else {
      term.p_value = term.estimate == 0.0 ? 1.0 : 0.0;
    }
  }

  const double my = mean(y);
  double tss = 0.0;
  for (double v : y) tss += (v - my) * (v - my);
  fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 0.0;
  return fit;
}

double linear_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(Errc::InvalidSpec, "linear_slope inputs differ in length");
  if (x.size() < 2) fail(Errc::TooFewPairs, "linear_slope needs at least 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx <= 0.0) fail(Errc::DegenerateVariance, "x has no variance");
  return sxy / sxx;
}

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  const double t = lambda * lambda;
  if (lambda < 1.18) {
    // Theta-series form converges fast for small lambda.
    const double v = std::exp(-9.869604401089358 / (8.0 * t));  // pi^2
    const double cdf = std::sqrt(6.283185307179586) / lambda *
                       (v + std::pow(v, 9.0) + std::pow(v, 25.0) + std::pow(v, 49.0));
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * sign * std::exp(-2.0 * k * k * t);
    q += term;
    if (std::abs(term) < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(q, 0.0, 1.0);
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (df <= 0.0) fail(Errc::InvalidSpec, "t distribution needs df > 0");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - half_tail : half_tail;
}

double two_sided_t_pvalue(double t, double df) {
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

SimilarityReport set_similarity(const std::vector<LabeledSet>& sets) {
  if (sets.size() < 2) fail(Errc::TooFewSamples, "set_similarity needs at least 2 sets");
  for (const auto& s : sets) {
    if (s.ids.empty()) fail(Errc::EmptySet, "empty recommendation set for " + s.preference);
  }
  std::vector<double> within, across_pref, across_cond;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      const auto& a = sets[i];
      const auto& b = sets[j];
      const double sim = jaccard(a.ids, b.ids);
      if (a.preference != b.preference) {
        across_pref.push_back(sim);
      } else if (a.condition == b.condition) {
        within.push_back(sim);
      } else if (a.replicate != b.replicate) {
        // Same-replicate cross-condition pairs replay the same deterministic
        // session; they are excluded to keep the class comparable to within.
        across_cond.push_back(sim);
      }
    }
  }
  auto summarize = [](const std::vector<double>& v, const char* what) {
    if (v.empty()) fail(Errc::EmptyInput, std::string("no pairs for ") + what);
    SimilaritySummary s;
    s.mean = mean(v);
    s.n_pairs = v.size();
    s.sd = v.size() > 1 ? std::sqrt(sample_variance(v)) : 0.0;
    return s;
  };
  SimilarityReport report;
  report.within_group = summarize(within, "within_group");
  report.across_preference = summarize(across_pref, "across_preference");
  report.across_condition = summarize(across_cond, "across_condition");
  return report;
}

}  // namespace recaudit::stats
