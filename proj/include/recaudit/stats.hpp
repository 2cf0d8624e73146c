#ifndef RECAUDIT_STATS_HPP
#define RECAUDIT_STATS_HPP

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace recaudit::stats {

inline constexpr double kAlpha = 0.05;

// Kahan-compensated mean. Throws EmptyInput / NonFiniteInput.
double mean(std::span<const double> values);

double sample_variance(std::span<const double> values);  // n-1 denominator

// 1-based fractional ranks; ties share the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Two-sided p: exact permutation for n <= 10, t-approximation above.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

// Two-sample Kolmogorov–Smirnov; p from the asymptotic Kolmogorov
// distribution with effective n = n_a*n_b/(n_a+n_b).
KsResult ks_test(std::span<const double> a, std::span<const double> b);

// Pooled-SD standardized mean difference, (n-1)-weighted variances.
double cohens_d(std::span<const double> a, std::span<const double> b);

struct Quartiles {
  double q1 = 0.0;
  double q3 = 0.0;
};

// Median-exclusive halves: odd n drops the middle element before taking the
// median of each half.
Quartiles quartiles(std::span<const double> values);

struct IqrShift {
  double iqr_a = 0.0;
  double iqr_b = 0.0;
  double overlap_fraction = 0.0;  // |intersection| / |union| of the IQR intervals
};

IqrShift iqr_shift(std::span<const double> a, std::span<const double> b);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

struct OlsTerm {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double p_value = 1.0;
};

struct OlsFit {
  std::vector<OlsTerm> terms;
  double r_squared = 0.0;
  std::size_t residual_df = 0;
};

// Householder QR; std errors from s^2 * diag((X'X)^-1); two-sided t p-values.
OlsFit ols(const std::vector<std::vector<double>>& rows, std::span<const double> y,
           const std::vector<std::string>& names);

// Least-squares slope of y on x. Throws TooFewPairs / DegenerateVariance.
double linear_slope(std::span<const double> x, std::span<const double> y);

// Upper tail Q(lambda) = P(K > lambda) of the Kolmogorov distribution.
double kolmogorov_q(double lambda);

double student_t_cdf(double t, double df);
double two_sided_t_pvalue(double t, double df);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

struct LabeledSet {
  std::string preference;
  std::string condition;
  int replicate = 0;
  std::set<std::string> ids;
};

struct SimilaritySummary {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n_pairs = 0;
};

struct SimilarityReport {
  SimilaritySummary within_group;       // same preference, same condition
  SimilaritySummary across_preference;  // different preference
  SimilaritySummary across_condition;   // same preference, different condition & replicate
};

SimilarityReport set_similarity(const std::vector<LabeledSet>& sets);

}  // namespace recaudit::stats

#endif
