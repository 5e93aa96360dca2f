#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace blindspot::stats {

// Area under the ROC curve as the Mann-Whitney statistic with midranks for
// ties. labels are 0/1; 1 is the positive class. Throws SingleClass.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Step-wise average precision over the score-descending sweep; tied scores
// enter as one block.
double average_precision(std::span<const double> scores, std::span<const int> labels);

// Resampling unit for the pooled-mean bootstrap: a sum over the unit's values
// and how many values contributed.
struct BootstrapUnit {
  double sum = 0.0;
  double count = 0.0;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap for the pooled mean sum(sum)/sum(count): units are
// drawn with replacement, `replicates` times, and the 2.5/97.5 percentiles
// (linear interpolation between order statistics) are returned.
Interval bootstrap_ci(std::span<const BootstrapUnit> units, int replicates, std::uint64_t seed,
                      unsigned threads = 1);
Interval bootstrap_ci(const std::vector<std::vector<double>>& groups, int replicates,
                      std::uint64_t seed, unsigned threads = 1);

// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Student t survival functions. `df` may be non-integer.
double student_t_cdf(double t, double df);
double two_sided_t_pvalue(double t, double df);
double two_sided_normal_pvalue(double z);

struct Correlation {
  double r = 0.0;
  double p = 1.0;
};

// Sample Pearson correlation with a two-sided t-test p-value on n-2 df.
// Throws TooFew (n < 3) or ConstantInput.
Correlation pearson(std::span<const double> x, std::span<const double> y);

// Design for ordinary least squares: numeric covariates plus categorical
// factors, dummy coded with the alphabetically first level dropped.
struct OlsDesign {
  std::vector<std::pair<std::string, std::vector<double>>> covariates;
  std::vector<std::pair<std::string, std::vector<std::string>>> factors;
  bool intercept = true;
};

struct OlsTerm {
  std::string name;
  double beta = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;         // t distribution, n - p df
  double p_normal = 1.0;  // normal approximation
};

struct OlsResult {
  std::vector<OlsTerm> terms;
  double r_squared = 0.0;
  std::int64_t n = 0;
  std::int64_t df_residual = 0;

  const OlsTerm& term(const std::string& name) const;
  std::optional<double> coef(const std::string& name) const;
};

inline constexpr const char* kInterceptTerm = "(Intercept)";

// Least squares via column-pivoted Householder QR with homoskedastic
// standard errors. Throws Underdetermined (n <= columns) or RankDeficient.
OlsResult ols_fit(const OlsDesign& design, std::span<const double> response);

std::string ols_to_csv(const OlsResult& result);

}  // namespace blindspot::stats
