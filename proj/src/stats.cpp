#include "blindspot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include "blindspot/error.hpp"
#include "blindspot/format.hpp"
#include "blindspot/parallel.hpp"
#include "blindspot/random.hpp"

namespace blindspot::stats {
namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "scores and labels differ in length");
  }
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::kInvalidArgument, "labels must be 0 or 1");
    if (std::isnan(scores[i])) throw Error(ErrorKind::kInvalidArgument, "score is NaN");
    (labels[i] ? c.pos : c.neg)++;
  }
  if (c.pos == 0 || c.neg == 0) throw Error(ErrorKind::kSingleClass, "both classes must be present");
  return c;
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_binary(scores, labels);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t m = i; m < j; ++m) {
      if (labels[idx[m]]) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(c.pos);
  const double nn = static_cast<double>(c.neg);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const auto idx = order_descending(scores);
  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / static_cast<double>(c.pos);
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorKind::kEmptySelection, "quantile of empty data");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(std::span<const BootstrapUnit> units, int replicates, std::uint64_t seed,
                      unsigned threads) {
  if (units.empty()) throw Error(ErrorKind::kEmptySelection, "no bootstrap units");
  if (replicates < 1) throw Error(ErrorKind::kInvalidArgument, "replicates must be positive");
  const std::size_t n = units.size();
  std::vector<double> stats(static_cast<std::size_t>(replicates));
  parallel_for(stats.size(), threads, [&](std::size_t b) {
    SplitMix64 rng(stream_seed(seed, b));
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& u = units[uniform_index(rng, n)];
      sum += u.sum;
      count += u.count;
    }
    stats[b] = count > 0.0 ? sum / count : 0.0;
  });
  std::sort(stats.begin(), stats.end());
  return {quantile_sorted(stats, 0.025), quantile_sorted(stats, 0.975)};
}

Interval bootstrap_ci(const std::vector<std::vector<double>>& groups, int replicates,
                      std::uint64_t seed, unsigned threads) {
  std::vector<BootstrapUnit> units;
  units.reserve(groups.size());
  for (const auto& g : groups) {
    units.push_back({std::accumulate(g.begin(), g.end(), 0.0), static_cast<double>(g.size())});
  }
  return bootstrap_ci(units, replicates, seed, threads);
}

double student_t_cdf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * boost::math::ibeta(df / 2.0, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

double two_sided_t_pvalue(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

double two_sided_normal_pvalue(double z) {
  if (std::isnan(z)) return 1.0;
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kDimensionMismatch, "x and y differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorKind::kTooFew, "pearson needs at least 3 points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::kConstantInput, "pearson input is constant");
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::fabs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    c.p = two_sided_t_pvalue(c.r * std::sqrt(df / (1.0 - c.r * c.r)), df);
  }
  return c;
}

const OlsTerm& OlsResult::term(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t;
  }
  throw Error(ErrorKind::kInvalidArgument, "no term named " + name);
}

std::optional<double> OlsResult::coef(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t.beta;
  }
  return std::nullopt;
}

OlsResult ols_fit(const OlsDesign& design, std::span<const double> response) {
  const std::size_t n = response.size();
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  if (design.intercept) {
    names.emplace_back(kInterceptTerm);
    columns.emplace_back(n, 1.0);
  }
  for (const auto& [name, values] : design.covariates) {
    if (values.size() != n) throw Error(ErrorKind::kDimensionMismatch, "covariate " + name + " has wrong length");
    names.push_back(name);
    columns.push_back(values);
  }
  for (const auto& [name, values] : design.factors) {
    if (values.size() != n) throw Error(ErrorKind::kDimensionMismatch, "factor " + name + " has wrong length");
    const std::set<std::string> levels(values.begin(), values.end());
    for (auto it = std::next(levels.begin(), levels.empty() ? 0 : 1); it != levels.end(); ++it) {
      names.push_back(name + "[" + *it + "]");
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = values[i] == *it ? 1.0 : 0.0;
      columns.push_back(std::move(col));
    }
  }
  const std::size_t p = columns.size();
  if (p == 0) throw Error(ErrorKind::kInvalidArgument, "design has no columns");
  if (n <= p) {
    throw Error(ErrorKind::kUnderdetermined,
                std::to_string(n) + " observations for " + std::to_string(p) + " columns");
  }

  Eigen::MatrixXd X(n, p);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) X(i, j) = columns[j][i];
  }
  const Eigen::Map<const Eigen::VectorXd> y(response.data(), static_cast<Eigen::Index>(n));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (static_cast<std::size_t>(qr.rank()) < p) {
    throw Error(ErrorKind::kRankDeficient,
                "design rank " + std::to_string(qr.rank()) + " < " + std::to_string(p) + " columns");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;
  const double sse = resid.squaredNorm();
  const double ybar = y.mean();
  const double sst = (y.array() - ybar).square().sum();

  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_perm = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  const Eigen::MatrixXd cov = perm * cov_perm * perm.transpose();

  OlsResult out;
  out.n = static_cast<std::int64_t>(n);
  out.df_residual = static_cast<std::int64_t>(n - p);
  const double sigma2 = sse / static_cast<double>(n - p);
  // A constant response is fitted exactly; report it as fully explained.
  out.r_squared = sst > 0.0 ? std::clamp(1.0 - sse / sst, 0.0, 1.0) : 1.0;
  for (std::size_t j = 0; j < p; ++j) {
    OlsTerm t;
    t.name = names[j];
    t.beta = beta(static_cast<Eigen::Index>(j));
    t.se = std::sqrt(std::max(0.0, sigma2 * cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))));
    if (t.se > 0.0) {
      t.t = t.beta / t.se;
    } else {
      t.t = t.beta == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), t.beta);
    }
    t.p = two_sided_t_pvalue(t.t, static_cast<double>(n - p));
    t.p_normal = two_sided_normal_pvalue(t.t);
    out.terms.push_back(std::move(t));
  }
  return out;
}

std::string ols_to_csv(const OlsResult& result) {
  std::string out = csv_row({"term", "beta", "se", "p"});
  for (const auto& t : result.terms) {
    out += csv_row({t.name, format_double(t.beta), format_double(t.se), format_double(t.p)});
  }
  return out;
}

}  // namespace blindspot::stats
