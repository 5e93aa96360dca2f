#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "blindspot/events.hpp"

namespace blindspot {

// Membership rule of a truncation-based decoder. Contrastive search rescores
// the top-k candidates, so its truncation set is the top-k set.
class TruncationPolicy {
 public:
  enum class Kind { kTopK, kTopP, kContrastive };

  static TruncationPolicy top_k(std::int64_t k);
  static TruncationPolicy top_p(double p);
  static TruncationPolicy contrastive(std::int64_t k);

  // Accepts "topk:10", "topp:0.9" and "contrastive:5".
  static TruncationPolicy parse(std::string_view spec);

  Kind kind() const { return kind_; }
  std::int64_t k() const { return k_; }
  double p() const { return p_; }
  bool uses_rank() const { return kind_ != Kind::kTopP; }

  std::string kind_name() const;
  // The k or p value as it appears in reports.
  std::string parameter_string() const;
  std::string to_string() const;

  bool operator==(const TruncationPolicy&) const = default;

 private:
  TruncationPolicy(Kind kind, std::int64_t k, double p) : kind_(kind), k_(k), p_(p) {}

  Kind kind_;
  std::int64_t k_ = 0;
  double p_ = 0.0;
};

// True iff the event's token lies inside the policy's truncation set. For
// top-p the token that first brings the prefix mass to >= p is included.
bool membership(const TokenEvent& event, const TruncationPolicy& policy);

using DocFilter = std::function<bool(const DocRecord&)>;

struct RateEstimate {
  double point = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::int64_t n_tokens = 0;
  std::int64_t n_docs = 0;
  std::string method = "pooled";
};

// Share of `total` events that are excluded, computed as one minus the
// included share. Every pooled rate goes through here so that rates built
// from the same counts agree bit for bit.
inline double excluded_share(std::int64_t excluded, std::int64_t total) {
  return 1.0 - static_cast<double>(total - excluded) / static_cast<double>(total);
}

// Pooled (token-weighted) fraction of events outside the truncation set.
// Throws EmptySelection when the filter keeps no events.
RateEstimate exclusion_rate(const Corpus& corpus, const TruncationPolicy& policy,
                            const DocFilter& filter = {});

inline constexpr int kDefaultBootstrapReplicates = 1000;

// Pooled rate with a percentile bootstrap interval over documents.
RateEstimate exclusion_rate_ci(const Corpus& corpus, const TruncationPolicy& policy, int replicates,
                               std::uint64_t seed, const DocFilter& filter = {},
                               unsigned threads = 1);

struct RankHistogram {
  static constexpr std::size_t kBins = 6;
  static const std::array<std::string_view, kBins> kBinLabels;

  std::array<double, kBins> bin_shares{};
  std::array<std::int64_t, kBins> bin_counts{};
  // Share of events at rank 1; 1 - rank_one_share is the top-1 exclusion rate.
  double rank_one_share = 0.0;
  double median_rank = 0.0;  // lower median
  double mean_rank = 0.0;
  std::int64_t n_tokens = 0;
  std::int64_t n_docs = 0;
  // Set when the median exceeds the mean; heavy-tailed data never trips it.
  bool median_exceeds_mean = false;
};

// Bin index for [1,5], [6,10], [11,20], [21,50], [51,100], >100.
std::size_t rank_bin(std::int64_t rank);

RankHistogram rank_distribution(const Corpus& corpus, const DocFilter& filter = {});

struct OverlapStat {
  double mean_jaccard = 0.0;
  double std_jaccard = 0.0;
  std::int64_t n_positions = 0;
  std::int64_t n_skipped = 0;
  std::int64_t n_docs = 0;
};

// Jaccard overlap |A n B| / |A u B| of two id sets.
double jaccard(std::vector<std::int64_t> a, std::vector<std::int64_t> b);

// Truncation set rebuilt from stored candidates, or nullopt when the stored
// depth cannot decide it.
std::optional<std::vector<std::int64_t>> truncation_set_from_topn(const TokenEvent& event,
                                                                  const TruncationPolicy& policy);

// Per-position Jaccard overlap of two models' truncation sets on the same
// texts. Documents pair by doc_id, events by position.
OverlapStat truncation_overlap(const Corpus& a, const Corpus& b, const TruncationPolicy& policy);

}  // namespace blindspot
