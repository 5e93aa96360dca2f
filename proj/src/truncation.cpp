#include "blindspot/truncation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_map>

#include "blindspot/error.hpp"
#include "blindspot/format.hpp"
#include "blindspot/stats.hpp"

namespace blindspot {
namespace {

bool keep(const DocFilter& filter, const DocRecord& doc) { return !filter || filter(doc); }

struct Tally {
  std::int64_t excluded = 0;
  std::int64_t total = 0;
};

Tally tally_doc(const DocRecord& doc, const TruncationPolicy& policy) {
  Tally t;
  for (const auto& ev : doc.events) {
    if (!membership(ev, policy)) ++t.excluded;
  }
  t.total = static_cast<std::int64_t>(doc.events.size());
  return t;
}

}  // namespace

TruncationPolicy TruncationPolicy::top_k(std::int64_t k) {
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "top-k needs k >= 1");
  return {Kind::kTopK, k, 0.0};
}

TruncationPolicy TruncationPolicy::top_p(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "top-p needs 0 < p <= 1");
  return {Kind::kTopP, 0, p};
}

TruncationPolicy TruncationPolicy::contrastive(std::int64_t k) {
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "contrastive needs k >= 1");
  return {Kind::kContrastive, k, 0.0};
}

TruncationPolicy TruncationPolicy::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorKind::kInvalidArgument, "policy must look like topk:K or topp:P, got \"" + std::string(spec) + "\"");
  }
  const std::string_view name = spec.substr(0, colon);
  const std::string_view value = spec.substr(colon + 1);
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if (name == "topk" || name == "contrastive") {
    std::int64_t k = 0;
    auto res = std::from_chars(first, last, k);
    if (res.ec != std::errc() || res.ptr != last) {
      throw Error(ErrorKind::kInvalidArgument, "bad k in \"" + std::string(spec) + "\"");
    }
    return name == "topk" ? top_k(k) : contrastive(k);
  }
  if (name == "topp") {
    double p = 0.0;
    auto res = std::from_chars(first, last, p);
    if (res.ec != std::errc() || res.ptr != last) {
      throw Error(ErrorKind::kInvalidArgument, "bad p in \"" + std::string(spec) + "\"");
    }
    return top_p(p);
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown policy \"" + std::string(name) + "\"");
}

std::string TruncationPolicy::kind_name() const {
  switch (kind_) {
    case Kind::kTopK: return "topk";
    case Kind::kTopP: return "topp";
    case Kind::kContrastive: return "contrastive";
  }
  return "topk";
}

std::string TruncationPolicy::parameter_string() const {
  return kind_ == Kind::kTopP ? format_double(p_) : std::to_string(k_);
}

std::string TruncationPolicy::to_string() const { return kind_name() + ":" + parameter_string(); }

bool membership(const TokenEvent& event, const TruncationPolicy& policy) {
  if (policy.uses_rank()) return event.rank <= policy.k();
  return event.cum_mass_before < policy.p();
}

RateEstimate exclusion_rate(const Corpus& corpus, const TruncationPolicy& policy, const DocFilter& filter) {
  RateEstimate est;
  std::int64_t excluded = 0;
  for (const auto& doc : corpus.docs) {
    if (!keep(filter, doc)) continue;
    const Tally t = tally_doc(doc, policy);
    excluded += t.excluded;
    est.n_tokens += t.total;
    ++est.n_docs;
  }
  if (est.n_tokens == 0) throw Error(ErrorKind::kEmptySelection, "no events selected");
  est.point = excluded_share(excluded, est.n_tokens);
  return est;
}

RateEstimate exclusion_rate_ci(const Corpus& corpus, const TruncationPolicy& policy, int replicates,
                               std::uint64_t seed, const DocFilter& filter, unsigned threads) {
  if (replicates < 100) throw Error(ErrorKind::kInvalidArgument, "bootstrap needs at least 100 replicates");
  std::vector<stats::BootstrapUnit> units;
  RateEstimate est;
  std::int64_t excluded = 0;
  for (const auto& doc : corpus.docs) {
    if (!keep(filter, doc)) continue;
    const Tally t = tally_doc(doc, policy);
    if (t.total == 0) continue;
    units.push_back({static_cast<double>(t.excluded), static_cast<double>(t.total)});
    excluded += t.excluded;
    est.n_tokens += t.total;
    ++est.n_docs;
  }
  if (est.n_docs < 2) throw Error(ErrorKind::kTooFewDocs, "document bootstrap needs at least 2 documents");
  est.point = excluded_share(excluded, est.n_tokens);
  const stats::Interval ci = stats::bootstrap_ci(units, replicates, seed, threads);
  // Percentile intervals need not bracket the point estimate; widen to keep
  // ci_low <= point <= ci_high.
  est.ci_low = std::min(ci.low, est.point);
  est.ci_high = std::max(ci.high, est.point);
  est.method = "doc-bootstrap-percentile";
  return est;
}

const std::array<std::string_view, RankHistogram::kBins> RankHistogram::kBinLabels = {
    "[1,5]", "[6,10]", "[11,20]", "[21,50]", "[51,100]", ">100"};

std::size_t rank_bin(std::int64_t rank) {
  if (rank <= 5) return 0;
  if (rank <= 10) return 1;
  if (rank <= 20) return 2;
  if (rank <= 50) return 3;
  if (rank <= 100) return 4;
  return 5;
}

RankHistogram rank_distribution(const Corpus& corpus, const DocFilter& filter) {
  RankHistogram h;
  std::vector<std::int64_t> ranks;
  std::int64_t rank_one = 0;
  long double sum = 0.0L;
  for (const auto& doc : corpus.docs) {
    if (!keep(filter, doc)) continue;
    ++h.n_docs;
    for (const auto& ev : doc.events) {
      ranks.push_back(ev.rank);
      ++h.bin_counts[rank_bin(ev.rank)];
      rank_one += ev.rank == 1;
      sum += static_cast<long double>(ev.rank);
    }
  }
  if (ranks.empty()) throw Error(ErrorKind::kEmptySelection, "no events selected");
  h.n_tokens = static_cast<std::int64_t>(ranks.size());
  for (std::size_t b = 0; b < RankHistogram::kBins; ++b) {
    h.bin_shares[b] = static_cast<double>(h.bin_counts[b]) / static_cast<double>(h.n_tokens);
  }
  h.rank_one_share = static_cast<double>(rank_one) / static_cast<double>(h.n_tokens);
  const auto mid = ranks.begin() + static_cast<std::ptrdiff_t>((ranks.size() - 1) / 2);
  std::nth_element(ranks.begin(), mid, ranks.end());
  h.median_rank = static_cast<double>(*mid);
  h.mean_rank = static_cast<double>(sum / static_cast<long double>(ranks.size()));
  h.median_exceeds_mean = h.median_rank > h.mean_rank;
  return h;
}

double jaccard(std::vector<std::int64_t> a, std::vector<std::int64_t> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::int64_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

std::optional<std::vector<std::int64_t>> truncation_set_from_topn(const TokenEvent& event,
                                                                  const TruncationPolicy& policy) {
  if (!event.topn_ids) return std::nullopt;
  const auto& ids = *event.topn_ids;
  if (policy.uses_rank()) {
    const auto k = static_cast<std::size_t>(policy.k());
    if (ids.size() < k) return std::nullopt;
    return std::vector<std::int64_t>(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  }
  if (!event.topn_logprobs || event.topn_logprobs->size() != ids.size()) return std::nullopt;
  std::vector<std::int64_t> set;
  double mass = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!(mass < policy.p())) return set;
    set.push_back(ids[i]);
    mass += std::exp((*event.topn_logprobs)[i]);
  }
  if (mass >= policy.p()) return set;
  return std::nullopt;  // stored candidates never reach p
}

OverlapStat truncation_overlap(const Corpus& a, const Corpus& b, const TruncationPolicy& policy) {
  std::unordered_map<std::string, const DocRecord*> by_id;
  for (const auto& doc : b.docs) by_id.emplace(doc.doc_id, &doc);

  OverlapStat out;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& da : a.docs) {
    auto it = by_id.find(da.doc_id);
    if (it == by_id.end()) continue;
    const DocRecord& db = *it->second;
    if (da.tokenizer_id != db.tokenizer_id) {
      throw Error(ErrorKind::kTokenizerMismatch, "doc " + da.doc_id + ": tokenizer " + da.tokenizer_id +
                                                     " vs " + db.tokenizer_id);
    }
    ++out.n_docs;
    const std::size_t common = std::min(da.events.size(), db.events.size());
    out.n_skipped += static_cast<std::int64_t>(std::max(da.events.size(), db.events.size()) - common);
    for (std::size_t i = 0; i < common; ++i) {
      const TokenEvent& ea = da.events[i];
      const TokenEvent& eb = db.events[i];
      if (!ea.topn_ids || !eb.topn_ids) {
        throw Error(ErrorKind::kMissingTopN, "doc " + da.doc_id + " position " + std::to_string(i) +
                                                 " has no candidate list");
      }
      if (ea.token_id != eb.token_id) {
        ++out.n_skipped;
        continue;
      }
      auto sa = truncation_set_from_topn(ea, policy);
      auto sb = truncation_set_from_topn(eb, policy);
      if (!sa || !sb) {
        ++out.n_skipped;
        continue;
      }
      const double j = jaccard(std::move(*sa), std::move(*sb));
      sum += j;
      sum_sq += j * j;
      ++out.n_positions;
    }
  }
  if (out.n_docs == 0) throw Error(ErrorKind::kNoAlignedDocs, "no doc_id appears in both corpora");
  if (out.n_positions > 0) {
    const double n = static_cast<double>(out.n_positions);
    out.mean_jaccard = std::clamp(sum / n, 0.0, 1.0);
    out.std_jaccard = std::sqrt(std::max(0.0, sum_sq / n - out.mean_jaccard * out.mean_jaccard));
  }
  return out;
}

}  // namespace blindspot
