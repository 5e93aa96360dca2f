#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blindspot/stats.hpp"
#include "blindspot/truncation.hpp"

namespace blindspot {

enum class PosClass { kContent, kFunction, kOther };

// Content: NOUN PROPN VERB ADJ ADV NUM. Function: DET ADP AUX CCONJ SCONJ
// PRON PART. Everything else (PUNCT, SYM, X, INTJ, ...) is "other".
PosClass classify_pos(std::string_view tag);
std::string_view to_string(PosClass cls);

struct PosEntry {
  std::string tag;
  PosClass cls = PosClass::kOther;
  std::int64_t token_count = 0;
  std::int64_t excluded_count = 0;
  double frequency = 0.0;  // share of all tagged tokens
  double exclusion_rate = 0.0;
};

struct PosProfile {
  std::vector<PosEntry> entries;  // sorted by tag
  TruncationPolicy policy = TruncationPolicy::top_k(10);
  std::int64_t tagged_tokens = 0;
  std::int64_t untagged_tokens = 0;
  // Unweighted means over the tags of each class that occur; nullopt when the
  // class is absent.
  std::optional<double> content_mean;
  std::optional<double> function_mean;
  // Token-weighted counterparts.
  std::optional<double> content_weighted;
  std::optional<double> function_weighted;
  // content_mean / function_mean; +inf when the function mean is 0.
  std::optional<double> asymmetry_ratio;
  bool degenerate = false;

  const PosEntry* find(std::string_view tag) const;
  // Pooled exclusion rate over all tagged tokens, i.e. the token-weighted mean
  // of the per-tag rates.
  double token_weighted_rate() const;
};

// Per-tag pooled exclusion rates. Throws NoPosTags or UnsupportedPolicy
// (contrastive).
PosProfile pos_exclusion_profile(const Corpus& corpus, const TruncationPolicy& policy,
                                 const DocFilter& filter = {});

// Pearson correlation between tag frequency and tag exclusion rate over tags
// with nonzero counts. Throws TooFewTags, or ConstantInput from pearson.
stats::Correlation frequency_exclusion_correlation(const PosProfile& profile);

// Unweighted mean of several profiles (e.g. one per scoring model): per-tag
// rates and frequencies averaged over the profiles containing the tag; counts
// are summed. Profiles must share a policy.
PosProfile average_profiles(std::span<const PosProfile> profiles);

std::string pos_profile_to_csv(const PosProfile& profile);

}  // namespace blindspot
