#include "blindspot/posanal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "blindspot/error.hpp"
#include "blindspot/format.hpp"

namespace blindspot {
namespace {

constexpr std::array<std::string_view, 6> kContentTags = {"NOUN", "PROPN", "VERB", "ADJ", "ADV", "NUM"};
constexpr std::array<std::string_view, 7> kFunctionTags = {"DET", "ADP", "AUX", "CCONJ", "SCONJ", "PRON", "PART"};

void summarize(PosProfile& profile) {
  std::array<double, 2> rate_sum{0.0, 0.0};
  std::array<int, 2> tag_count{0, 0};
  std::array<std::int64_t, 2> excluded{0, 0};
  std::array<std::int64_t, 2> tokens{0, 0};
  for (const auto& e : profile.entries) {
    if (e.cls == PosClass::kOther) continue;
    const int c = e.cls == PosClass::kContent ? 0 : 1;
    rate_sum[c] += e.exclusion_rate;
    ++tag_count[c];
    excluded[c] += e.excluded_count;
    tokens[c] += e.token_count;
  }
  profile.content_mean.reset();
  profile.function_mean.reset();
  profile.content_weighted.reset();
  profile.function_weighted.reset();
  profile.asymmetry_ratio.reset();
  if (tag_count[0] > 0) profile.content_mean = rate_sum[0] / tag_count[0];
  if (tag_count[1] > 0) profile.function_mean = rate_sum[1] / tag_count[1];
  if (tokens[0] > 0) profile.content_weighted = static_cast<double>(excluded[0]) / static_cast<double>(tokens[0]);
  if (tokens[1] > 0) profile.function_weighted = static_cast<double>(excluded[1]) / static_cast<double>(tokens[1]);
  profile.degenerate = !profile.content_mean || !profile.function_mean;
  if (!profile.degenerate) {
    if (*profile.function_mean > 0.0) {
      profile.asymmetry_ratio = *profile.content_mean / *profile.function_mean;
    } else {
      profile.asymmetry_ratio = std::numeric_limits<double>::infinity();
      profile.degenerate = true;
    }
  }
}

}  // namespace

PosClass classify_pos(std::string_view tag) {
  if (std::find(kContentTags.begin(), kContentTags.end(), tag) != kContentTags.end()) return PosClass::kContent;
  if (std::find(kFunctionTags.begin(), kFunctionTags.end(), tag) != kFunctionTags.end()) return PosClass::kFunction;
  return PosClass::kOther;
}

std::string_view to_string(PosClass cls) {
  switch (cls) {
    case PosClass::kContent: return "content";
    case PosClass::kFunction: return "function";
    case PosClass::kOther: return "other";
  }
  return "other";
}

const PosEntry* PosProfile::find(std::string_view tag) const {
  for (const auto& e : entries) {
    if (e.tag == tag) return &e;
  }
  return nullptr;
}

double PosProfile::token_weighted_rate() const {
  std::int64_t excluded = 0;
  std::int64_t total = 0;
  for (const auto& e : entries) {
    excluded += e.excluded_count;
    total += e.token_count;
  }
  return total > 0 ? excluded_share(excluded, total) : 0.0;
}

PosProfile pos_exclusion_profile(const Corpus& corpus, const TruncationPolicy& policy, const DocFilter& filter) {
  if (policy.kind() == TruncationPolicy::Kind::kContrastive) {
    throw Error(ErrorKind::kUnsupportedPolicy, "POS profiles take top-k or top-p policies");
  }
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;  // tag -> (tokens, excluded)
  PosProfile profile;
  profile.policy = policy;
  for (const auto& doc : corpus.docs) {
    if (filter && !filter(doc)) continue;
    for (const auto& ev : doc.events) {
      if (!ev.pos_tag) {
        ++profile.untagged_tokens;
        continue;
      }
      auto& c = counts[*ev.pos_tag];
      ++c.first;
      if (!membership(ev, policy)) ++c.second;
      ++profile.tagged_tokens;
    }
  }
  if (profile.tagged_tokens == 0) throw Error(ErrorKind::kNoPosTags, "no selected event carries a POS tag");
  for (const auto& [tag, c] : counts) {
    PosEntry e;
    e.tag = tag;
    e.cls = classify_pos(tag);
    e.token_count = c.first;
    e.excluded_count = c.second;
    e.frequency = static_cast<double>(c.first) / static_cast<double>(profile.tagged_tokens);
    e.exclusion_rate = excluded_share(c.second, c.first);
    profile.entries.push_back(std::move(e));
  }
  summarize(profile);
  return profile;
}

stats::Correlation frequency_exclusion_correlation(const PosProfile& profile) {
  std::vector<double> freq;
  std::vector<double> rate;
  for (const auto& e : profile.entries) {
    if (e.token_count == 0) continue;
    freq.push_back(e.frequency);
    rate.push_back(e.exclusion_rate);
  }
  if (freq.size() < 3) throw Error(ErrorKind::kTooFewTags, "correlation needs at least 3 tags");
  return stats::pearson(freq, rate);
}

PosProfile average_profiles(std::span<const PosProfile> profiles) {
  if (profiles.empty()) throw Error(ErrorKind::kEmptySelection, "no profiles to average");
  struct Acc {
    double rate = 0.0;
    double freq = 0.0;
    int n = 0;
    std::int64_t tokens = 0;
    std::int64_t excluded = 0;
  };
  std::map<std::string, Acc> acc;
  PosProfile out;
  out.policy = profiles.front().policy;
  for (const auto& p : profiles) {
    if (!(p.policy == out.policy)) throw Error(ErrorKind::kInvalidArgument, "profiles use different policies");
    out.tagged_tokens += p.tagged_tokens;
    out.untagged_tokens += p.untagged_tokens;
    for (const auto& e : p.entries) {
      auto& a = acc[e.tag];
      a.rate += e.exclusion_rate;
      a.freq += e.frequency;
      ++a.n;
      a.tokens += e.token_count;
      a.excluded += e.excluded_count;
    }
  }
  for (const auto& [tag, a] : acc) {
    PosEntry e;
    e.tag = tag;
    e.cls = classify_pos(tag);
    e.token_count = a.tokens;
    e.excluded_count = a.excluded;
    e.exclusion_rate = a.rate / a.n;
    e.frequency = a.freq / a.n;
    out.entries.push_back(std::move(e));
  }
  summarize(out);
  return out;
}

std::string pos_profile_to_csv(const PosProfile& profile) {
  std::string out = csv_row({"tag", "class", "token_count", "frequency", "exclusion_rate"});
  for (const auto& e : profile.entries) {
    out += csv_row({e.tag, std::string(to_string(e.cls)), std::to_string(e.token_count), format_double(e.frequency),
                    format_double(e.exclusion_rate)});
  }
  return out;
}

}  // namespace blindspot
