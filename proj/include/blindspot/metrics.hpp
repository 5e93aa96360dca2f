#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blindspot/events.hpp"

namespace blindspot {

// Mean natural-log probability of the document's tokens. Throws EmptyDoc.
double predictability(const DocRecord& doc);

struct DiversityScore {
  double value = 100.0;
  // Some n in 2..4 had no n-grams and contributed the neutral factor 1.
  bool short_text = false;
};

inline constexpr const char* kNgramUnit = "word";

// 100 * prod_{n=2..4} unique_n / total_n over the word sequence.
DiversityScore diversity_score(std::span<const std::string> words);
double diversity(std::span<const std::string> words);

// Whitespace segmentation; case and punctuation are kept as-is.
std::vector<std::string> split_words(std::string_view text);

struct FeatureRow {
  std::string doc_id;
  Origin label = Origin::kHuman;
  std::string strategy;
  std::string config;
  std::string dataset;
  std::string generator;
  double predictability = 0.0;
  double diversity = 0.0;
  bool short_text = false;
  // Surface text rebuilt from token surfaces because raw_text was absent.
  bool detokenized = false;
};

// Text used for n-gram counting: raw_text, else the concatenated surfaces.
// Throws MissingSurface when neither yields any characters.
std::string document_text(const DocRecord& doc, bool* detokenized = nullptr);

std::vector<FeatureRow> feature_table(const Corpus& corpus);

// Throws MixedConditioning when documents disagree on whether the prompt was
// in the scoring window (documents that do not say are ignored).
void check_conditioning_consistent(std::span<const Corpus* const> corpora);

std::string features_to_csv(std::span<const FeatureRow> rows);
std::vector<FeatureRow> features_from_csv(std::string_view text);

}  // namespace blindspot
