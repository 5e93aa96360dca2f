#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blindspot {

inline constexpr int kSchemaVersion = 1;

enum class Origin { kHuman, kMachine };

enum class Strategy { kBeam, kContrastive, kTopK, kTopP, kTemperature, kHuman };

std::string_view to_string(Origin origin);
std::string_view to_string(Strategy strategy);
std::optional<Origin> parse_origin(std::string_view text);
std::optional<Strategy> parse_strategy(std::string_view text);

// One scored token position. Ranks and cumulative mass follow the global tie
// rule: probability descending, then ascending token id.
struct TokenEvent {
  std::int64_t position = 0;
  std::int64_t token_id = 0;
  std::string surface;
  double logprob = 0.0;  // natural log, <= 0
  std::int64_t rank = 1;  // 1-based
  double cum_mass_before = 0.0;  // linear probability mass strictly ahead, in [0, 1)
  std::optional<std::string> pos_tag;
  std::optional<std::vector<std::int64_t>> topn_ids;
  // Log-probabilities matching topn_ids, when the producer stored them.
  std::optional<std::vector<double>> topn_logprobs;

  bool operator==(const TokenEvent&) const = default;
};

struct DocRecord {
  std::string doc_id;
  Origin origin = Origin::kHuman;
  std::optional<std::string> generator;
  std::optional<Strategy> strategy;
  std::optional<std::string> config;
  std::string dataset;
  std::string scoring_model;
  std::string tokenizer_id;
  // Whether the prompt was inside the scoring model's conditioning window.
  std::optional<bool> prompt_in_window;
  std::vector<TokenEvent> events;
  std::optional<std::string> raw_text;

  bool operator==(const DocRecord&) const = default;
};

struct Corpus {
  std::vector<DocRecord> docs;
  int schema_version = kSchemaVersion;
  // Free-form provenance (e.g. the generator algorithm of synthetic logs).
  std::map<std::string, std::string> meta;

  std::size_t n_tokens() const;
  bool operator==(const Corpus&) const = default;
};

struct Violation {
  std::string doc_id;
  std::int64_t position = -1;  // -1 for document-level rules
  std::string rule;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

// Rule identifiers reported in violations.
namespace rules {
inline constexpr std::string_view kLogprob = "logprob<=0";
inline constexpr std::string_view kRank = "rank>=1";
inline constexpr std::string_view kCumMassRange = "cum_mass_before in [0,1)";
inline constexpr std::string_view kMassBudget = "cum_mass_before+exp(logprob)<=1";
inline constexpr std::string_view kRankOneMass = "rank=1 => cum_mass_before=0";
inline constexpr std::string_view kTopNConsistent = "topn_ids[rank-1]=token_id";
inline constexpr std::string_view kTopNLogprobs = "topn_logprobs matches topn_ids";
inline constexpr std::string_view kTokenId = "token_id>=0";
inline constexpr std::string_view kPositions = "positions 0..T-1";
inline constexpr std::string_view kNonEmpty = "T>=1";
inline constexpr std::string_view kHumanStrategy = "origin=human => strategy=human";
inline constexpr std::string_view kUniqueDocId = "doc_id unique";
}  // namespace rules

// Appends violations of the per-event invariants to `out`.
void check_event(const TokenEvent& event, const std::string& doc_id, std::vector<Violation>& out);

// Total validation: never throws, lists every violation.
ValidationReport validate_corpus(const Corpus& corpus);

// Parses a `.bsl.jsonl` stream. Throws LineError (MalformedLine,
// InvariantViolation, DuplicateDocId) naming the 1-based line.
Corpus parse_event_log(std::istream& in);
Corpus parse_event_log(std::string_view text);
Corpus read_event_log(const std::string& path);

void write_event_log(const Corpus& corpus, std::ostream& out);
std::string write_event_log(const Corpus& corpus);
void write_event_log_file(const Corpus& corpus, const std::string& path);

}  // namespace blindspot
