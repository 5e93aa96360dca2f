#include "blindspot/metrics.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "blindspot/error.hpp"
#include "blindspot/format.hpp"

namespace blindspot {
namespace {

struct NgramHash {
  std::size_t operator()(const std::array<std::uint32_t, 4>& g) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto x : g) {
      h ^= x;
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

double parse_number(const std::string& field, const char* column) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw Error(ErrorKind::kMalformedLine, std::string("bad ") + column + " value \"" + field + "\"");
  }
  return v;
}

}  // namespace

double predictability(const DocRecord& doc) {
  if (doc.events.empty()) throw Error(ErrorKind::kEmptyDoc, "doc " + doc.doc_id + " has no events");
  double sum = 0.0;
  for (const auto& ev : doc.events) sum += ev.logprob;
  return sum / static_cast<double>(doc.events.size());
}

DiversityScore diversity_score(std::span<const std::string> words) {
  std::unordered_map<std::string_view, std::uint32_t> vocab;
  std::vector<std::uint32_t> ids;
  ids.reserve(words.size());
  for (const auto& w : words) {
    auto [it, inserted] = vocab.emplace(w, static_cast<std::uint32_t>(vocab.size()));
    ids.push_back(it->second);
  }
  DiversityScore score;
  double product = 1.0;
  for (std::size_t n = 2; n <= 4; ++n) {
    if (ids.size() < n) {
      score.short_text = true;
      continue;
    }
    std::unordered_set<std::array<std::uint32_t, 4>, NgramHash> unique;
    const std::size_t total = ids.size() - n + 1;
    unique.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
      std::array<std::uint32_t, 4> g{0, 0, 0, 0};
      for (std::size_t j = 0; j < n; ++j) g[j] = ids[i + j];
      unique.insert(g);
    }
    product *= static_cast<double>(unique.size()) / static_cast<double>(total);
  }
  score.value = 100.0 * product;
  return score;
}

double diversity(std::span<const std::string> words) { return diversity_score(words).value; }

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string document_text(const DocRecord& doc, bool* detokenized) {
  if (detokenized) *detokenized = false;
  if (doc.raw_text) return *doc.raw_text;
  std::string text;
  for (const auto& ev : doc.events) text += ev.surface;
  if (text.empty()) throw Error(ErrorKind::kMissingSurface, "doc " + doc.doc_id + " has no surface text");
  if (detokenized) *detokenized = true;
  return text;
}

std::vector<FeatureRow> feature_table(const Corpus& corpus) {
  std::vector<FeatureRow> rows;
  rows.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    FeatureRow row;
    row.doc_id = doc.doc_id;
    row.label = doc.origin;
    row.strategy = doc.strategy ? std::string(to_string(*doc.strategy)) : "";
    row.config = doc.config.value_or("");
    row.dataset = doc.dataset;
    row.generator = doc.generator.value_or("");
    row.predictability = predictability(doc);
    const std::string text = document_text(doc, &row.detokenized);
    const auto d = diversity_score(split_words(text));
    row.diversity = d.value;
    row.short_text = d.short_text;
    rows.push_back(std::move(row));
  }
  return rows;
}

void check_conditioning_consistent(std::span<const Corpus* const> corpora) {
  std::optional<bool> seen;
  std::string first_doc;
  for (const Corpus* c : corpora) {
    for (const auto& doc : c->docs) {
      if (!doc.prompt_in_window) continue;
      if (!seen) {
        seen = doc.prompt_in_window;
        first_doc = doc.doc_id;
      } else if (*seen != *doc.prompt_in_window) {
        throw Error(ErrorKind::kMixedConditioning, "doc " + doc.doc_id + " and doc " + first_doc +
                                                       " disagree on prompt_in_window");
      }
    }
  }
}

std::string features_to_csv(std::span<const FeatureRow> rows) {
  std::string out =
      csv_row({"doc_id", "label", "strategy", "config", "dataset", "generator", "predictability", "diversity"});
  for (const auto& r : rows) {
    out += csv_row({r.doc_id, std::string(to_string(r.label)), r.strategy, r.config, r.dataset, r.generator,
                    format_double(r.predictability), format_double(r.diversity)});
  }
  return out;
}

std::vector<FeatureRow> features_from_csv(std::string_view text) {
  const auto table = parse_csv(text);
  if (table.empty()) throw Error(ErrorKind::kMalformedLine, "feature CSV is empty");
  const auto& header = table.front();
  auto column = [&](const char* name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorKind::kMalformedLine, std::string("feature CSV lacks column ") + name);
  };
  const std::size_t c_id = column("doc_id"), c_label = column("label"), c_strategy = column("strategy"),
                    c_config = column("config"), c_dataset = column("dataset"),
                    c_generator = column("generator"), c_pred = column("predictability"),
                    c_div = column("diversity");
  std::vector<FeatureRow> rows;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& f = table[r];
    if (f.size() != header.size()) {
      throw Error(ErrorKind::kMalformedLine, "feature CSV row " + std::to_string(r + 1) + " has " +
                                                 std::to_string(f.size()) + " fields");
    }
    FeatureRow row;
    row.doc_id = f[c_id];
    auto label = parse_origin(f[c_label]);
    if (!label) throw Error(ErrorKind::kMalformedLine, "bad label \"" + f[c_label] + "\"");
    row.label = *label;
    row.strategy = f[c_strategy];
    row.config = f[c_config];
    row.dataset = f[c_dataset];
    row.generator = f[c_generator];
    row.predictability = parse_number(f[c_pred], "predictability");
    row.diversity = parse_number(f[c_div], "diversity");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace blindspot
