#include "blindspot/events.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "blindspot/error.hpp"

namespace blindspot {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kMassSlack = 1e-6;
constexpr double kRankOneSlack = 1e-9;

std::string_view rule_for_line(const std::vector<Violation>& v) { return v.front().rule; }

[[noreturn]] void malformed(std::int64_t line_no, const std::string& what) {
  throw LineError(ErrorKind::kMalformedLine, line_no, what);
}

const json& require(const json& obj, const char* key, std::int64_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(line_no, std::string("missing key \"") + key + "\"");
  return *it;
}

std::string get_string(const json& obj, const char* key, std::int64_t line_no) {
  const json& v = require(obj, key, line_no);
  if (!v.is_string()) malformed(line_no, std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::optional<std::string> get_nullable_string(const json& obj, const char* key,
                                               std::int64_t line_no) {
  const json& v = require(obj, key, line_no);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) malformed(line_no, std::string("\"") + key + "\" must be a string or null");
  return v.get<std::string>();
}

double get_double(const json& v, const char* key, std::int64_t line_no) {
  if (!v.is_number()) malformed(line_no, std::string("\"") + key + "\" must be a number");
  return v.get<double>();
}

std::int64_t get_integer(const json& v, const char* key, std::int64_t line_no) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && std::floor(d) == d && std::fabs(d) < 9.0e15) {
      return static_cast<std::int64_t>(d);
    }
  }
  malformed(line_no, std::string("\"") + key + "\" must be an integer");
}

DocRecord parse_doc_header(const json& obj, std::int64_t line_no) {
  const json& schema = require(obj, "schema", line_no);
  if (get_integer(schema, "schema", line_no) != kSchemaVersion) {
    malformed(line_no, "unsupported schema version");
  }
  DocRecord doc;
  doc.doc_id = get_string(obj, "doc_id", line_no);
  const std::string origin = get_string(obj, "origin", line_no);
  auto parsed_origin = parse_origin(origin);
  if (!parsed_origin) malformed(line_no, "unknown origin \"" + origin + "\"");
  doc.origin = *parsed_origin;
  if (auto s = get_nullable_string(obj, "strategy", line_no)) {
    auto strategy = parse_strategy(*s);
    if (!strategy) malformed(line_no, "unknown strategy \"" + *s + "\"");
    doc.strategy = *strategy;
  }
  doc.config = get_nullable_string(obj, "config", line_no);
  doc.dataset = get_string(obj, "dataset", line_no);
  doc.generator = get_nullable_string(obj, "generator", line_no);
  doc.scoring_model = get_string(obj, "scoring_model", line_no);
  doc.tokenizer_id = get_string(obj, "tokenizer_id", line_no);
  if (auto it = obj.find("prompt_in_window"); it != obj.end() && !it->is_null()) {
    if (!it->is_boolean()) malformed(line_no, "\"prompt_in_window\" must be a boolean");
    doc.prompt_in_window = it->get<bool>();
  }
  if (auto it = obj.find("raw_text"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) malformed(line_no, "\"raw_text\" must be a string");
    doc.raw_text = it->get<std::string>();
  }
  return doc;
}

TokenEvent parse_event(const json& obj, std::int64_t line_no) {
  TokenEvent ev;
  ev.position = get_integer(require(obj, "i", line_no), "i", line_no);
  ev.token_id = get_integer(require(obj, "tid", line_no), "tid", line_no);
  ev.surface = get_string(obj, "s", line_no);
  ev.logprob = get_double(require(obj, "lp", line_no), "lp", line_no);
  ev.rank = get_integer(require(obj, "r", line_no), "r", line_no);
  ev.cum_mass_before = get_double(require(obj, "cb", line_no), "cb", line_no);
  if (auto it = obj.find("pos"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) malformed(line_no, "\"pos\" must be a string or null");
    ev.pos_tag = it->get<std::string>();
  }
  if (auto it = obj.find("topn"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) malformed(line_no, "\"topn\" must be an array or null");
    std::vector<std::int64_t> ids;
    ids.reserve(it->size());
    for (const auto& id : *it) ids.push_back(get_integer(id, "topn", line_no));
    ev.topn_ids = std::move(ids);
  }
  if (auto it = obj.find("topn_lp"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) malformed(line_no, "\"topn_lp\" must be an array or null");
    std::vector<double> lps;
    lps.reserve(it->size());
    for (const auto& lp : *it) lps.push_back(get_double(lp, "topn_lp", line_no));
    ev.topn_logprobs = std::move(lps);
  }
  return ev;
}

void check_doc_header(const DocRecord& doc, std::vector<Violation>& out) {
  if (doc.origin == Origin::kHuman && doc.strategy != Strategy::kHuman) {
    out.push_back({doc.doc_id, -1, std::string(rules::kHumanStrategy)});
  }
}

}  // namespace

std::string_view to_string(Origin origin) {
  return origin == Origin::kHuman ? "human" : "machine";
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kBeam: return "beam";
    case Strategy::kContrastive: return "contrastive";
    case Strategy::kTopK: return "topk";
    case Strategy::kTopP: return "topp";
    case Strategy::kTemperature: return "temperature";
    case Strategy::kHuman: return "human";
  }
  return "human";
}

std::optional<Origin> parse_origin(std::string_view text) {
  if (text == "human") return Origin::kHuman;
  if (text == "machine") return Origin::kMachine;
  return std::nullopt;
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  for (Strategy s : {Strategy::kBeam, Strategy::kContrastive, Strategy::kTopK, Strategy::kTopP,
                     Strategy::kTemperature, Strategy::kHuman}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::size_t Corpus::n_tokens() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.events.size();
  return n;
}

void check_event(const TokenEvent& ev, const std::string& doc_id, std::vector<Violation>& out) {
  auto add = [&](std::string_view rule) { out.push_back({doc_id, ev.position, std::string(rule)}); };
  // Comparisons are written so that NaN fails them.
  if (!(ev.logprob <= 0.0)) add(rules::kLogprob);
  if (ev.rank < 1) add(rules::kRank);
  if (ev.token_id < 0) add(rules::kTokenId);
  const bool cb_ok = ev.cum_mass_before >= 0.0 && ev.cum_mass_before < 1.0;
  if (!cb_ok) add(rules::kCumMassRange);
  if (cb_ok && ev.logprob <= 0.0 && !(ev.cum_mass_before + std::exp(ev.logprob) <= 1.0 + kMassSlack)) {
    add(rules::kMassBudget);
  }
  if (ev.rank == 1 && cb_ok && !(ev.cum_mass_before <= kRankOneSlack)) add(rules::kRankOneMass);
  if (ev.topn_ids && ev.rank >= 1 && static_cast<std::size_t>(ev.rank) <= ev.topn_ids->size() &&
      (*ev.topn_ids)[static_cast<std::size_t>(ev.rank - 1)] != ev.token_id) {
    add(rules::kTopNConsistent);
  }
  if (ev.topn_logprobs) {
    bool ok = ev.topn_ids && ev.topn_ids->size() == ev.topn_logprobs->size();
    for (double lp : *ev.topn_logprobs) ok = ok && lp <= 0.0;
    if (!ok) add(rules::kTopNLogprobs);
  }
}

ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport report;
  std::unordered_set<std::string> seen;
  for (const auto& doc : corpus.docs) {
    if (!seen.insert(doc.doc_id).second) {
      report.violations.push_back({doc.doc_id, -1, std::string(rules::kUniqueDocId)});
    }
    check_doc_header(doc, report.violations);
    if (doc.events.empty()) report.violations.push_back({doc.doc_id, -1, std::string(rules::kNonEmpty)});
    for (std::size_t i = 0; i < doc.events.size(); ++i) {
      const auto& ev = doc.events[i];
      if (ev.position != static_cast<std::int64_t>(i)) {
        report.violations.push_back({doc.doc_id, ev.position, std::string(rules::kPositions)});
      }
      check_event(ev, doc.doc_id, report.violations);
    }
  }
  return report;
}

Corpus parse_event_log(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  DocRecord* current = nullptr;
  std::int64_t current_line = 0;
  std::string line;
  std::int64_t line_no = 0;
  bool any_record = false;

  auto close_doc = [&] {
    if (current && current->events.empty()) {
      throw LineError(ErrorKind::kInvariantViolation, current_line,
                      "doc " + current->doc_id + ": " + std::string(rules::kNonEmpty));
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      malformed(line_no, e.what());
    }
    if (!obj.is_object()) malformed(line_no, "record is not a JSON object");
    const std::string kind = get_string(obj, "kind", line_no);
    if (kind == "corpus") {
      if (any_record) malformed(line_no, "corpus header must precede all documents");
      if (get_integer(require(obj, "schema", line_no), "schema", line_no) != kSchemaVersion) {
        malformed(line_no, "unsupported schema version");
      }
      if (auto it = obj.find("meta"); it != obj.end() && !it->is_null()) {
        if (!it->is_object()) malformed(line_no, "\"meta\" must be an object");
        for (auto m = it->begin(); m != it->end(); ++m) {
          if (!m.value().is_string()) malformed(line_no, "meta values must be strings");
          corpus.meta[m.key()] = m.value().get<std::string>();
        }
      }
      any_record = true;
    } else if (kind == "doc") {
      close_doc();
      DocRecord doc = parse_doc_header(obj, line_no);
      std::vector<Violation> v;
      check_doc_header(doc, v);
      if (!v.empty()) {
        throw LineError(ErrorKind::kInvariantViolation, line_no,
                        "doc " + doc.doc_id + ": " + std::string(rule_for_line(v)));
      }
      if (!seen.insert(doc.doc_id).second) {
        throw LineError(ErrorKind::kDuplicateDocId, line_no, "doc_id \"" + doc.doc_id + "\" repeated");
      }
      corpus.docs.push_back(std::move(doc));
      current = &corpus.docs.back();
      current_line = line_no;
      any_record = true;
    } else if (kind == "ev") {
      if (!current) malformed(line_no, "event before any document header");
      TokenEvent ev = parse_event(obj, line_no);
      if (ev.position != static_cast<std::int64_t>(current->events.size())) {
        throw LineError(ErrorKind::kInvariantViolation, line_no,
                        "doc " + current->doc_id + " position " + std::to_string(ev.position) + ": " +
                            std::string(rules::kPositions));
      }
      std::vector<Violation> v;
      check_event(ev, current->doc_id, v);
      if (!v.empty()) {
        throw LineError(ErrorKind::kInvariantViolation, line_no,
                        "doc " + current->doc_id + " position " + std::to_string(ev.position) + ": " +
                            std::string(rule_for_line(v)));
      }
      current->events.push_back(std::move(ev));
    } else {
      malformed(line_no, "unknown record kind \"" + kind + "\"");
    }
  }
  close_doc();
  return corpus;
}

Corpus parse_event_log(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_event_log(in);
}

Corpus read_event_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  try {
    return parse_event_log(in);
  } catch (const LineError& e) {
    throw LineError(e.kind(), e.line_no(), path + ": " + e.what());
  }
}

void write_event_log(const Corpus& corpus, std::ostream& out) {
  auto dump = [](const ordered_json& j) {
    return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
  };
  ordered_json header;
  header["schema"] = corpus.schema_version;
  header["kind"] = "corpus";
  header["meta"] = ordered_json::object();
  for (const auto& [k, v] : corpus.meta) header["meta"][k] = v;
  out << dump(header) << '\n';

  auto nullable = [](const auto& opt) -> ordered_json {
    if (!opt) return nullptr;
    return ordered_json(*opt);
  };

  for (const auto& doc : corpus.docs) {
    ordered_json h;
    h["schema"] = corpus.schema_version;
    h["kind"] = "doc";
    h["doc_id"] = doc.doc_id;
    h["origin"] = to_string(doc.origin);
    h["strategy"] = doc.strategy ? ordered_json(to_string(*doc.strategy)) : ordered_json(nullptr);
    h["config"] = nullable(doc.config);
    h["dataset"] = doc.dataset;
    h["generator"] = nullable(doc.generator);
    h["scoring_model"] = doc.scoring_model;
    h["tokenizer_id"] = doc.tokenizer_id;
    if (doc.prompt_in_window) h["prompt_in_window"] = *doc.prompt_in_window;
    if (doc.raw_text) h["raw_text"] = *doc.raw_text;
    out << dump(h) << '\n';
    for (const auto& ev : doc.events) {
      ordered_json e;
      e["kind"] = "ev";
      e["i"] = ev.position;
      e["tid"] = ev.token_id;
      e["s"] = ev.surface;
      e["lp"] = ev.logprob;
      e["r"] = ev.rank;
      e["cb"] = ev.cum_mass_before;
      e["pos"] = nullable(ev.pos_tag);
      e["topn"] = nullable(ev.topn_ids);
      if (ev.topn_logprobs) e["topn_lp"] = *ev.topn_logprobs;
      out << dump(e) << '\n';
    }
  }
}

std::string write_event_log(const Corpus& corpus) {
  std::ostringstream out;
  write_event_log(corpus, out);
  return out.str();
}

void write_event_log_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  write_event_log(corpus, out);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path);
}

}  // namespace blindspot
