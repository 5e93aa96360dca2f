#include "blindspot/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "blindspot/detect.hpp"
#include "blindspot/error.hpp"
#include "blindspot/events.hpp"
#include "blindspot/format.hpp"
#include "blindspot/metrics.hpp"
#include "blindspot/posanal.hpp"
#include "blindspot/random.hpp"
#include "blindspot/stats.hpp"
#include "blindspot/synth.hpp"
#include "blindspot/truncation.hpp"

namespace blindspot::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.3.0";

struct Common {
  std::string out = ".";
  std::string format = "csv";
  unsigned threads = 0;
};

struct Manifest {
  std::string subcommand;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  ordered_json parameters = ordered_json::object();
  std::vector<std::string> outputs;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_manifest(const fs::path& path, const Manifest& m) {
  ordered_json j;
  j["tool"] = "blindspot";
  j["version"] = kVersion;
  j["subcommand"] = m.subcommand;
  j["seed"] = m.seed ? ordered_json(*m.seed) : ordered_json(nullptr);
  j["inputs"] = ordered_json::array();
  for (const auto& in : m.inputs) j["inputs"].push_back({{"path", in}, {"sha256", file_sha256(in)}});
  j["parameters"] = m.parameters;
  j["outputs"] = m.outputs;
  write_text(path, j.dump(2) + "\n");
}

std::optional<Origin> origin_filter(const std::string& origin) {
  if (origin == "any") return std::nullopt;
  auto o = parse_origin(origin);
  if (!o) throw CLI::ValidationError("--origin", "must be human, machine or any");
  return o;
}

DocFilter make_filter(const std::optional<Origin>& origin) {
  if (!origin) return {};
  return [o = *origin](const DocRecord& d) { return d.origin == o; };
}

Corpus load_corpora(const std::vector<std::string>& paths) {
  Corpus merged;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    Corpus c = read_event_log(p);
    for (auto& d : c.docs) {
      if (!ids.insert(d.doc_id).second) {
        throw Error(ErrorKind::kDuplicateDocId, "doc_id \"" + d.doc_id + "\" appears in more than one input");
      }
      merged.docs.push_back(std::move(d));
    }
    for (const auto& [k, v] : c.meta) merged.meta.emplace(k, v);
  }
  return merged;
}

std::vector<TruncationPolicy> parse_policies(const std::vector<std::string>& specs) {
  std::vector<TruncationPolicy> out;
  for (const auto& s : specs) {
    try {
      out.push_back(TruncationPolicy::parse(s));
    } catch (const Error& e) {
      throw CLI::ValidationError("--policy", e.what());
    }
  }
  return out;
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

ordered_json json_or_null(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

fs::path out_dir(const Common& c) { return fs::path(c.out); }

// ---------------------------------------------------------------- exclusion
struct ExclusionArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> policies;
  int ci = 0;
  std::optional<std::uint64_t> seed;
  std::string origin = "human";
};

int run_exclusion(const Common& common, const ExclusionArgs& a, std::ostream& out) {
  if (a.ci > 0 && !a.seed) throw CLI::ValidationError("--seed", "required with --ci");
  const auto policies = parse_policies(a.policies);
  const Corpus corpus = load_corpora(a.inputs);
  const DocFilter filter = make_filter(origin_filter(a.origin));

  std::vector<std::pair<TruncationPolicy, RateEstimate>> rows;
  for (const auto& p : policies) {
    rows.emplace_back(p, a.ci > 0 ? exclusion_rate_ci(corpus, p, a.ci, *a.seed, filter, common.threads)
                                  : exclusion_rate(corpus, p, filter));
  }
  Manifest m;
  m.subcommand = "exclusion";
  m.seed = a.seed;
  m.inputs = a.inputs;
  m.parameters = {{"policies", a.policies}, {"ci_replicates", a.ci}, {"origin", a.origin},
                  {"ci_method", a.ci > 0 ? "doc-bootstrap-percentile" : "none"}, {"format", common.format}};
  const fs::path dir = out_dir(common);
  if (common.format == "json") {
    ordered_json j = ordered_json::array();
    for (const auto& [p, r] : rows) {
      j.push_back({{"policy", p.kind_name()}, {"k_or_p", p.parameter_string()}, {"point", r.point},
                   {"ci_low", json_or_null(r.ci_low)}, {"ci_high", json_or_null(r.ci_high)},
                   {"n_tokens", r.n_tokens}, {"n_docs", r.n_docs}, {"method", r.method}});
    }
    write_text(dir / "exclusion.json", ordered_json{{"rows", j}}.dump(2) + "\n");
    m.outputs.push_back("exclusion.json");
  } else {
    std::string csv = csv_row({"policy", "k_or_p", "point", "ci_low", "ci_high", "n_tokens", "n_docs"});
    for (const auto& [p, r] : rows) {
      csv += csv_row({p.kind_name(), p.parameter_string(), format_double(r.point), opt_double(r.ci_low),
                      opt_double(r.ci_high), std::to_string(r.n_tokens), std::to_string(r.n_docs)});
    }
    write_text(dir / "exclusion.csv", csv);
    m.outputs.push_back("exclusion.csv");
  }
  write_manifest(dir / "manifest.json", m);
  for (const auto& [p, r] : rows) {
    out << p.to_string() << "\t" << format_double(r.point);
    if (r.ci_low) out << "\t[" << format_double(*r.ci_low) << ", " << format_double(*r.ci_high) << "]";
    out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- ranks
struct RanksArgs {
  std::vector<std::string> inputs;
  std::string origin = "human";
};

int run_ranks(const Common& common, const RanksArgs& a, std::ostream& out) {
  const Corpus corpus = load_corpora(a.inputs);
  const auto origin = origin_filter(a.origin);
  std::set<std::string> datasets;
  for (const auto& d : corpus.docs) {
    if (!origin || d.origin == *origin) datasets.insert(d.dataset);
  }
  std::vector<std::pair<std::string, RankHistogram>> rows;
  rows.emplace_back("all", rank_distribution(corpus, make_filter(origin)));
  if (datasets.size() > 1) {
    for (const auto& ds : datasets) {
      rows.emplace_back("dataset=" + ds, rank_distribution(corpus, [&](const DocRecord& d) {
                          return (!origin || d.origin == *origin) && d.dataset == ds;
                        }));
    }
  }
  Manifest m;
  m.subcommand = "ranks";
  m.inputs = a.inputs;
  m.parameters = {{"origin", a.origin}, {"median", "lower"}, {"format", common.format}};
  const fs::path dir = out_dir(common);
  if (common.format == "json") {
    ordered_json j = ordered_json::array();
    for (const auto& [scope, h] : rows) {
      ordered_json bins = ordered_json::object();
      for (std::size_t b = 0; b < RankHistogram::kBins; ++b) bins[std::string(RankHistogram::kBinLabels[b])] = h.bin_shares[b];
      j.push_back({{"scope", scope}, {"bin_shares", bins}, {"median_rank", h.median_rank},
                   {"mean_rank", h.mean_rank}, {"n_tokens", h.n_tokens}, {"n_docs", h.n_docs},
                   {"median_exceeds_mean", h.median_exceeds_mean}});
    }
    write_text(dir / "ranks.json", ordered_json{{"rows", j}}.dump(2) + "\n");
    m.outputs.push_back("ranks.json");
  } else {
    std::string csv = csv_row({"scope", "r1_5", "r6_10", "r11_20", "r21_50", "r51_100", "r_gt100", "median_rank",
                               "mean_rank", "n_tokens", "n_docs"});
    for (const auto& [scope, h] : rows) {
      std::vector<std::string> f{scope};
      for (double s : h.bin_shares) f.push_back(format_double(s));
      f.push_back(format_double(h.median_rank));
      f.push_back(format_double(h.mean_rank));
      f.push_back(std::to_string(h.n_tokens));
      f.push_back(std::to_string(h.n_docs));
      csv += csv_row(f);
    }
    write_text(dir / "ranks.csv", csv);
    m.outputs.push_back("ranks.csv");
  }
  write_manifest(dir / "manifest.json", m);
  const auto& all = rows.front().second;
  out << "tokens " << all.n_tokens << "  median " << format_double(all.median_rank) << "  mean "
      << format_double(all.mean_rank) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- features
struct FeaturesArgs {
  std::vector<std::string> inputs;
  std::string output = "features.csv";
};

int run_features(const Common&, const FeaturesArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<Corpus> corpora;
  for (const auto& p : a.inputs) corpora.push_back(read_event_log(p));
  std::vector<const Corpus*> ptrs;
  for (const auto& c : corpora) ptrs.push_back(&c);
  check_conditioning_consistent(ptrs);

  std::vector<FeatureRow> rows;
  std::set<std::string> ids;
  std::size_t detok = 0;
  std::size_t short_text = 0;
  for (const auto& c : corpora) {
    for (auto& r : feature_table(c)) {
      if (!ids.insert(r.doc_id).second) {
        throw Error(ErrorKind::kDuplicateDocId, "doc_id \"" + r.doc_id + "\" appears in more than one input");
      }
      detok += r.detokenized;
      short_text += r.short_text;
      rows.push_back(std::move(r));
    }
  }
  if (detok > 0) {
    err << "warning: " << detok << " document(s) lack raw_text; diversity uses concatenated token surfaces\n";
  }
  if (short_text > 0) err << "warning: " << short_text << " document(s) shorter than 4 words (short_text)\n";
  const fs::path path(a.output);
  write_text(path, features_to_csv(rows));
  Manifest m;
  m.subcommand = "features";
  m.inputs = a.inputs;
  m.parameters = {{"ngram_unit", kNgramUnit}, {"ngram_orders", {2, 3, 4}}, {"case_sensitive", true},
                  {"short_text_rule", "neutral factor 1"}, {"detokenized_docs", detok},
                  {"short_text_docs", short_text}};
  m.outputs.push_back(path.filename().string());
  write_manifest(fs::path(path.string() + ".manifest.json"), m);
  out << rows.size() << " feature rows -> " << a.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- detect
struct DetectArgs {
  std::string input;
  std::string model = "rf";
  std::optional<std::uint64_t> seed;
  double split = detect::kDefaultTestFraction;
  int trees = detect::kDefaultTrees;
  bool verbose = false;
};

detect::Model fit_model(const std::string& name, std::span<const FeatureRow> train, std::uint64_t seed,
                        int trees, unsigned threads) {
  if (name == "lr") return detect::fit_logistic(train);
  if (name == "nb") return detect::fit_gnb(train);
  return detect::fit_forest(train, seed, {trees, threads});
}

int run_detect(const Common& common, const DetectArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.seed) throw CLI::ValidationError("--seed", "is required");
  const auto rows = features_from_csv(read_text(a.input));

  struct Subset {
    std::string name;
    std::vector<FeatureRow> rows;
  };
  std::vector<Subset> subsets{{"all", rows}};
  std::set<std::string> strategies;
  for (const auto& r : rows) {
    if (r.label == Origin::kMachine) strategies.insert(r.strategy.empty() ? "unknown" : r.strategy);
  }
  if (strategies.size() > 1) {
    for (const auto& s : strategies) {
      Subset sub{"strategy=" + s, {}};
      for (const auto& r : rows) {
        const std::string rs = r.strategy.empty() ? "unknown" : r.strategy;
        if (r.label == Origin::kHuman || rs == s) sub.rows.push_back(r);
      }
      subsets.push_back(std::move(sub));
    }
  }

  struct Result {
    std::string subset;
    std::int64_t n_train;
    std::int64_t n_test;
    detect::EvalReport machine;
    detect::EvalReport human;
  };
  std::vector<Result> results;
  std::optional<detect::Model> main_model;
  for (const auto& sub : subsets) {
    detect::Split split;
    try {
      split = detect::stratified_split(sub.rows, a.split, *a.seed);
    } catch (const Error& e) {
      if (sub.name == "all") throw;
      err << "warning: skipping " << sub.name << ": " << e.what() << "\n";
      continue;
    }
    detect::Model model = fit_model(a.model, split.train, *a.seed, a.trees, common.threads);
    if (const auto* lr = std::get_if<detect::LRModel>(&model); lr && lr->separation_warning) {
      err << "warning: " << sub.name << ": training data are linearly separable; logistic fit did not converge\n";
    }
    results.push_back({sub.name, static_cast<std::int64_t>(split.train.size()),
                       static_cast<std::int64_t>(split.test.size()), detect::evaluate(model, split.test, false),
                       detect::evaluate(model, split.test, true)});
    if (sub.name == "all") main_model = std::move(model);
  }

  Manifest m;
  m.subcommand = "detect";
  m.seed = a.seed;
  m.inputs = {a.input};
  m.parameters = {{"model", a.model}, {"test_fraction", a.split}, {"threshold", detect::kDecisionThreshold},
                  {"positive_class", "machine"}, {"format", common.format}};
  if (a.model == "rf") {
    m.parameters["n_trees"] = a.trees;
    m.parameters["max_features"] = 1;
    m.parameters["max_depth"] = nullptr;
    m.parameters["min_leaf"] = 1;
    m.parameters["bootstrap_size"] = "n_train";
  } else if (a.model == "lr") {
    m.parameters["optimizer"] = "irls";
    m.parameters["tolerance"] = 1e-8;
    m.parameters["max_iterations"] = 100;
    m.parameters["diversity_scale"] = 0.01;
  } else {
    m.parameters["variance_floor_factor"] = 1e-9;
  }
  const fs::path dir = out_dir(common);
  if (common.format == "json") {
    ordered_json j = ordered_json::array();
    for (const auto& r : results) {
      for (const auto* rep : {&r.machine, &r.human}) {
        if (rep == &r.human && !a.verbose) continue;
        j.push_back({{"model", a.model}, {"subset", r.subset}, {"n_train", r.n_train}, {"n_test", r.n_test},
                     {"accuracy", rep->accuracy}, {"precision", rep->precision}, {"recall", rep->recall},
                     {"f1", rep->f1}, {"specificity", rep->specificity}, {"auc_roc", rep->auc_roc},
                     {"auc_pr", rep->auc_pr}, {"tp", rep->tp}, {"fp", rep->fp}, {"fn", rep->fn}, {"tn", rep->tn},
                     {"threshold", rep->threshold}, {"positive_class", rep->positive_class}});
      }
    }
    write_text(dir / "detect.json", ordered_json{{"rows", j}}.dump(2) + "\n");
    m.outputs.push_back("detect.json");
  } else {
    std::string csv = detect::eval_csv_header();
    for (const auto& r : results) {
      csv += detect::eval_csv_row(a.model, r.subset, r.n_train, r.n_test, r.machine);
      if (a.verbose) csv += detect::eval_csv_row(a.model, r.subset, r.n_train, r.n_test, r.human);
    }
    write_text(dir / "detect.csv", csv);
    m.outputs.push_back("detect.csv");
  }
  const std::string model_file = "model_" + a.model + ".json";
  write_text(dir / model_file, detect::model_to_json(*main_model).dump(1) + "\n");
  m.outputs.push_back(model_file);
  write_manifest(dir / "manifest.json", m);
  for (const auto& r : results) {
    out << a.model << "\t" << r.subset << "\tauc_roc " << format_double(r.machine.auc_roc) << "\tf1 "
        << format_double(r.machine.f1) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- overlap
struct OverlapArgs {
  std::string a;
  std::string b;
  std::vector<std::string> policies;
};

int run_overlap(const Common& common, const OverlapArgs& a, std::ostream& out, std::ostream& err) {
  const auto policies = parse_policies(a.policies);
  const Corpus ca = read_event_log(a.a);
  const Corpus cb = read_event_log(a.b);
  std::vector<std::pair<TruncationPolicy, OverlapStat>> rows;
  for (const auto& p : policies) rows.emplace_back(p, truncation_overlap(ca, cb, p));
  Manifest m;
  m.subcommand = "overlap";
  m.inputs = {a.a, a.b};
  m.parameters = {{"policies", a.policies}, {"statistic", "jaccard overlap |A&B|/|A|B|"},
                  {"std", "population"}, {"format", common.format}};
  const fs::path dir = out_dir(common);
  if (common.format == "json") {
    ordered_json j = ordered_json::array();
    for (const auto& [p, s] : rows) {
      j.push_back({{"policy", p.kind_name()}, {"k_or_p", p.parameter_string()}, {"mean_jaccard", s.mean_jaccard},
                   {"std_jaccard", s.std_jaccard}, {"n_positions", s.n_positions}, {"n_skipped", s.n_skipped},
                   {"n_docs", s.n_docs}});
    }
    write_text(dir / "overlap.json", ordered_json{{"rows", j}}.dump(2) + "\n");
    m.outputs.push_back("overlap.json");
  } else {
    std::string csv =
        csv_row({"policy", "k_or_p", "mean_jaccard", "std_jaccard", "n_positions", "n_skipped", "n_docs"});
    for (const auto& [p, s] : rows) {
      csv += csv_row({p.kind_name(), p.parameter_string(), format_double(s.mean_jaccard),
                      format_double(s.std_jaccard), std::to_string(s.n_positions), std::to_string(s.n_skipped),
                      std::to_string(s.n_docs)});
    }
    write_text(dir / "overlap.csv", csv);
    m.outputs.push_back("overlap.csv");
  }
  write_manifest(dir / "manifest.json", m);
  for (const auto& [p, s] : rows) {
    if (s.n_positions == 0) err << "warning: " << p.to_string() << ": no decidable aligned positions\n";
    out << p.to_string() << "\t" << format_double(s.mean_jaccard) << " +- " << format_double(s.std_jaccard)
        << "\t(" << s.n_positions << " positions, " << s.n_skipped << " skipped)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- pos
struct PosArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> policies;
  std::string origin = "human";
  bool by_dataset = false;
};

ordered_json profile_summary(const PosProfile& p) {
  ordered_json j;
  j["policy"] = p.policy.to_string();
  j["tagged_tokens"] = p.tagged_tokens;
  j["untagged_tokens"] = p.untagged_tokens;
  j["content_mean"] = json_or_null(p.content_mean);
  j["function_mean"] = json_or_null(p.function_mean);
  j["content_token_weighted"] = json_or_null(p.content_weighted);
  j["function_token_weighted"] = json_or_null(p.function_weighted);
  j["asymmetry_ratio"] = json_or_null(p.asymmetry_ratio);
  if (p.asymmetry_ratio && std::isinf(*p.asymmetry_ratio)) j["asymmetry_ratio"] = "inf";
  j["degenerate"] = p.degenerate;
  j["token_weighted_rate"] = p.token_weighted_rate();
  try {
    const auto c = frequency_exclusion_correlation(p);
    j["frequency_correlation"] = {{"r", c.r}, {"p", c.p}};
  } catch (const Error& e) {
    j["frequency_correlation"] = {{"error", std::string(to_string(e.kind()))}};
  }
  return j;
}

std::string policy_slug(const TruncationPolicy& p) { return p.kind_name() + "_" + p.parameter_string(); }

int run_pos(const Common& common, const PosArgs& a, std::ostream& out) {
  const auto policies = parse_policies(a.policies);
  const auto origin = origin_filter(a.origin);
  std::vector<Corpus> corpora;
  for (const auto& p : a.inputs) corpora.push_back(read_event_log(p));

  Manifest m;
  m.subcommand = "pos";
  m.inputs = a.inputs;
  m.parameters = {{"policies", a.policies}, {"origin", a.origin}, {"by_dataset", a.by_dataset},
                  {"set_mean", "unweighted over tags"}, {"multi_input", "unweighted mean of per-input profiles"}};
  const fs::path dir = out_dir(common);
  ordered_json summary = ordered_json::array();
  for (const auto& policy : policies) {
    auto profile_of = [&](const DocFilter& filter) {
      std::vector<PosProfile> per_input;
      for (const auto& c : corpora) per_input.push_back(pos_exclusion_profile(c, policy, filter));
      return per_input.size() == 1 ? per_input.front() : average_profiles(per_input);
    };
    const PosProfile profile = profile_of(make_filter(origin));
    const std::string name = "pos_" + policy_slug(policy) + ".csv";
    write_text(dir / name, pos_profile_to_csv(profile));
    m.outputs.push_back(name);
    ordered_json s = profile_summary(profile);
    s["scope"] = "all";
    summary.push_back(s);
    out << policy.to_string() << "\tcontent " << (profile.content_mean ? format_double(*profile.content_mean) : "n/a")
        << "\tfunction " << (profile.function_mean ? format_double(*profile.function_mean) : "n/a") << "\n";
    if (a.by_dataset) {
      std::set<std::string> datasets;
      for (const auto& c : corpora) {
        for (const auto& d : c.docs) datasets.insert(d.dataset);
      }
      for (const auto& ds : datasets) {
        const PosProfile dp = profile_of([&](const DocRecord& d) {
          return (!origin || d.origin == *origin) && d.dataset == ds;
        });
        const std::string dname = "pos_" + policy_slug(policy) + "_" + ds + ".csv";
        write_text(dir / dname, pos_profile_to_csv(dp));
        m.outputs.push_back(dname);
        ordered_json ss = profile_summary(dp);
        ss["scope"] = "dataset=" + ds;
        summary.push_back(ss);
      }
    }
  }
  write_text(dir / "pos_summary.json", ordered_json{{"profiles", summary}}.dump(2) + "\n");
  m.outputs.push_back("pos_summary.json");
  write_manifest(dir / "manifest.json", m);
  return kExitOk;
}

// ---------------------------------------------------------------- effects
struct EffectsArgs {
  std::string input;
  std::string response = "auc";
  std::vector<std::string> covariates{"log_params"};
  std::vector<std::string> factors;
};

int run_effects(const Common& common, const EffectsArgs& a, std::ostream& out) {
  const auto table = parse_csv(read_text(a.input));
  if (table.size() < 2) throw Error(ErrorKind::kEmptySelection, "results table has no data rows");
  const auto& header = table.front();
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorKind::kMalformedLine, "results table lacks column " + name);
  };
  auto numeric = [&](std::size_t col, const std::string& name) {
    std::vector<double> v;
    for (std::size_t r = 1; r < table.size(); ++r) {
      const std::string& s = table[r].at(col);
      double x = 0.0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), x);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(ErrorKind::kMalformedLine, "row " + std::to_string(r + 1) + ": bad " + name + " \"" + s + "\"");
      }
      v.push_back(x);
    }
    return v;
  };
  for (std::size_t r = 1; r < table.size(); ++r) {
    if (table[r].size() != header.size()) {
      throw Error(ErrorKind::kMalformedLine, "results row " + std::to_string(r + 1) + " has wrong field count");
    }
  }
  stats::OlsDesign design;
  for (const auto& c : a.covariates) design.covariates.emplace_back(c, numeric(column(c), c));
  for (const auto& f : a.factors) {
    const std::size_t col = column(f);
    std::vector<std::string> levels;
    for (std::size_t r = 1; r < table.size(); ++r) levels.push_back(table[r][col]);
    design.factors.emplace_back(f, std::move(levels));
  }
  const auto y = numeric(column(a.response), a.response);
  const auto fit = stats::ols_fit(design, y);

  Manifest m;
  m.subcommand = "effects";
  m.inputs = {a.input};
  m.parameters = {{"response", a.response}, {"covariates", a.covariates}, {"factors", a.factors},
                  {"dummy_coding", "drop alphabetically first level"}, {"se", "homoskedastic"},
                  {"p_value", "t distribution, n-p df"}, {"format", common.format}};
  const fs::path dir = out_dir(common);
  if (common.format == "json") {
    ordered_json terms = ordered_json::array();
    for (const auto& t : fit.terms) {
      terms.push_back({{"term", t.name}, {"beta", t.beta}, {"se", t.se}, {"t", json_or_null(t.t)},
                       {"p", t.p}, {"p_normal", t.p_normal}});
    }
    write_text(dir / "effects.json", ordered_json{{"terms", terms}, {"r_squared", fit.r_squared}, {"n", fit.n},
                                                  {"df_residual", fit.df_residual}}
                                             .dump(2) +
                                         "\n");
    m.outputs.push_back("effects.json");
  } else {
    write_text(dir / "effects.csv", stats::ols_to_csv(fit));
    m.outputs.push_back("effects.csv");
  }
  write_manifest(dir / "manifest.json", m);
  for (const auto& t : fit.terms) {
    out << t.name << "\t" << format_double(t.beta) << "\t(se " << format_double(t.se) << ", p "
        << format_double(t.p) << ")\n";
  }
  out << "r_squared\t" << format_double(fit.r_squared) << "\tn " << fit.n << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- synth
struct SynthArgs {
  std::int64_t vocab = 0;
  double zipf = 1.0;
  std::int64_t tokens = 0;
  std::int64_t docs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<double> human_zipf;
  bool human_shuffle = false;
  std::size_t topn = 0;
  bool topn_logprobs = false;
  std::string output;
};

int run_synth(const Common&, const SynthArgs& a, std::ostream& out) {
  if (!a.seed) throw CLI::ValidationError("--seed", "is required");
  const auto model = synth::make_zipf_model(a.vocab, a.zipf, *a.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(a.vocab));
  std::iota(order.begin(), order.end(), 0);
  if (a.human_shuffle) {
    SplitMix64 rng(stream_seed(*a.seed, 0xf00d));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  const auto human = synth::make_zipf_human(order, a.human_zipf.value_or(a.zipf));
  synth::SynthOptions opts;
  opts.topn_depth = a.topn;
  opts.store_topn_logprobs = a.topn_logprobs;
  const Corpus corpus = synth::generate_synthetic_corpus(model, human, a.tokens, a.docs, *a.seed, opts);
  write_event_log_file(corpus, a.output);
  Manifest m;
  m.subcommand = "synth";
  m.seed = a.seed;
  m.parameters = {{"vocab", a.vocab}, {"zipf", a.zipf}, {"tokens", a.tokens}, {"docs", a.docs},
                  {"human_zipf", a.human_zipf.value_or(a.zipf)}, {"human_shuffle", a.human_shuffle},
                  {"topn", a.topn}, {"topn_logprobs", a.topn_logprobs}, {"rng", corpus.meta.at("rng")}};
  m.outputs.push_back(fs::path(a.output).filename().string());
  write_manifest(fs::path(a.output + ".manifest.json"), m);
  out << a.docs << " doc(s) x " << a.tokens << " tokens -> " << a.output << "\n";
  return kExitOk;
}

}  // namespace

std::string version() { return kVersion; }

std::string file_sha256(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (f.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Truncation blind-spot analysis over token-event logs", "blindspot"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;
  auto add_common = [&](CLI::App* sub, bool out_is_dir) {
    if (out_is_dir) sub->add_option("-o,--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--format", common.format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub->add_option("--threads", common.threads, "Worker threads (0 = logical cores)")->capture_default_str();
  };

  ExclusionArgs ex;
  auto* c_ex = app.add_subcommand("exclusion", "Human-token exclusion rates per truncation policy");
  c_ex->add_option("inputs", ex.inputs, "Event logs (.bsl.jsonl)")->required()->check(CLI::ExistingFile);
  c_ex->add_option("--policy", ex.policies, "topk:K | topp:P | contrastive:K (repeatable)")->required();
  c_ex->add_option("--ci", ex.ci, "Bootstrap replicates for a 95% document-bootstrap interval")
      ->check(CLI::Range(100, 10000000));
  c_ex->add_option("--seed", ex.seed, "Random seed");
  c_ex->add_option("--origin", ex.origin, "Documents to include: human, machine or any")->capture_default_str();
  add_common(c_ex, true);

  RanksArgs rk;
  auto* c_rk = app.add_subcommand("ranks", "Distribution of chosen-token ranks");
  c_rk->add_option("inputs", rk.inputs, "Event logs")->required()->check(CLI::ExistingFile);
  c_rk->add_option("--origin", rk.origin, "Documents to include: human, machine or any")->capture_default_str();
  add_common(c_rk, true);

  FeaturesArgs ft;
  auto* c_ft = app.add_subcommand("features", "Predictability and diversity per document");
  c_ft->add_option("inputs", ft.inputs, "Event logs")->required()->check(CLI::ExistingFile);
  c_ft->add_option("-o,--output", ft.output, "Feature CSV path")->capture_default_str();
  add_common(c_ft, false);

  DetectArgs dt;
  auto* c_dt = app.add_subcommand("detect", "Train and evaluate a human/machine classifier");
  c_dt->add_option("features", dt.input, "Feature CSV")->required()->check(CLI::ExistingFile);
  c_dt->add_option("--model", dt.model, "Classifier")->check(CLI::IsMember({"rf", "lr", "nb"}))->capture_default_str();
  c_dt->add_option("--seed", dt.seed, "Random seed (required)");
  c_dt->add_option("--split", dt.split, "Test fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_dt->add_option("--trees", dt.trees, "Forest size")->check(CLI::PositiveNumber)->capture_default_str();
  c_dt->add_flag("--verbose", dt.verbose, "Also report metrics with human as the positive class");
  add_common(c_dt, true);

  OverlapArgs ov;
  auto* c_ov = app.add_subcommand("overlap", "Jaccard overlap of two models' truncation sets");
  c_ov->add_option("a", ov.a, "First event log")->required()->check(CLI::ExistingFile);
  c_ov->add_option("b", ov.b, "Second event log")->required()->check(CLI::ExistingFile);
  c_ov->add_option("--policy", ov.policies, "Truncation policy (repeatable)")->required();
  add_common(c_ov, true);

  PosArgs ps;
  auto* c_ps = app.add_subcommand("pos", "Exclusion rates by part-of-speech tag");
  c_ps->add_option("inputs", ps.inputs, "Event logs (one per scoring model)")->required()->check(CLI::ExistingFile);
  c_ps->add_option("--policy", ps.policies, "Truncation policy (repeatable)")->required();
  c_ps->add_option("--origin", ps.origin, "Documents to include: human, machine or any")->capture_default_str();
  c_ps->add_flag("--by-dataset", ps.by_dataset, "Also write one profile per dataset");
  add_common(c_ps, true);

  EffectsArgs ef;
  auto* c_ef = app.add_subcommand("effects", "OLS of a detection metric on scale and factors");
  c_ef->add_option("results", ef.input, "Results CSV")->required()->check(CLI::ExistingFile);
  c_ef->add_option("--response", ef.response, "Response column")->capture_default_str();
  c_ef->add_option("--covariate", ef.covariates, "Numeric covariate column (repeatable)")->capture_default_str();
  c_ef->add_option("--factors", ef.factors, "Categorical columns")->delimiter(',');
  add_common(c_ef, true);

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "Synthetic event log from a Zipf pseudo-model");
  c_sy->add_option("--vocab", sy.vocab, "Vocabulary size")->required()->check(CLI::Range(2, 100000000));
  c_sy->add_option("--zipf", sy.zipf, "Model Zipf exponent")->check(CLI::NonNegativeNumber)->capture_default_str();
  c_sy->add_option("--tokens", sy.tokens, "Tokens per document")->required()->check(CLI::PositiveNumber);
  c_sy->add_option("--docs", sy.docs, "Number of documents")->check(CLI::PositiveNumber)->capture_default_str();
  c_sy->add_option("--seed", sy.seed, "Random seed (required)");
  c_sy->add_option("--human-zipf", sy.human_zipf, "Zipf exponent of the writer distribution");
  c_sy->add_flag("--human-shuffle", sy.human_shuffle, "Writer ranks tokens in a seeded random order");
  c_sy->add_option("--topn", sy.topn, "Stored candidate-list depth")->capture_default_str();
  c_sy->add_flag("--topn-logprobs", sy.topn_logprobs, "Store candidate log-probabilities");
  c_sy->add_option("-o,--output", sy.output, "Output event log")->required();
  add_common(c_sy, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (*c_ex) return run_exclusion(common, ex, out);
    if (*c_rk) return run_ranks(common, rk, out);
    if (*c_ft) return run_features(common, ft, out, err);
    if (*c_dt) return run_detect(common, dt, out, err);
    if (*c_ov) return run_overlap(common, ov, out, err);
    if (*c_ps) return run_pos(common, ps, out);
    if (*c_ef) return run_effects(common, ef, out);
    if (*c_sy) return run_synth(common, sy, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* failing = &app;
    for (const auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace blindspot::cli
