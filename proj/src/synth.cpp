#include "blindspot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blindspot/error.hpp"
#include "blindspot/format.hpp"
#include "blindspot/random.hpp"

namespace blindspot::synth {
namespace {

constexpr double kSumTolerance = 1e-12;

void check_distribution(const std::vector<double>& probs, const char* what) {
  if (probs.empty()) throw Error(ErrorKind::kInvalidArgument, std::string(what) + " is empty");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::kInvalidArgument, std::string(what) + " has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) > kSumTolerance) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + " sums to " + format_double(sum));
  }
}

std::vector<double> normalized_zipf(std::size_t n, double exponent) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(static_cast<double>(i + 1), -exponent);
  // Sum smallest-first for a tighter total.
  double total = 0.0;
  for (std::size_t i = n; i-- > 0;) total += w[i];
  for (double& x : w) x /= total;
  return w;
}

// Inverse-CDF sampler over a fixed distribution.
class Sampler {
 public:
  explicit Sampler(const std::vector<double>& probs) : cdf_(probs.size()) {
    std::partial_sum(probs.begin(), probs.end(), cdf_.begin());
    last_positive_ = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) last_positive_ = i;
    }
  }

  std::size_t draw(SplitMix64& rng) const {
    const double u = uniform01(rng) * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = static_cast<std::size_t>(it - cdf_.begin());
    return std::min(idx, last_positive_);
  }

 private:
  std::vector<double> cdf_;
  std::size_t last_positive_;
};

DocRecord make_doc(const SynthModel& model, const Sampler& sampler, std::int64_t tokens,
                   std::uint64_t seed, const std::string& doc_id, const SynthOptions& options) {
  DocRecord doc;
  doc.doc_id = doc_id;
  doc.origin = Origin::kHuman;
  doc.strategy = Strategy::kHuman;
  doc.dataset = "synthetic";
  doc.scoring_model = model.description();
  doc.tokenizer_id = "synth-v" + std::to_string(model.vocab_size());
  doc.events.reserve(static_cast<std::size_t>(tokens));

  const auto& probs = model.probs();
  const auto& cum = model.cum_mass_before();
  const std::size_t depth = std::min(options.topn_depth, model.vocab_size());
  std::vector<std::int64_t> topn(depth);
  std::iota(topn.begin(), topn.end(), 0);
  std::vector<double> topn_lp(depth);
  for (std::size_t i = 0; i < depth; ++i) topn_lp[i] = std::log(probs[i]);

  SplitMix64 rng(seed);
  for (std::int64_t t = 0; t < tokens; ++t) {
    const std::size_t id = sampler.draw(rng);
    TokenEvent ev;
    ev.position = t;
    ev.token_id = static_cast<std::int64_t>(id);
    ev.surface = (t == 0 ? "w" : " w") + std::to_string(id);
    ev.logprob = std::log(probs[id]);
    ev.rank = static_cast<std::int64_t>(id) + 1;
    ev.cum_mass_before = cum[id];
    if (depth > 0) {
      ev.topn_ids = topn;
      if (options.store_topn_logprobs) ev.topn_logprobs = topn_lp;
    }
    doc.events.push_back(std::move(ev));
  }
  return doc;
}

}  // namespace

SynthModel::SynthModel(std::vector<double> probs, std::uint64_t seed) : probs_(std::move(probs)), seed_(seed) {
  check_distribution(probs_, "model probabilities");
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (!(probs_[i] > 0.0)) throw Error(ErrorKind::kInvalidArgument, "model probabilities must be positive");
    if (i > 0 && probs_[i] > probs_[i - 1]) {
      throw Error(ErrorKind::kInvalidArgument, "model probabilities must be sorted descending");
    }
  }
  cum_before_.resize(probs_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    cum_before_[i] = std::min(acc, std::nextafter(1.0, 0.0));
    acc += probs_[i];
  }
}

HumanDist::HumanDist(std::vector<double> probs) : probs_(std::move(probs)) {
  check_distribution(probs_, "human probabilities");
}

SynthModel make_zipf_model(std::int64_t vocab_size, double exponent, std::uint64_t seed) {
  if (vocab_size < 2) throw Error(ErrorKind::kInvalidArgument, "vocabulary needs at least 2 tokens");
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) {
    throw Error(ErrorKind::kInvalidArgument, "zipf exponent must be finite and >= 0");
  }
  SynthModel model(normalized_zipf(static_cast<std::size_t>(vocab_size), exponent), seed);
  model.set_description("zipf(V=" + std::to_string(vocab_size) + ",s=" + format_double(exponent) + ")");
  return model;
}

HumanDist make_zipf_human(std::span<const std::int64_t> id_order, double exponent) {
  const auto weights = normalized_zipf(id_order.size(), exponent);
  std::vector<double> probs(id_order.size(), 0.0);
  std::vector<bool> seen(id_order.size(), false);
  for (std::size_t i = 0; i < id_order.size(); ++i) {
    const auto id = id_order[i];
    if (id < 0 || static_cast<std::size_t>(id) >= probs.size() || seen[static_cast<std::size_t>(id)]) {
      throw Error(ErrorKind::kInvalidArgument, "id order is not a permutation");
    }
    seen[static_cast<std::size_t>(id)] = true;
    probs[static_cast<std::size_t>(id)] = weights[i];
  }
  return HumanDist(std::move(probs));
}

Corpus generate_synthetic_corpus(const SynthModel& model, const HumanDist& human, std::int64_t tokens,
                                 std::uint64_t seed, const SynthOptions& options) {
  return generate_synthetic_corpus(model, human, tokens, 1, seed, options);
}

Corpus generate_synthetic_corpus(const SynthModel& model, const HumanDist& human, std::int64_t tokens,
                                 std::int64_t docs, std::uint64_t seed, const SynthOptions& options) {
  if (model.vocab_size() != human.vocab_size()) {
    throw Error(ErrorKind::kDimensionMismatch, "model and human distributions differ in vocabulary size");
  }
  if (tokens < 1) throw Error(ErrorKind::kInvalidArgument, "need at least one token per document");
  if (docs < 1) throw Error(ErrorKind::kInvalidArgument, "need at least one document");
  const Sampler sampler(human.probs());
  Corpus corpus;
  corpus.meta["generator"] = "synth";
  corpus.meta["rng"] = std::string(kRngName) + "/inverse-cdf";
  corpus.meta["seed"] = std::to_string(seed);
  corpus.meta["model"] = model.description();
  for (std::int64_t d = 0; d < docs; ++d) {
    const std::string id = docs == 1 ? options.doc_id : options.doc_id + "-" + std::to_string(d);
    const std::uint64_t doc_seed = docs == 1 ? seed : stream_seed(seed, static_cast<std::uint64_t>(d));
    corpus.docs.push_back(make_doc(model, sampler, tokens, doc_seed, id, options));
  }
  return corpus;
}

double analytic_exclusion(const SynthModel& model, const HumanDist& human, const TruncationPolicy& policy) {
  if (model.vocab_size() != human.vocab_size()) {
    throw Error(ErrorKind::kDimensionMismatch, "model and human distributions differ in vocabulary size");
  }
  if (policy.kind() == TruncationPolicy::Kind::kContrastive) {
    throw Error(ErrorKind::kUnsupportedPolicy, "analytic exclusion covers top-k and top-p only");
  }
  const auto& cum = model.cum_mass_before();
  const auto& h = human.probs();
  double excluded = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const bool inside = policy.uses_rank() ? static_cast<std::int64_t>(i) < policy.k() : cum[i] < policy.p();
    if (!inside) excluded += h[i];
  }
  return excluded;
}

}  // namespace blindspot::synth
