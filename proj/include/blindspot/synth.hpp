#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blindspot/events.hpp"
#include "blindspot/truncation.hpp"

namespace blindspot::synth {

// Stationary categorical pseudo-model. Token id i has probability probs[i];
// probs are sorted descending, so id order is also the tie-broken rank order.
class SynthModel {
 public:
  SynthModel(std::vector<double> probs, std::uint64_t seed);

  std::size_t vocab_size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  std::uint64_t seed() const { return seed_; }
  // Mass of ids strictly before i: cum_mass_before()[i].
  const std::vector<double>& cum_mass_before() const { return cum_before_; }
  std::string description() const { return description_; }
  void set_description(std::string d) { description_ = std::move(d); }

 private:
  std::vector<double> probs_;
  std::vector<double> cum_before_;
  std::uint64_t seed_;
  std::string description_ = "categorical";
};

// Distribution the synthetic "writer" draws tokens from.
class HumanDist {
 public:
  explicit HumanDist(std::vector<double> probs);

  std::size_t vocab_size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

// probs[i] proportional to (i+1)^-s; s = 0 is uniform. Throws for V < 2.
SynthModel make_zipf_model(std::int64_t vocab_size, double exponent, std::uint64_t seed);

// Zipf(s) weights over ids in the given order; useful for "human" draws that
// disagree with the model's ranking.
HumanDist make_zipf_human(std::span<const std::int64_t> id_order, double exponent);

struct SynthOptions {
  std::string doc_id = "synth";
  // Candidate-list depth stored on each event (0 stores none).
  std::size_t topn_depth = 0;
  bool store_topn_logprobs = false;
};

// One document of `tokens` i.i.d. draws from `human`, scored exactly under
// `model`. Deterministic in (model, human, tokens, seed).
Corpus generate_synthetic_corpus(const SynthModel& model, const HumanDist& human, std::int64_t tokens,
                                 std::uint64_t seed, const SynthOptions& options = {});

// Same, split over `docs` documents of `tokens` events each, doc i seeded from
// sub-stream i.
Corpus generate_synthetic_corpus(const SynthModel& model, const HumanDist& human, std::int64_t tokens,
                                 std::int64_t docs, std::uint64_t seed, const SynthOptions& options);

// Exact population exclusion rate: human mass outside the truncation set.
double analytic_exclusion(const SynthModel& model, const HumanDist& human, const TruncationPolicy& policy);

}  // namespace blindspot::synth
