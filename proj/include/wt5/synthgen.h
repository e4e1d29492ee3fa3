#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "wt5/corpus.h"

namespace wt5::synth {

struct Trigger {
  std::string word;
  bool positive = true;
};

// A synthetic review is a run of filler words with exactly one trigger word
// somewhere strictly inside it. The trigger decides the label; the word
// before it, the trigger and the word after it form the explanation.
struct SynthSpec {
  std::size_t n_examples = 1000;
  std::vector<std::string> fillers;
  std::vector<Trigger> triggers;
  std::size_t min_length = 6;  // words per review, trigger included
  std::size_t max_length = 12;
  std::uint64_t seed = 0;
  std::string id_prefix = "synth";

  static SynthSpec defaults();
  static SynthSpec from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

void validate_spec(const SynthSpec& spec);

struct Generated {
  std::vector<Example> abstractive;  // explanation as text
  std::vector<Example> extractive;   // same examples, explanation as a span
};

Generated generate_both(const SynthSpec& spec);
// Abstractive-explanation sentiment examples.
std::vector<Example> generate(const SynthSpec& spec);

// The one-rule classifier: find the trigger, return its polarity.
std::string rule_label(const SynthSpec& spec, const std::string& review);

}  // namespace wt5::synth
