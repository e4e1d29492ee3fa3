#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wt5/corpus.h"
#include "wt5/formatter.h"

namespace wt5 {

// Keeps explanations on exactly `n_keep` annotated examples chosen uniformly
// under `seed`; every other example loses its explanations. Labels, text and
// order are untouched.
std::vector<Example> subsample_explanations(std::vector<Example> examples,
                                            std::size_t n_keep,
                                            std::uint64_t seed);

struct ExplanationPolicy {
  enum class Kind { kAll, kNone, kKeep };
  Kind kind = Kind::kAll;
  std::size_t keep = 0;  // only for kKeep

  // "all", "none" or "keep:N".
  static ExplanationPolicy parse(const std::string& text);
  std::string to_string() const;
};

enum class Rewrite { kNone, kCosEAsNli, kNliFixedChoices };

Rewrite parse_rewrite(const std::string& text);
std::string to_string(Rewrite r);

struct MixtureSource {
  std::string corpus_id;
  ExplanationPolicy policy;
  Rewrite rewrite = Rewrite::kNone;
};

struct MixtureSpec {
  std::vector<MixtureSource> sources;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

using CorpusMap = std::map<std::string, std::vector<Example>>;

std::vector<FormattedPair> build_mixture(const MixtureSpec& spec,
                                         const CorpusMap& corpora);

// Inference-time inputs: every example is asked for an explanation.
std::vector<std::string> request_explanations(
    const std::vector<Example>& examples);

// The CoS-E question becomes an nli premise; choices and label stay.
Example rewrite_cose_as_nli(const Example& e);

// Attaches choices entailment/neutral/contradiction. Idempotent.
Example add_fixed_nli_choices(const Example& e);

Example apply_rewrite(const Example& e, Rewrite r);

// Star polarity for Amazon-style reviews. kFollowExamples maps 4-5 stars to
// positive and 1-2 to negative. kLiteral keeps the inverted mapping
// (1-2 positive, 4-5 negative) for exact replication.
enum class PolarityMap { kFollowExamples, kLiteral };

// Three-star ratings are dropped (nullopt). Throws outside 1..5.
std::optional<std::string> binarize_stars(int stars, PolarityMap map);

// Records {"id", "segments": {"review"}, "stars": 1..5}; 3-star lines are
// dropped.
std::vector<Example> load_star_reviews(const std::filesystem::path& path,
                                       PolarityMap map);

// A mixture config file: {"seed": N, "shuffle": bool, "sources": [{"id",
// "path", "task", "policy", "rewrite"?}]}. Relative paths resolve against
// the config file's directory.
struct MixtureConfig {
  MixtureSpec spec;
  std::map<std::string, std::filesystem::path> paths;
  std::map<std::string, Task> tasks;
};

MixtureConfig load_mixture_config(const std::filesystem::path& path);
CorpusMap load_mixture_corpora(const MixtureConfig& config);

}  // namespace wt5
