#pragma once

#include <vector>

#include "wt5/corpus.h"
#include "wt5/metrics.h"
#include "wt5/pairs_io.h"

namespace wt5 {

struct ScoreOptions {
  bool lowercase = false;
  // Score BLEU against every annotated reference position and keep the best
  // corpus score, instead of only the first reference.
  bool max_over_references = false;
};

// Scores decoder outputs against a gold corpus. Every gold id needs exactly
// one prediction; unknown or missing ids are errors naming the id.
// Accuracy is always reported, BLEU when gold explanations are abstractive,
// Token F1 when they are extractive, F1a for multirc.
MetricReport score_predictions(const std::vector<Example>& gold,
                               const std::vector<Prediction>& predictions,
                               const ScoreOptions& options = {});

}  // namespace wt5
