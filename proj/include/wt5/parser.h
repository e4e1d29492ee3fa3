#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wt5/corpus.h"

namespace wt5 {

struct ParsedPrediction {
  std::string label;
  std::vector<std::string> explanations;

  bool operator==(const ParsedPrediction&) const = default;
};

struct AlignedPrediction {
  std::string label;
  std::vector<Span> matched;         // ordered by (segment, start)
  std::vector<std::string> spurious;  // generated text not found in the input
};

inline constexpr std::string_view kInvalidLabel = "invalid";

// Splits decoder output on " explanation: ". Throws ParseError for blank
// output or an empty piece between separators.
ParsedPrediction parse_prediction(std::string_view raw);

// Greedy leftmost, non-overlapping, case- and whitespace-exact matching of
// each explanation against the example's segments, in task segment order.
AlignedPrediction align_spans(const ParsedPrediction& pred, const Example& e);

// Exact match of the trimmed label against the task's label set, or against
// `choices` for tasks whose labels are their choices. Returns "invalid"
// otherwise.
std::string label_of(const ParsedPrediction& pred, const Task& task,
                     const std::optional<std::vector<std::string>>& choices =
                         std::nullopt);

}  // namespace wt5
