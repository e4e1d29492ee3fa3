#pragma once

#include <string>
#include <vector>

#include "wt5/corpus.h"

namespace wt5 {

inline constexpr std::string_view kExplainPrefix = "explain ";

struct FormattedPair {
  std::string input_text;
  std::string target_text;
  bool wants_explanation = false;

  bool operator==(const FormattedPair&) const = default;
  auto operator<=>(const FormattedPair&) const = default;
};

// "<prefix> [<keyword>] <text> ... choice: <c1> choice: <c2> ...", optionally
// preceded by "explain ".
std::string format_input(const Example& e, bool with_explanation);

// The label, then " explanation: <text>" per explanation; spans go in input
// order.
std::string format_target(const Example& e, bool with_explanation);

// Throws DataError when asked to explain an example that has no explanation.
FormattedPair format_example(const Example& e, bool with_explanation);

std::vector<FormattedPair> format_corpus(const std::vector<Example>& examples,
                                         const std::vector<bool>& explain);

}  // namespace wt5
