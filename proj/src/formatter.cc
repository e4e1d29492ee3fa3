#include "wt5/formatter.h"

namespace wt5 {

std::string format_input(const Example& e, bool with_explanation) {
  std::string out;
  if (with_explanation) out += kExplainPrefix;
  out += e.task.prefix();
  for (const auto& spec : e.task.segments()) {
    if (!out.empty()) out += ' ';
    if (!spec.keyword.empty()) {
      out += spec.keyword;
      out += ' ';
    }
    out += e.segment_text(spec.name);
  }
  if (e.choices) {
    for (const auto& c : *e.choices) {
      out += " choice: ";
      out += c;
    }
  }
  return out;
}

std::string format_target(const Example& e, bool with_explanation) {
  std::string out = e.label;
  if (with_explanation) {
    for (const auto& text : e.explanation_texts()) {
      out += kExplanationSeparator;
      out += text;
    }
  }
  return out;
}

FormattedPair format_example(const Example& e, bool with_explanation) {
  if (with_explanation && !e.has_explanation()) {
    throw DataError("example " + e.id +
                    " has no explanation but one was requested");
  }
  return {format_input(e, with_explanation),
          format_target(e, with_explanation), with_explanation};
}

std::vector<FormattedPair> format_corpus(const std::vector<Example>& examples,
                                         const std::vector<bool>& explain) {
  if (explain.size() != examples.size()) {
    throw DataError("explanation policy has " + std::to_string(explain.size()) +
                    " flags for " + std::to_string(examples.size()) +
                    " examples");
  }
  std::vector<FormattedPair> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    try {
      out.push_back(format_example(examples[i], explain[i]));
    } catch (const DataError& ex) {
      throw DataError("example " + examples[i].id + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace wt5
