#include "wt5/parser.h"

#include <algorithm>

#include "wt5/unicode.h"

namespace wt5 {

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view kWs = " \t\r\n\f\v";
  auto b = s.find_first_not_of(kWs);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(kWs);
  return s.substr(b, e - b + 1);
}

}  // namespace

ParsedPrediction parse_prediction(std::string_view raw) {
  if (trim(raw).empty()) throw ParseError("empty prediction");
  ParsedPrediction out;
  std::size_t cut = raw.find(kExplanationSeparator);
  out.label = std::string(trim(raw.substr(0, cut)));
  if (out.label.empty()) throw ParseError("prediction has an empty label");
  while (cut != std::string_view::npos) {
    std::size_t start = cut + kExplanationSeparator.size();
    cut = raw.find(kExplanationSeparator, start);
    std::string_view piece = raw.substr(
        start, cut == std::string_view::npos ? cut : cut - start);
    if (piece.empty()) throw ParseError("empty explanation in prediction");
    out.explanations.emplace_back(piece);
  }
  return out;
}

AlignedPrediction align_spans(const ParsedPrediction& pred, const Example& e) {
  AlignedPrediction out;
  out.label = pred.label;
  for (const auto& text : pred.explanations) {
    bool found = false;
    for (const auto& [name, segment] : e.segments) {
      if (text.empty()) break;
      std::size_t pos = segment.find(text);
      while (pos != std::string::npos) {
        std::size_t start = unicode::char_index(segment, pos);
        std::size_t end = start + unicode::length(text);
        bool overlaps = std::any_of(
            out.matched.begin(), out.matched.end(), [&](const Span& s) {
              return s.segment == name && s.start < end && start < s.end;
            });
        if (!overlaps) {
          out.matched.push_back({name, start, end});
          found = true;
          break;
        }
        pos = segment.find(text, pos + 1);
      }
      if (found) break;
    }
    if (!found) out.spurious.push_back(text);
  }
  std::sort(out.matched.begin(), out.matched.end(),
            [&](const Span& a, const Span& b) {
              auto ia = e.task.segment_index(a.segment).value_or(0);
              auto ib = e.task.segment_index(b.segment).value_or(0);
              return ia != ib ? ia < ib : a.start < b.start;
            });
  return out;
}

std::string label_of(const ParsedPrediction& pred, const Task& task,
                     const std::optional<std::vector<std::string>>& choices) {
  std::string_view label = trim(pred.label);
  const std::vector<std::string>* set = nullptr;
  if (task.labels_from_choices()) {
    if (choices) set = &*choices;
  } else if (task.labels()) {
    set = &*task.labels();
  }
  if (set && std::find(set->begin(), set->end(), label) != set->end()) {
    return std::string(label);
  }
  return std::string(kInvalidLabel);
}

}  // namespace wt5
