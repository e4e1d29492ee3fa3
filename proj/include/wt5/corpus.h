#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "wt5/errors.h"

namespace wt5 {

struct SegmentSpec {
  std::string name;
  // Serialized before the segment text ("premise:"); empty means the text
  // follows the task prefix directly, as in "sentiment: <review>".
  std::string keyword;

  bool operator==(const SegmentSpec&) const = default;
};

// A task knows how its inputs are laid out and which labels are legal.
// Built-in tasks come from the named factories; anything else goes through
// custom().
class Task {
 public:
  static Task sentiment();
  static Task nli();
  static Task cos_e();
  static Task multirc();
  static Task custom(std::string id, std::string prefix,
                     std::vector<SegmentSpec> segments,
                     std::optional<std::vector<std::string>> labels,
                     bool labels_from_choices);
  // "sentiment", "nli", "cos_e" or "multirc".
  static Task by_name(std::string_view name);
  // {"id":..., "prefix":..., "segments":[{"name","keyword"}], "labels":[...]?,
  //  "labels_from_choices": bool}
  static Task from_json(const nlohmann::json& j);

  const std::string& id() const { return id_; }
  const std::string& prefix() const { return prefix_; }
  const std::vector<SegmentSpec>& segments() const { return segments_; }
  const std::optional<std::vector<std::string>>& labels() const {
    return labels_;
  }
  bool labels_from_choices() const { return labels_from_choices_; }

  std::optional<std::size_t> segment_index(std::string_view name) const;

  bool operator==(const Task&) const = default;

 private:
  std::string id_;
  std::string prefix_;
  std::vector<SegmentSpec> segments_;
  std::optional<std::vector<std::string>> labels_;
  bool labels_from_choices_ = false;
};

// Character offsets count Unicode scalar values; end is exclusive.
struct Span {
  std::string segment;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct AbstractiveText {
  std::string text;

  bool operator==(const AbstractiveText&) const = default;
};

using Explanation = std::variant<AbstractiveText, Span>;

struct Example {
  std::string id;
  Task task;
  // Same order as task.segments().
  std::vector<std::pair<std::string, std::string>> segments;
  std::optional<std::vector<std::string>> choices;
  std::string label;
  std::vector<Explanation> explanations;

  bool has_explanation() const { return !explanations.empty(); }
  const std::string& segment_text(std::string_view name) const;
  // Text an explanation stands for: the abstractive text, or the spanned
  // substring of its segment.
  std::string explanation_text(const Explanation& e) const;
  // Explanation texts in target order (spans sorted by input position).
  std::vector<std::string> explanation_texts() const;

  bool operator==(const Example&) const = default;
};

class ValidationError : public DataError {
 public:
  enum class Kind {
    kEmptyId,
    kMissingSegment,
    kUnexpectedSegment,
    kEmptySegment,
    kInvalidUtf8,
    kEmptyLabel,
    kLabelWhitespace,
    kLabelNotInSet,
    kMissingChoices,
    kEmptyChoice,
    kLabelNotInChoices,
    kEmptyExplanation,
    kNewlineInExplanation,
    kUnknownSpanSegment,
    kSpanBounds,
    kOverlappingSpans,
    kAmbiguousTarget,
  };

  ValidationError(Kind kind, std::string field, const std::string& message)
      : DataError(field + ": " + message),
        kind_(kind),
        field_(std::move(field)) {}

  Kind kind() const { return kind_; }
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

// Separator between a label and each explanation in target text.
inline constexpr std::string_view kExplanationSeparator = " explanation: ";

void validate_example(const Example& e);

Example example_from_json(const nlohmann::json& record, const Task& task);
nlohmann::ordered_json example_to_json(const Example& e);

// Throws DataError prefixed with "line N" for any malformed or invalid line.
std::vector<Example> load_examples(const std::filesystem::path& path,
                                   const Task& task);
std::vector<Example> parse_examples(std::string_view jsonl, const Task& task);
void write_examples(const std::filesystem::path& path,
                    const std::vector<Example>& examples);

}  // namespace wt5
