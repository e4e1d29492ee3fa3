#include "wt5/corpus.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wt5/unicode.h"

namespace wt5 {

using json = nlohmann::json;
using Kind = ValidationError::Kind;

Task Task::sentiment() {
  return custom("sentiment", "sentiment:", {{"review", ""}},
                std::vector<std::string>{"positive", "negative"}, false);
}

Task Task::nli() {
  return custom("nli", "nli",
                {{"hypothesis", "hypothesis:"}, {"premise", "premise:"}},
                std::vector<std::string>{"entailment", "neutral",
                                         "contradiction"},
                false);
}

Task Task::cos_e() {
  return custom("cos_e", "cos_e", {{"question", "question:"}}, std::nullopt,
                true);
}

Task Task::multirc() {
  return custom("multirc", "multirc",
                {{"question", "question:"},
                 {"answer", "answer:"},
                 {"paragraph", "paragraph:"}},
                std::vector<std::string>{"True", "False"}, false);
}

Task Task::custom(std::string id, std::string prefix,
                  std::vector<SegmentSpec> segments,
                  std::optional<std::vector<std::string>> labels,
                  bool labels_from_choices) {
  if (id.empty()) throw DataError("task id must not be empty");
  if (segments.empty()) throw DataError("task " + id + " has no segments");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (segments[i].name == segments[j].name) {
        throw DataError("task " + id + " repeats segment " + segments[i].name);
      }
    }
  }
  if (!labels && !labels_from_choices) {
    throw DataError("task " + id + " needs a label set or choice labels");
  }
  Task t;
  t.id_ = std::move(id);
  t.prefix_ = std::move(prefix);
  t.segments_ = std::move(segments);
  t.labels_ = std::move(labels);
  t.labels_from_choices_ = labels_from_choices;
  return t;
}

Task Task::by_name(std::string_view name) {
  if (name == "sentiment") return sentiment();
  if (name == "nli") return nli();
  if (name == "cos_e") return cos_e();
  if (name == "multirc") return multirc();
  throw DataError("unknown task '" + std::string(name) + "'");
}

Task Task::from_json(const json& j) {
  try {
    std::vector<SegmentSpec> segments;
    for (const auto& s : j.at("segments")) {
      segments.push_back(
          {s.at("name").get<std::string>(), s.value("keyword", std::string())});
    }
    std::optional<std::vector<std::string>> labels;
    if (j.contains("labels")) {
      labels = j.at("labels").get<std::vector<std::string>>();
    }
    std::string id = j.at("id").get<std::string>();
    std::string prefix = j.value("prefix", id);
    return custom(std::move(id), std::move(prefix), std::move(segments),
                  std::move(labels), j.value("labels_from_choices", false));
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad task definition: ") + ex.what());
  }
}

std::optional<std::size_t> Task::segment_index(std::string_view name) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name == name) return i;
  }
  return std::nullopt;
}

const std::string& Example::segment_text(std::string_view name) const {
  for (const auto& [n, text] : segments) {
    if (n == name) return text;
  }
  throw DataError("example " + id + " has no segment " + std::string(name));
}

std::string Example::explanation_text(const Explanation& e) const {
  if (const auto* a = std::get_if<AbstractiveText>(&e)) return a->text;
  const auto& span = std::get<Span>(e);
  return unicode::substr(segment_text(span.segment), span.start, span.end);
}

std::vector<std::string> Example::explanation_texts() const {
  // Extractive explanations are emitted in input order: they fill the span
  // slots of the stored sequence sorted by (segment, start).
  std::vector<const Span*> spans;
  for (const auto& e : explanations) {
    if (const auto* s = std::get_if<Span>(&e)) spans.push_back(s);
  }
  std::stable_sort(spans.begin(), spans.end(), [&](const Span* a, const Span* b) {
    auto ia = task.segment_index(a->segment).value_or(0);
    auto ib = task.segment_index(b->segment).value_or(0);
    return ia != ib ? ia < ib : a->start < b->start;
  });
  std::vector<std::string> out;
  out.reserve(explanations.size());
  std::size_t next_span = 0;
  for (const auto& e : explanations) {
    if (std::holds_alternative<Span>(e)) {
      out.push_back(explanation_text(*spans[next_span++]));
    } else {
      out.push_back(explanation_text(e));
    }
  }
  return out;
}

namespace {

bool has_edge_whitespace(std::string_view s) {
  auto ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  return !s.empty() && (ws(s.front()) || ws(s.back()));
}

// Target text is label + (separator + explanation)*; parsing splits on the
// leftmost separator, so no piece may create an extra separator occurrence.
// The separator only borders itself on the single space, hence the suffix
// rule.
bool breaks_target_grammar(std::string_view piece) {
  constexpr std::string_view kDanglingTail = " explanation:";
  return piece.find(kExplanationSeparator) != std::string_view::npos ||
         piece.ends_with(kDanglingTail);
}

void check_utf8(std::string_view s, const std::string& field) {
  if (!unicode::is_valid(s)) {
    throw ValidationError(Kind::kInvalidUtf8, field, "not valid UTF-8");
  }
}

}  // namespace

void validate_example(const Example& e) {
  const Task& task = e.task;
  if (e.id.empty()) throw ValidationError(Kind::kEmptyId, "id", "empty id");

  // Segments: exactly the task's, in task order.
  for (std::size_t i = 0; i < e.segments.size(); ++i) {
    const auto& name = e.segments[i].first;
    auto idx = task.segment_index(name);
    if (!idx) {
      throw ValidationError(Kind::kUnexpectedSegment, "segments." + name,
                            "not a segment of task " + task.id());
    }
    if (*idx != i) {
      throw ValidationError(Kind::kUnexpectedSegment, "segments." + name,
                            "out of task order");
    }
  }
  for (const auto& spec : task.segments()) {
    auto it = std::find_if(e.segments.begin(), e.segments.end(),
                           [&](const auto& s) { return s.first == spec.name; });
    if (it == e.segments.end()) {
      throw ValidationError(Kind::kMissingSegment, "segments." + spec.name,
                            "missing");
    }
    check_utf8(it->second, "segments." + spec.name);
    if (it->second.empty()) {
      throw ValidationError(Kind::kEmptySegment, "segments." + spec.name,
                            "empty text");
    }
  }

  // Label.
  check_utf8(e.label, "label");
  if (e.label.empty()) {
    throw ValidationError(Kind::kEmptyLabel, "label", "empty label");
  }
  if (has_edge_whitespace(e.label)) {
    throw ValidationError(Kind::kLabelWhitespace, "label",
                          "leading or trailing whitespace");
  }
  if (breaks_target_grammar(e.label)) {
    throw ValidationError(Kind::kAmbiguousTarget, "label",
                          "contains the explanation separator");
  }
  if (e.choices) {
    for (std::size_t i = 0; i < e.choices->size(); ++i) {
      const auto& c = (*e.choices)[i];
      check_utf8(c, "choices");
      if (c.empty()) {
        throw ValidationError(Kind::kEmptyChoice,
                              "choices[" + std::to_string(i) + "]",
                              "empty choice");
      }
    }
  }
  if (task.labels_from_choices()) {
    if (!e.choices || e.choices->empty()) {
      throw ValidationError(Kind::kMissingChoices, "choices",
                            "task " + task.id() + " requires choices");
    }
    if (std::find(e.choices->begin(), e.choices->end(), e.label) ==
        e.choices->end()) {
      throw ValidationError(Kind::kLabelNotInChoices, "label",
                            "'" + e.label + "' is not one of the choices");
    }
  }
  if (task.labels()) {
    const auto& set = *task.labels();
    if (std::find(set.begin(), set.end(), e.label) == set.end()) {
      throw ValidationError(Kind::kLabelNotInSet, "label",
                            "'" + e.label + "' is not a label of task " +
                                task.id());
    }
  }

  // Explanations.
  std::vector<const Span*> spans;
  for (std::size_t i = 0; i < e.explanations.size(); ++i) {
    const std::string field = "explanations[" + std::to_string(i) + "]";
    std::string text;
    if (const auto* a = std::get_if<AbstractiveText>(&e.explanations[i])) {
      check_utf8(a->text, field);
      if (a->text.empty()) {
        throw ValidationError(Kind::kEmptyExplanation, field, "empty text");
      }
      if (a->text.find_first_of("\r\n") != std::string::npos) {
        throw ValidationError(Kind::kNewlineInExplanation, field,
                              "text contains a newline");
      }
      text = a->text;
    } else {
      const auto& span = std::get<Span>(e.explanations[i]);
      if (!task.segment_index(span.segment)) {
        throw ValidationError(Kind::kUnknownSpanSegment, field + ".segment",
                              "unknown segment '" + span.segment + "'");
      }
      std::size_t len = unicode::length(e.segment_text(span.segment));
      if (!(span.start < span.end && span.end <= len)) {
        throw ValidationError(
            Kind::kSpanBounds, field,
            "span bounds [" + std::to_string(span.start) + ", " +
                std::to_string(span.end) + ") invalid for segment of length " +
                std::to_string(len));
      }
      spans.push_back(&span);
      text = e.explanation_text(e.explanations[i]);
    }
    if (breaks_target_grammar(text)) {
      throw ValidationError(Kind::kAmbiguousTarget, field,
                            "contains the explanation separator");
    }
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const Span& a = *spans[i];
      const Span& b = *spans[j];
      if (a.segment == b.segment && a.start < b.end && b.start < a.end) {
        throw ValidationError(Kind::kOverlappingSpans, "explanations",
                              "extractive spans overlap in segment " +
                                  a.segment);
      }
    }
  }
}

Example example_from_json(const json& record, const Task& task) {
  if (!record.is_object()) throw DataError("record is not a JSON object");
  Example e;
  e.task = task;
  try {
    e.id = record.at("id").get<std::string>();
    const json& segs = record.at("segments");
    if (!segs.is_object()) throw DataError("segments: not an object");
    for (const auto& spec : task.segments()) {
      if (!segs.contains(spec.name)) {
        throw ValidationError(Kind::kMissingSegment, "segments." + spec.name,
                              "missing");
      }
      e.segments.emplace_back(spec.name,
                              segs.at(spec.name).get<std::string>());
    }
    for (const auto& [name, _] : segs.items()) {
      if (!task.segment_index(name)) {
        throw ValidationError(Kind::kUnexpectedSegment, "segments." + name,
                              "not a segment of task " + task.id());
      }
    }
    if (record.contains("choices") && !record.at("choices").is_null()) {
      e.choices = record.at("choices").get<std::vector<std::string>>();
    }
    e.label = record.at("label").get<std::string>();
    if (record.contains("explanations")) {
      for (const auto& x : record.at("explanations")) {
        if (x.contains("text")) {
          e.explanations.emplace_back(
              AbstractiveText{x.at("text").get<std::string>()});
        } else {
          auto start = x.at("start").get<long long>();
          auto end = x.at("end").get<long long>();
          if (start < 0 || end < 0) {
            throw ValidationError(Kind::kSpanBounds, "explanations",
                                  "negative span offset");
          }
          e.explanations.emplace_back(Span{x.at("segment").get<std::string>(),
                                           static_cast<std::size_t>(start),
                                           static_cast<std::size_t>(end)});
        }
      }
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("schema: ") + ex.what());
  }
  validate_example(e);
  return e;
}

nlohmann::ordered_json example_to_json(const Example& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["segments"] = nlohmann::ordered_json::object();
  for (const auto& [name, text] : e.segments) j["segments"][name] = text;
  if (e.choices) j["choices"] = *e.choices;
  j["label"] = e.label;
  j["explanations"] = nlohmann::ordered_json::array();
  for (const auto& x : e.explanations) {
    if (const auto* a = std::get_if<AbstractiveText>(&x)) {
      j["explanations"].push_back({{"text", a->text}});
    } else {
      const auto& s = std::get<Span>(x);
      j["explanations"].push_back(
          {{"segment", s.segment}, {"start", s.start}, {"end", s.end}});
    }
  }
  return j;
}

std::vector<Example> parse_examples(std::string_view jsonl, const Task& task) {
  std::vector<Example> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    std::string_view line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json record;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& ex) {
        throw DataError(std::string("malformed JSON: ") + ex.what());
      }
      out.push_back(example_from_json(record, task));
    } catch (const DataError& ex) {
      throw DataError("line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<Example> load_examples(const std::filesystem::path& path,
                                   const Task& task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_examples(buf.str(), task);
  } catch (const DataError& ex) {
    throw DataError(path.string() + ": " + ex.what());
  }
}

void write_examples(const std::filesystem::path& path,
                    const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : examples) out << example_to_json(e).dump() << '\n';
}

}  // namespace wt5
