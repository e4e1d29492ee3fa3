#include "wt5/synthgen.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "wt5/random.h"
#include "wt5/unicode.h"

namespace wt5::synth {

SynthSpec SynthSpec::defaults() {
  SynthSpec s;
  s.fillers = {"the",     "movie",  "film",   "plot",    "was",    "and",
               "with",    "actor",  "story",  "scene",   "ending", "music",
               "cast",    "we",     "saw",    "it",      "at",     "night",
               "my",      "friend", "thought", "director", "script", "camera",
               "hour",    "long",   "very",   "quite",   "really", "overall",
               "its",     "theater", "seats", "popcorn", "sequel", "trailer"};
  s.triggers = {{"great", true},      {"wonderful", true}, {"superb", true},
                {"delightful", true}, {"brilliant", true}, {"charming", true},
                {"terrible", false},  {"awful", false},    {"boring", false},
                {"dreadful", false},  {"clumsy", false},   {"tedious", false}};
  return s;
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s = defaults();
  try {
    s.n_examples = j.value("n_examples", s.n_examples);
    if (j.contains("fillers")) {
      s.fillers = j.at("fillers").get<std::vector<std::string>>();
    }
    if (j.contains("triggers")) {
      s.triggers.clear();
      auto add = [&](const std::string& word, const std::string& polarity) {
        if (polarity != "positive" && polarity != "negative") {
          throw DataError("trigger polarity must be positive or negative");
        }
        s.triggers.push_back({word, polarity == "positive"});
      };
      const auto& t = j.at("triggers");
      if (t.is_array()) {
        for (const auto& item : t) {
          add(item.at("word").get<std::string>(), item.at("polarity").get<std::string>());
        }
      } else {
        // Object form {"word": "polarity"}; keys come back sorted.
        for (const auto& [word, polarity] : t.items()) add(word, polarity.get<std::string>());
      }
    }
    s.min_length = j.value("min_length", s.min_length);
    s.max_length = j.value("max_length", s.max_length);
    s.seed = j.value("seed", s.seed);
    s.id_prefix = j.value("id_prefix", s.id_prefix);
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("bad synth spec: ") + ex.what());
  }
  return s;
}

nlohmann::ordered_json SynthSpec::to_json() const {
  nlohmann::ordered_json j;
  j["n_examples"] = n_examples;
  j["fillers"] = fillers;
  j["triggers"] = nlohmann::ordered_json::array();
  for (const auto& t : triggers) {
    j["triggers"].push_back(
        {{"word", t.word}, {"polarity", t.positive ? "positive" : "negative"}});
  }
  j["min_length"] = min_length;
  j["max_length"] = max_length;
  j["seed"] = seed;
  j["id_prefix"] = id_prefix;
  return j;
}

namespace {

bool is_word(const std::string& w) {
  return !w.empty() && w.find_first_of(" \t\r\n") == std::string::npos &&
         unicode::is_valid(w);
}

}  // namespace

void validate_spec(const SynthSpec& spec) {
  if (spec.fillers.empty()) throw DataError("synth: no filler words");
  if (spec.triggers.empty()) throw DataError("synth: trigger lexicon is empty");
  std::set<std::string> fill(spec.fillers.begin(), spec.fillers.end());
  std::set<std::string> trig;
  for (const auto& w : spec.fillers) {
    if (!is_word(w)) throw DataError("synth: bad filler word '" + w + "'");
  }
  for (const auto& t : spec.triggers) {
    if (!is_word(t.word)) {
      throw DataError("synth: bad trigger word '" + t.word + "'");
    }
    if (fill.count(t.word)) {
      throw DataError("synth: '" + t.word + "' is both filler and trigger");
    }
    if (!trig.insert(t.word).second) {
      throw DataError("synth: duplicate trigger '" + t.word + "'");
    }
  }
  if (spec.min_length < 3 || spec.min_length > spec.max_length) {
    throw DataError(
        "synth: review length range must satisfy 3 <= min_length <= "
        "max_length so the trigger has a neighbour on each side");
  }
}

Generated generate_both(const SynthSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);
  Generated out;
  out.abstractive.reserve(spec.n_examples);
  out.extractive.reserve(spec.n_examples);
  const std::size_t span_range = spec.max_length - spec.min_length + 1;
  for (std::size_t k = 0; k < spec.n_examples; ++k) {
    const std::size_t len = spec.min_length + rng.below(span_range);
    const std::size_t at = 1 + rng.below(len - 2);
    const Trigger& trigger = spec.triggers[rng.below(spec.triggers.size())];
    std::vector<std::string> words(len);
    for (std::size_t i = 0; i < len; ++i) {
      words[i] = i == at ? trigger.word
                         : spec.fillers[rng.below(spec.fillers.size())];
    }
    std::string review;
    std::size_t window_start = 0, window_end = 0;  // characters
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0) review += ' ';
      if (i == at - 1) window_start = unicode::length(review);
      review += words[i];
      if (i == at + 1) window_end = unicode::length(review);
    }
    Example e;
    e.id = spec.id_prefix + "-" + std::to_string(k);
    e.task = Task::sentiment();
    e.segments = {{"review", review}};
    e.label = trigger.positive ? "positive" : "negative";
    Example x = e;
    e.explanations = {AbstractiveText{words[at - 1] + " " + words[at] + " " +
                                      words[at + 1]}};
    x.explanations = {Span{"review", window_start, window_end}};
    validate_example(e);
    validate_example(x);
    out.abstractive.push_back(std::move(e));
    out.extractive.push_back(std::move(x));
  }
  return out;
}

std::vector<Example> generate(const SynthSpec& spec) {
  return generate_both(spec).abstractive;
}

std::string rule_label(const SynthSpec& spec, const std::string& review) {
  std::istringstream in(review);
  std::string w;
  while (in >> w) {
    for (const auto& t : spec.triggers) {
      if (t.word == w) return t.positive ? "positive" : "negative";
    }
  }
  return "invalid";
}

}  // namespace wt5::synth
