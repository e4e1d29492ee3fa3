#include "wt5/mixer.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "wt5/random.h"

namespace wt5 {

using json = nlohmann::json;

std::vector<Example> subsample_explanations(std::vector<Example> examples,
                                            std::size_t n_keep,
                                            std::uint64_t seed) {
  std::vector<std::size_t> annotated;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].has_explanation()) annotated.push_back(i);
  }
  if (n_keep > annotated.size()) {
    throw DataError("cannot keep " + std::to_string(n_keep) +
                    " explanations: only " + std::to_string(annotated.size()) +
                    " examples are annotated");
  }
  // Partial Fisher-Yates: the first n_keep slots are a uniform sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < n_keep; ++i) {
    std::size_t j = i + rng.below(annotated.size() - i);
    std::swap(annotated[i], annotated[j]);
  }
  std::vector<bool> keep(examples.size(), false);
  for (std::size_t i = 0; i < n_keep; ++i) keep[annotated[i]] = true;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!keep[i]) examples[i].explanations.clear();
  }
  return examples;
}

ExplanationPolicy ExplanationPolicy::parse(const std::string& text) {
  if (text == "all") return {Kind::kAll, 0};
  if (text == "none") return {Kind::kNone, 0};
  if (text.starts_with("keep:")) {
    const std::string n = text.substr(5);
    if (!n.empty() && std::all_of(n.begin(), n.end(), [](char c) {
          return c >= '0' && c <= '9';
        })) {
      return {Kind::kKeep, static_cast<std::size_t>(std::stoull(n))};
    }
  }
  throw DataError("bad explanation policy '" + text +
                  "' (expected all, none or keep:N)");
}

std::string ExplanationPolicy::to_string() const {
  switch (kind) {
    case Kind::kAll: return "all";
    case Kind::kNone: return "none";
    case Kind::kKeep: return "keep:" + std::to_string(keep);
  }
  return "all";
}

Rewrite parse_rewrite(const std::string& text) {
  if (text.empty() || text == "none") return Rewrite::kNone;
  if (text == "cose_as_nli") return Rewrite::kCosEAsNli;
  if (text == "nli_fixed_choices") return Rewrite::kNliFixedChoices;
  throw DataError("unknown rewrite '" + text + "'");
}

std::string to_string(Rewrite r) {
  switch (r) {
    case Rewrite::kNone: return "none";
    case Rewrite::kCosEAsNli: return "cose_as_nli";
    case Rewrite::kNliFixedChoices: return "nli_fixed_choices";
  }
  return "none";
}

Example rewrite_cose_as_nli(const Example& e) {
  if (e.task.id() != "cos_e") {
    throw DataError("rewrite_cose_as_nli: example " + e.id + " is task " +
                    e.task.id() + ", not cos_e");
  }
  Example out = e;
  out.task = Task::custom("nli", "nli", {{"premise", "premise:"}},
                          std::nullopt, true);
  for (auto& [name, _] : out.segments) {
    if (name == "question") name = "premise";
  }
  for (auto& x : out.explanations) {
    if (auto* s = std::get_if<Span>(&x); s && s->segment == "question") {
      s->segment = "premise";
    }
  }
  return out;
}

Example add_fixed_nli_choices(const Example& e) {
  if (e.task.id() != "nli") {
    throw DataError("add_fixed_nli_choices: example " + e.id + " is task " +
                    e.task.id() + ", not nli");
  }
  Example out = e;
  out.choices = std::vector<std::string>{"entailment", "neutral",
                                         "contradiction"};
  return out;
}

Example apply_rewrite(const Example& e, Rewrite r) {
  switch (r) {
    case Rewrite::kNone: return e;
    case Rewrite::kCosEAsNli: return rewrite_cose_as_nli(e);
    case Rewrite::kNliFixedChoices: return add_fixed_nli_choices(e);
  }
  return e;
}

std::vector<FormattedPair> build_mixture(const MixtureSpec& spec,
                                         const CorpusMap& corpora) {
  std::vector<FormattedPair> out;
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    const auto& source = spec.sources[s];
    auto it = corpora.find(source.corpus_id);
    if (it == corpora.end()) {
      throw DataError("mixture source '" + source.corpus_id +
                      "' is not a known corpus");
    }
    std::vector<Example> examples;
    examples.reserve(it->second.size());
    for (const auto& e : it->second) {
      examples.push_back(apply_rewrite(e, source.rewrite));
    }
    if (source.policy.kind == ExplanationPolicy::Kind::kKeep) {
      // Each source draws its own subsample so a corpus listed twice is
      // subsampled independently.
      examples = subsample_explanations(std::move(examples),
                                        source.policy.keep, spec.seed + s);
    }
    const bool allow = source.policy.kind != ExplanationPolicy::Kind::kNone;
    for (const auto& e : examples) {
      out.push_back(format_example(e, allow && e.has_explanation()));
    }
  }
  if (spec.shuffle) {
    Rng rng(spec.seed);
    rng.shuffle(out);
  }
  return out;
}

std::vector<std::string> request_explanations(
    const std::vector<Example>& examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(format_input(e, true));
  return out;
}

std::optional<std::string> binarize_stars(int stars, PolarityMap map) {
  if (stars < 1 || stars > 5) {
    throw DataError("star rating " + std::to_string(stars) +
                    " outside 1..5");
  }
  if (stars == 3) return std::nullopt;
  const bool high = stars >= 4;
  const bool positive = map == PolarityMap::kFollowExamples ? high : !high;
  return positive ? "positive" : "negative";
}

std::vector<Example> load_star_reviews(const std::filesystem::path& path,
                                       PolarityMap map) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json record;
      try {
        record = json::parse(line);
        auto label = binarize_stars(record.at("stars").get<int>(), map);
        if (!label) continue;
        record.erase("stars");
        record["label"] = *label;
      } catch (const json::exception& ex) {
        throw DataError(std::string("malformed record: ") + ex.what());
      }
      out.push_back(example_from_json(record, Task::sentiment()));
    } catch (const DataError& ex) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": " + ex.what());
    }
  }
  return out;
}

MixtureConfig load_mixture_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  MixtureConfig config;
  try {
    json j = json::parse(in);
    if (!j.contains("seed")) {
      throw DataError("mixture config must set an explicit seed");
    }
    config.spec.seed = j.at("seed").get<std::uint64_t>();
    config.spec.shuffle = j.value("shuffle", true);
    const auto base = path.parent_path();
    for (const auto& s : j.at("sources")) {
      MixtureSource source;
      source.corpus_id = s.at("id").get<std::string>();
      source.policy = ExplanationPolicy::parse(s.value("policy", "all"));
      source.rewrite = parse_rewrite(s.value("rewrite", "none"));
      if (s.contains("path")) {
        std::filesystem::path p = s.at("path").get<std::string>();
        if (p.is_relative()) p = base / p;
        auto [it, fresh] = config.paths.emplace(source.corpus_id, p);
        if (!fresh && it->second != p) {
          throw DataError("corpus '" + source.corpus_id +
                          "' is bound to two different paths");
        }
        const auto& t = s.at("task");
        config.tasks.insert_or_assign(
            source.corpus_id, t.is_string() ? Task::by_name(t.get<std::string>())
                                            : Task::from_json(t));
      }
      config.spec.sources.push_back(std::move(source));
    }
  } catch (const json::exception& ex) {
    throw DataError(path.string() + ": " + ex.what());
  }
  for (const auto& s : config.spec.sources) {
    if (!config.paths.count(s.corpus_id)) {
      throw DataError("mixture source '" + s.corpus_id + "' has no path");
    }
  }
  return config;
}

CorpusMap load_mixture_corpora(const MixtureConfig& config) {
  CorpusMap out;
  for (const auto& [id, path] : config.paths) {
    out.emplace(id, load_examples(path, config.tasks.at(id)));
  }
  return out;
}

}  // namespace wt5
