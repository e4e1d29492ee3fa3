// wt5: explanation-augmented text-to-text toolkit.
//
//   wt5 prepare  corpus JSONL  -> input/target pairs
//   wt5 mix      mixture spec  -> mixed pairs
//   wt5 synth    synthetic explainable sentiment corpus
//   wt5 train    toy encoder-decoder on pairs
//   wt5 decode   toy model predictions
//   wt5 score    predictions vs gold -> Acc / BLEU / TF1 / F1a
//   wt5 serve    human-evaluation rating service
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"
#include "wt5/corpus.h"
#include "wt5/formatter.h"
#include "wt5/mixer.h"
#include "wt5/pairs_io.h"
#include "wt5/rating_service.h"
#include "wt5/scoring.h"
#include "wt5/seq2seq.h"
#include "wt5/synthgen.h"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

// Everything a subcommand writes goes under its run directory, together
// with the resolved configuration and a summary. Wall-clock time is kept
// out of those files so reruns compare byte-for-byte.
class RunDir {
 public:
  RunDir(fs::path dir, const std::string& command, ojson config) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    config["command"] = command;
    write("config.json", config.dump(2) + "\n");
    ojson meta;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    meta["created_at"] = buf;
    meta["version"] = kVersion;
    write("metadata.json", meta.dump(2) + "\n");
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw wt5::DataError("cannot write " + (dir_ / name).string());
    out << content;
  }

  void summary(const ojson& s) const { write("summary.json", s.dump(2) + "\n"); }

 private:
  fs::path dir_;
};

struct TaskOptions {
  std::string name;
  std::string def_path;

  void add(CLI::App* sub) {
    auto* t = sub->add_option("--task", name, "built-in task: sentiment, nli, cos_e, multirc");
    auto* d = sub->add_option("--task-def", def_path, "JSON file defining a custom task");
    t->excludes(d);
  }

  wt5::Task resolve() const {
    if (!def_path.empty()) {
      std::ifstream in(def_path);
      if (!in) throw wt5::DataError("cannot open " + def_path);
      try {
        return wt5::Task::from_json(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& ex) {
        throw wt5::DataError(def_path + ": " + ex.what());
      }
    }
    if (name.empty()) throw CLI::ValidationError("--task", "one of --task or --task-def is required");
    return wt5::Task::by_name(name);
  }

  ojson to_json() const {
    return def_path.empty() ? ojson(name) : ojson({{"definition", def_path}});
  }
};

std::size_t count_explained(const std::vector<wt5::FormattedPair>& pairs) {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.wants_explanation;
  return n;
}

std::string pairs_name(wt5::PairFormat f) {
  return f == wt5::PairFormat::kJsonl ? "pairs.jsonl" : "pairs.tsv";
}

// --- prepare ---------------------------------------------------------------

struct PrepareCmd {
  std::string corpus, out, format = "jsonl", policy = "auto", stars;
  bool no_explanations = false;
  TaskOptions task;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("prepare", "format a corpus as input/target pairs");
    sub->add_option("--corpus", corpus, "corpus JSONL")->required();
    task.add(sub);
    sub->add_option("--out", out, "run directory")->required();
    sub->add_option("--format", format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
    sub->add_option("--policy", policy,
                    "auto: explain annotated examples; all: every example must be "
                    "explained; none: labels only")
        ->check(CLI::IsMember({"auto", "all", "none"}));
    sub->add_flag("--no-explanations", no_explanations, "same as --policy none");
    sub->add_option("--stars", stars,
                    "corpus holds star-rated reviews; map stars with 'examples' (4-5 "
                    "positive) or 'literal' (1-2 positive)")
        ->check(CLI::IsMember({"examples", "literal"}));
    sub->callback([this] { run(); });
  }

  void run() {
    if (no_explanations) policy = "none";
    const auto fmt = wt5::parse_pair_format(format);
    std::vector<wt5::Example> examples;
    ojson task_json;
    if (!stars.empty()) {
      examples = wt5::load_star_reviews(corpus, stars == "literal" ? wt5::PolarityMap::kLiteral
                                                                   : wt5::PolarityMap::kFollowExamples);
      task_json = "sentiment";
    } else {
      examples = wt5::load_examples(corpus, task.resolve());
      task_json = task.to_json();
    }
    std::vector<bool> flags;
    for (const auto& e : examples) {
      if (policy == "all" && !e.has_explanation()) {
        throw wt5::DataError("example " + e.id + " has no explanation (policy all)");
      }
      flags.push_back(policy != "none" && e.has_explanation());
    }
    auto pairs = wt5::format_corpus(examples, flags);
    RunDir run(out, "prepare",
               {{"corpus", corpus}, {"task", task_json}, {"format", format},
                {"policy", policy}, {"stars", stars.empty() ? ojson(nullptr) : ojson(stars)}});
    wt5::write_pairs(run.path(pairs_name(fmt)), pairs, fmt);
    run.summary({{"n_examples", examples.size()},
                 {"n_pairs", pairs.size()},
                 {"n_explained", count_explained(pairs)}});
    std::cout << "wrote " << pairs.size() << " pairs (" << count_explained(pairs)
              << " with explanations) to " << run.path(pairs_name(fmt)).string() << "\n";
  }
};

// --- mix -------------------------------------------------------------------

struct MixCmd {
  std::string spec, out, format = "jsonl";

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("mix", "build a training mixture from a spec file");
    sub->add_option("--spec", spec, "mixture spec JSON")->required();
    sub->add_option("--out", out, "run directory")->required();
    sub->add_option("--format", format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
    sub->callback([this] { run(); });
  }

  void run() {
    const auto fmt = wt5::parse_pair_format(format);
    auto config = wt5::load_mixture_config(spec);
    auto corpora = wt5::load_mixture_corpora(config);
    auto pairs = wt5::build_mixture(config.spec, corpora);

    ojson sources = ojson::array();
    for (const auto& s : config.spec.sources) {
      sources.push_back({{"id", s.corpus_id},
                         {"path", config.paths.at(s.corpus_id).string()},
                         {"policy", s.policy.to_string()},
                         {"rewrite", wt5::to_string(s.rewrite)}});
    }
    RunDir run(out, "mix",
               {{"spec", spec}, {"format", format}, {"seed", config.spec.seed},
                {"shuffle", config.spec.shuffle}, {"sources", sources}});
    wt5::write_pairs(run.path(pairs_name(fmt)), pairs, fmt);

    ojson per_source = ojson::array();
    for (const auto& s : config.spec.sources) {
      std::size_t annotated = 0;
      for (const auto& e : corpora.at(s.corpus_id)) annotated += e.has_explanation();
      std::size_t explained = 0;
      switch (s.policy.kind) {
        case wt5::ExplanationPolicy::Kind::kAll: explained = annotated; break;
        case wt5::ExplanationPolicy::Kind::kNone: explained = 0; break;
        case wt5::ExplanationPolicy::Kind::kKeep: explained = s.policy.keep; break;
      }
      per_source.push_back({{"id", s.corpus_id},
                            {"n_pairs", corpora.at(s.corpus_id).size()},
                            {"n_explained", explained}});
    }
    run.summary({{"n_pairs", pairs.size()},
                 {"n_explained", count_explained(pairs)},
                 {"sources", per_source}});
    std::cout << "wrote " << pairs.size() << " pairs (" << count_explained(pairs)
              << " with explanations) to " << run.path(pairs_name(fmt)).string() << "\n";
  }
};

// --- synth -----------------------------------------------------------------

struct SynthCmd {
  std::string out, spec_path;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  bool seed_set = false;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("synth", "generate a synthetic explainable sentiment corpus");
    sub->add_option("--out", out, "run directory")->required();
    sub->add_option("--spec", spec_path, "JSON generator spec (fillers, triggers, lengths)");
    sub->add_option("-n,--n", n, "number of examples");
    sub->add_option("--seed", seed, "random seed")->required();
    sub->callback([this] { run(); });
  }

  void run() {
    wt5::synth::SynthSpec spec = wt5::synth::SynthSpec::defaults();
    if (!spec_path.empty()) {
      std::ifstream in(spec_path);
      if (!in) throw wt5::DataError("cannot open " + spec_path);
      try {
        spec = wt5::synth::SynthSpec::from_json(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& ex) {
        throw wt5::DataError(spec_path + ": " + ex.what());
      }
    }
    spec.n_examples = n;
    spec.seed = seed;
    auto generated = wt5::synth::generate_both(spec);
    RunDir run(out, "synth", {{"spec", spec.to_json()}});
    wt5::write_examples(run.path("corpus.jsonl"), generated.abstractive);
    wt5::write_examples(run.path("corpus_extractive.jsonl"), generated.extractive);
    std::size_t positive = 0;
    for (const auto& e : generated.abstractive) positive += e.label == "positive";
    run.summary({{"n_examples", generated.abstractive.size()}, {"n_positive", positive}});
    std::cout << "wrote " << generated.abstractive.size() << " examples to "
              << run.path("corpus.jsonl").string() << "\n";
  }
};

// --- train -----------------------------------------------------------------

struct TrainCmd {
  std::string pairs, out, format = "jsonl";
  std::size_t dim = 64, min_count = 1, log_every = 100;
  wt5::seq2seq::TrainConfig config;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("train", "train the toy encoder-decoder");
    sub->add_option("--pairs", pairs, "training pairs")->required();
    sub->add_option("--format", format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
    sub->add_option("--out", out, "run directory")->required();
    sub->add_option("--steps", config.steps, "SGD steps");
    sub->add_option("--batch-size", config.batch_size, "sequences per step");
    sub->add_option("--lr", config.learning_rate, "constant learning rate");
    sub->add_option("--seed", config.seed, "random seed")->required();
    sub->add_option("--dim", dim, "model width");
    sub->add_option("--min-count", min_count, "minimum token frequency for the vocabulary");
    sub->add_option("--max-input-len", config.max_input_len, "input truncation (tokens)");
    sub->add_option("--max-target-len", config.max_target_len, "target truncation (tokens)");
    sub->add_option("--log-every", log_every, "print the mean loss every N steps (0: quiet)");
    sub->callback([this] { run(); });
  }

  void run() {
    config.validate();
    auto data = wt5::read_pairs(pairs, wt5::parse_pair_format(format));
    auto vocab = wt5::seq2seq::Vocabulary::build(data, min_count);
    wt5::seq2seq::ToyModel model(vocab, dim, config.seed);
    std::vector<wt5::seq2seq::EncodedPair> encoded;
    encoded.reserve(data.size());
    for (const auto& p : data) {
      encoded.push_back(model.encode_pair(p, config.max_input_len, config.max_target_len));
    }
    RunDir run(out, "train",
               {{"pairs", pairs}, {"format", format}, {"dim", dim}, {"min_count", min_count},
                {"steps", config.steps}, {"batch_size", config.batch_size},
                {"learning_rate", config.learning_rate}, {"seed", config.seed},
                {"max_input_len", config.max_input_len},
                {"max_target_len", config.max_target_len}});
    std::ofstream loss_log(run.path("loss.tsv"));
    double window = 0.0;
    auto losses = wt5::seq2seq::train(model, encoded, config, [&](std::size_t step, double loss) {
      loss_log << step + 1 << '\t' << loss << '\n';
      window += loss;
      if (log_every && (step + 1) % log_every == 0) {
        std::cout << "step " << step + 1 << " loss " << window / static_cast<double>(log_every)
                  << "\n";
        window = 0.0;
      }
    });
    model.save(run.path("model.bin"));
    double tail = 0.0;
    const std::size_t k = std::min<std::size_t>(100, losses.size());
    for (std::size_t i = losses.size() - k; i < losses.size(); ++i) tail += losses[i];
    run.summary({{"n_pairs", data.size()},
                 {"vocab_size", vocab.size()},
                 {"parameters", model.params().parameter_count()},
                 {"final_loss", losses.back()},
                 {"mean_loss_last_100", tail / static_cast<double>(k)}});
    std::cout << "saved " << run.path("model.bin").string() << "\n";
  }
};

// --- decode ----------------------------------------------------------------

struct DecodeCmd {
  std::string model_path, out, corpus, pairs, format = "jsonl";
  std::size_t beam = 1, max_len = 32;
  bool explain = false;
  TaskOptions task;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("decode", "decode inputs with a trained toy model");
    sub->add_option("--model", model_path, "checkpoint")->required();
    sub->add_option("--out", out, "run directory")->required();
    auto* c = sub->add_option("--corpus", corpus, "corpus JSONL to decode (ids are kept)");
    auto* p = sub->add_option("--pairs", pairs, "pairs file; ids are 0-based line numbers");
    c->excludes(p);
    task.add(sub);
    sub->add_option("--format", format, "pairs format")->check(CLI::IsMember({"jsonl", "tsv"}));
    sub->add_flag("--explain", explain, "prefix corpus inputs with 'explain'");
    sub->add_option("--beam", beam, "beam width (1: greedy)")->check(CLI::PositiveNumber);
    sub->add_option("--max-len", max_len, "maximum output tokens");
    sub->callback([this] { run(); });
  }

  void run() {
    auto model = wt5::seq2seq::ToyModel::load(model_path);
    std::vector<std::pair<std::string, std::string>> inputs;
    if (!corpus.empty()) {
      for (const auto& e : wt5::load_examples(corpus, task.resolve())) {
        inputs.emplace_back(e.id, wt5::format_input(e, explain));
      }
    } else if (!pairs.empty()) {
      auto data = wt5::read_pairs(pairs, wt5::parse_pair_format(format));
      for (std::size_t i = 0; i < data.size(); ++i) {
        inputs.emplace_back(std::to_string(i), data[i].input_text);
      }
    } else {
      throw CLI::ValidationError("decode", "one of --corpus or --pairs is required");
    }
    std::vector<wt5::Prediction> preds;
    preds.reserve(inputs.size());
    for (const auto& [id, text] : inputs) preds.push_back({id, model.generate(text, beam, max_len)});
    RunDir run(out, "decode",
               {{"model", model_path},
                {"corpus", corpus.empty() ? ojson(nullptr) : ojson(corpus)},
                {"pairs", pairs.empty() ? ojson(nullptr) : ojson(pairs)},
                {"task", corpus.empty() ? ojson(nullptr) : task.to_json()},
                {"explain", explain}, {"beam", beam}, {"max_len", max_len}});
    wt5::write_predictions(run.path("predictions.jsonl"), preds);
    run.summary({{"n_predictions", preds.size()}});
    std::cout << "wrote " << preds.size() << " predictions to "
              << run.path("predictions.jsonl").string() << "\n";
  }
};

// --- score -----------------------------------------------------------------

struct ScoreCmd {
  std::string predictions, corpus, out;
  TaskOptions task;
  wt5::ScoreOptions options;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("score", "score predictions against a gold corpus");
    sub->add_option("--predictions", predictions, "predictions JSONL")->required();
    sub->add_option("--corpus", corpus, "gold corpus JSONL")->required();
    task.add(sub);
    sub->add_option("--out", out, "run directory")->required();
    sub->add_flag("--lowercase", options.lowercase, "case-insensitive BLEU");
    sub->add_flag("--max-over-references", options.max_over_references,
                  "BLEU against each reference position, keep the best");
    sub->callback([this] { run(); });
  }

  void run() {
    auto gold = wt5::load_examples(corpus, task.resolve());
    auto preds = wt5::read_predictions(predictions);
    auto report = wt5::score_predictions(gold, preds, options);
    RunDir run(out, "score",
               {{"predictions", predictions}, {"corpus", corpus}, {"task", task.to_json()},
                {"lowercase", options.lowercase},
                {"max_over_references", options.max_over_references}});
    run.write("report.json", report.to_json().dump(2) + "\n");
    run.write("report.txt", report.to_table());
    run.summary(report.to_json());
    std::cout << report.to_table();
  }
};

// --- serve -----------------------------------------------------------------

wt5::rating::RatingService* g_service = nullptr;

extern "C" void handle_signal(int) {
  if (g_service) g_service->stop();
}

struct ServeCmd {
  std::string items, data_dir, static_dir, host = "127.0.0.1";
  int port = 8080;

  void add(CLI::App& app) {
    auto* sub = app.add_subcommand("serve", "run the human-evaluation rating service");
    sub->add_option("--items", items, "session items file to load at startup");
    sub->add_option("--data-dir", data_dir, "event log directory (replayed on start)")->required();
    sub->add_option("--static-dir", static_dir, "rating UI assets served at /");
    sub->add_option("--host", host, "bind address");
    sub->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
    sub->callback([this] { run(); });
  }

  void run() {
    wt5::rating::RatingService::Options opts;
    opts.data_dir = data_dir;
    if (!static_dir.empty()) opts.static_dir = static_dir;
    wt5::rating::RatingService service(opts);
    RunDir run(data_dir, "serve",
               {{"items", items.empty() ? ojson(nullptr) : ojson(items)},
                {"static_dir", static_dir.empty() ? ojson(nullptr) : ojson(static_dir)},
                {"host", host}, {"port", port}});
    if (!items.empty()) {
      std::ifstream in(items);
      if (!in) throw wt5::DataError("cannot open " + items);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& ex) {
        throw wt5::DataError(items + ": " + ex.what());
      }
      std::string id = service.create_session(wt5::rating::parse_session_source(j));
      std::cout << "created session " << id << "\n";
    }
    for (const auto& id : service.session_ids()) {
      std::cout << "session " << id << " digest " << service.digest(id) << "\n";
    }
    g_service = &service;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "listening on http://" << host << ":" << port << "/" << std::endl;
    const bool ok = service.listen(host, port);
    g_service = nullptr;
    if (!ok && port != 0) throw std::runtime_error("could not listen on port " + std::to_string(port));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanation-augmented text-to-text toolkit"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  PrepareCmd prepare;
  MixCmd mix;
  SynthCmd synth;
  TrainCmd train;
  DecodeCmd decode;
  ScoreCmd score;
  ServeCmd serve;
  prepare.add(app);
  mix.add(app);
  synth.add(app);
  train.add(app);
  decode.add(app);
  score.add(app);
  serve.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const wt5::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
