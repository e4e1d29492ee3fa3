#include "wt5/scoring.h"

#include <algorithm>
#include <map>

#include "wt5/parser.h"

namespace wt5 {

MetricReport score_predictions(const std::vector<Example>& gold,
                               const std::vector<Prediction>& predictions,
                               const ScoreOptions& options) {
  if (gold.empty()) throw DataError("no gold examples to score");
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) throw DataError("duplicate prediction id " + p.id);
  }
  std::map<std::string, bool> gold_ids;
  for (const auto& e : gold) gold_ids[e.id] = true;
  for (const auto& p : predictions) {
    if (!gold_ids.count(p.id)) throw DataError("prediction id " + p.id + " is not in the corpus");
  }

  MetricReport report;
  report.n_examples = gold.size();
  report.bleu_lowercase = options.lowercase;
  report.bleu_references = options.max_over_references ? "max" : "first";

  std::vector<std::string> pred_labels, gold_labels;
  std::vector<std::string> candidates;
  std::vector<std::vector<std::string>> reference_sets;
  std::vector<double> tf1;
  std::vector<bool> f1a_pred, f1a_gold;
  bool multirc = false;

  for (const auto& e : gold) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) throw DataError("no prediction for id " + e.id);
    ParsedPrediction parsed;
    try {
      parsed = parse_prediction(it->second->output);
    } catch (const ParseError&) {
      parsed = {std::string(kInvalidLabel), {}};
    }
    const std::string label = label_of(parsed, e.task, e.choices);
    pred_labels.push_back(label);
    gold_labels.push_back(e.label);

    if (e.task.id() == "multirc") {
      multirc = true;
      f1a_pred.push_back(label == "True");
      f1a_gold.push_back(e.label == "True");
    }

    std::vector<std::string> abstractive;
    std::vector<Span> spans;
    for (const auto& x : e.explanations) {
      if (const auto* a = std::get_if<AbstractiveText>(&x)) {
        abstractive.push_back(a->text);
      } else {
        spans.push_back(std::get<Span>(x));
      }
    }
    if (!abstractive.empty()) {
      // Multiple gold texts are alternative references, so only the first
      // predicted explanation is scored.
      candidates.push_back(parsed.explanations.empty() ? "" : parsed.explanations.front());
      reference_sets.push_back(abstractive);
    }
    if (!spans.empty()) {
      AlignedPrediction aligned = align_spans(parsed, e);
      report.n_spurious += aligned.spurious.size();
      tf1.push_back(token_f1(mask_from_spans(e, aligned.matched), mask_from_spans(e, spans)));
    }
  }

  report.accuracy = accuracy(pred_labels, gold_labels);
  if (!candidates.empty()) {
    std::size_t positions = 1;
    if (options.max_over_references) {
      for (const auto& r : reference_sets) positions = std::max(positions, r.size());
    }
    double best = 0.0;
    for (std::size_t k = 0; k < positions; ++k) {
      std::vector<std::string> refs;
      for (const auto& r : reference_sets) refs.push_back(r[std::min(k, r.size() - 1)]);
      best = std::max(best, bleu(candidates, refs, {options.lowercase}).score);
    }
    report.bleu = best;
  }
  if (!tf1.empty()) {
    double sum = 0.0;
    for (double v : tf1) sum += v;
    report.token_f1 = sum / static_cast<double>(tf1.size());
  }
  if (multirc) report.f1a = f1a(f1a_pred, f1a_gold);
  return report;
}

}  // namespace wt5
