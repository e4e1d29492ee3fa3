#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wt5/corpus.h"

namespace wt5 {

double accuracy(const std::vector<std::string>& preds,
                const std::vector<std::string>& golds);

// mteval-v14 "international" tokenization as used by SacreBLEU 1.3:
// punctuation is split off unless it sits between two digits, every symbol
// is split off, then the text is split on whitespace.
std::vector<std::string> intl_tokenize(std::string_view text);

struct BleuOptions {
  bool lowercase = false;
};

struct BleuScore {
  double score = 0.0;  // 0..100
  double brevity_penalty = 0.0;
  std::array<double, 4> precisions{};  // percentages, smoothed
  std::array<long, 4> correct{};
  std::array<long, 4> total{};
  long sys_len = 0;
  long ref_len = 0;
};

// Corpus BLEU with "exp" smoothing over intl_tokenize output, one reference
// per candidate.
BleuScore bleu(const std::vector<std::string>& candidates,
               const std::vector<std::string>& references,
               const BleuOptions& options = {});

struct Token {
  std::size_t segment = 0;  // index into the task's segments
  std::size_t start = 0;    // character offsets within that segment
  std::size_t end = 0;
  std::string text;

  bool operator==(const Token&) const = default;
};

// Whitespace split with leading and trailing punctuation detached, one
// token per punctuation character.
std::vector<Token> word_tokenize(std::string_view text,
                                 std::size_t segment = 0);
std::vector<Token> tokenize_example(const Example& e);

struct TokenMask {
  std::vector<Token> tokens;
  std::vector<bool> mask;
};

// A token is marked iff its character range intersects a span.
TokenMask mask_from_spans(const Example& e, const std::vector<Span>& spans);

// F1 over positionwise mask agreement. Both masks empty gives 1, exactly
// one empty gives 0.
double token_f1(const TokenMask& pred, const TokenMask& gold);

// Binary F1 with True as the positive class. No positives on either side
// gives 1.
double f1a(const std::vector<bool>& preds, const std::vector<bool>& golds);

struct MetricReport {
  double accuracy = 0.0;
  std::optional<double> bleu;
  std::optional<double> token_f1;
  std::optional<double> f1a;
  std::size_t n_examples = 0;
  std::size_t n_spurious = 0;
  bool bleu_lowercase = false;
  std::string bleu_references = "first";

  nlohmann::ordered_json to_json() const;
  // Aligned plain-text table: Acc, BLEU, TF1, F1a.
  std::string to_table() const;
};

}  // namespace wt5
