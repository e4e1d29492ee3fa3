#include "wt5/metrics.h"

#include <unicode/uchar.h>

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "wt5/parser.h"
#include "wt5/unicode.h"

namespace wt5 {

double accuracy(const std::vector<std::string>& preds,
                const std::vector<std::string>& golds) {
  if (preds.size() != golds.size()) {
    throw DataError("accuracy: " + std::to_string(preds.size()) +
                    " predictions for " + std::to_string(golds.size()) +
                    " golds");
  }
  if (preds.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] != kInvalidLabel && preds[i] == golds[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

namespace {

std::vector<std::string> split_ws(const std::u32string& s) {
  std::vector<std::string> out;
  std::u32string cur;
  for (char32_t c : s) {
    if (unicode::is_space(c)) {
      if (!cur.empty()) out.push_back(unicode::encode(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(unicode::encode(cur));
  return out;
}

std::u32string rstrip(std::u32string s) {
  while (!s.empty() && unicode::is_space(s.back())) s.pop_back();
  return s;
}

using Ngrams = std::map<std::vector<std::string>, long>;

Ngrams count_ngrams(const std::vector<std::string>& tokens) {
  Ngrams out;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      ++out[std::vector<std::string>(tokens.begin() + i,
                                     tokens.begin() + i + n)];
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> intl_tokenize(std::string_view text) {
  const std::u32string in = unicode::decode(text);
  // Three left-to-right, non-overlapping substitution passes, mirroring
  // the regular expressions of the reference implementation.
  std::u32string a;
  for (std::size_t i = 0; i < in.size();) {
    if (i + 1 < in.size() && !unicode::is_decimal_digit(in[i]) &&
        unicode::is_punctuation(in[i + 1])) {
      a += in[i];
      a += U' ';
      a += in[i + 1];
      a += U' ';
      i += 2;
    } else {
      a += in[i++];
    }
  }
  std::u32string b;
  for (std::size_t i = 0; i < a.size();) {
    if (i + 1 < a.size() && unicode::is_punctuation(a[i]) &&
        !unicode::is_decimal_digit(a[i + 1])) {
      b += U' ';
      b += a[i];
      b += U' ';
      b += a[i + 1];
      i += 2;
    } else {
      b += a[i++];
    }
  }
  std::u32string c;
  for (char32_t ch : b) {
    if (unicode::is_symbol(ch)) {
      c += U' ';
      c += ch;
      c += U' ';
    } else {
      c += ch;
    }
  }
  return split_ws(c);
}

BleuScore bleu(const std::vector<std::string>& candidates,
               const std::vector<std::string>& references,
               const BleuOptions& options) {
  if (candidates.size() != references.size()) {
    throw DataError("bleu: " + std::to_string(candidates.size()) +
                    " candidates for " + std::to_string(references.size()) +
                    " references");
  }
  if (candidates.empty()) throw DataError("bleu: empty corpus");

  auto prepare = [&](const std::string& s) {
    std::u32string u = rstrip(unicode::decode(s));
    if (options.lowercase) {
      for (auto& ch : u) ch = static_cast<char32_t>(u_tolower(static_cast<UChar32>(ch)));
    }
    return intl_tokenize(unicode::encode(u));
  };

  BleuScore s;
  // Accumulated in input order so the result does not depend on scheduling.
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    auto cand = prepare(candidates[k]);
    auto ref = prepare(references[k]);
    s.sys_len += static_cast<long>(cand.size());
    s.ref_len += static_cast<long>(ref.size());
    Ngrams cand_ngrams = count_ngrams(cand);
    Ngrams ref_ngrams = count_ngrams(ref);
    for (const auto& [gram, count] : cand_ngrams) {
      std::size_t n = gram.size() - 1;
      auto it = ref_ngrams.find(gram);
      s.correct[n] += std::min(count, it == ref_ngrams.end() ? 0L : it->second);
      s.total[n] += count;
    }
  }

  // "exp" smoothing: the k-th zero-match order gets precision 1/(2^k total).
  double smooth = 1.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (s.total[n] == 0) break;
    if (s.correct[n] == 0) {
      smooth *= 2.0;
      s.precisions[n] = 100.0 / (smooth * static_cast<double>(s.total[n]));
    } else {
      s.precisions[n] = 100.0 * static_cast<double>(s.correct[n]) /
                        static_cast<double>(s.total[n]);
    }
  }
  s.brevity_penalty = 1.0;
  if (s.sys_len < s.ref_len) {
    s.brevity_penalty =
        s.sys_len > 0 ? std::exp(1.0 - static_cast<double>(s.ref_len) /
                                           static_cast<double>(s.sys_len))
                      : 0.0;
  }
  double log_sum = 0.0;
  for (double p : s.precisions) {
    // An empty order contributes a floored log, which drives the score to 0.
    log_sum += p == 0.0 ? -9999999999.0 : std::log(p);
  }
  s.score = s.brevity_penalty * std::exp(log_sum / 4.0);
  return s;
}

std::vector<Token> word_tokenize(std::string_view text, std::size_t segment) {
  const std::u32string u = unicode::decode(text);
  std::vector<Token> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    out.push_back({segment, b, e, unicode::encode(u.substr(b, e - b))});
  };
  std::size_t i = 0;
  while (i < u.size()) {
    if (unicode::is_space(u[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < u.size() && !unicode::is_space(u[j])) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && unicode::is_punctuation(u[b])) ++b;
    while (e > b && unicode::is_punctuation(u[e - 1])) --e;
    for (std::size_t k = i; k < b; ++k) emit(k, k + 1);
    if (b < e) emit(b, e);
    for (std::size_t k = e; k < j; ++k) emit(k, k + 1);
    i = j;
  }
  return out;
}

std::vector<Token> tokenize_example(const Example& e) {
  std::vector<Token> out;
  for (std::size_t s = 0; s < e.segments.size(); ++s) {
    auto toks = word_tokenize(e.segments[s].second, s);
    out.insert(out.end(), toks.begin(), toks.end());
  }
  return out;
}

TokenMask mask_from_spans(const Example& e, const std::vector<Span>& spans) {
  TokenMask m;
  m.tokens = tokenize_example(e);
  m.mask.assign(m.tokens.size(), false);
  for (const auto& span : spans) {
    auto idx = e.task.segment_index(span.segment);
    if (!idx || *idx >= e.segments.size()) {
      throw DataError("span refers to unknown segment '" + span.segment + "'");
    }
    std::size_t len = unicode::length(e.segments[*idx].second);
    if (!(span.start < span.end && span.end <= len)) {
      throw DataError("span [" + std::to_string(span.start) + ", " +
                      std::to_string(span.end) + ") out of bounds");
    }
    for (std::size_t t = 0; t < m.tokens.size(); ++t) {
      const Token& tok = m.tokens[t];
      if (tok.segment == *idx && tok.start < span.end && span.start < tok.end) {
        m.mask[t] = true;
      }
    }
  }
  return m;
}

namespace {

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fp == 0 && tp + fn == 0) return 1.0;
  if (tp == 0) return 0.0;
  // 2PR/(P+R) with one rounding step.
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace

double token_f1(const TokenMask& pred, const TokenMask& gold) {
  if (pred.tokens != gold.tokens || pred.mask.size() != pred.tokens.size() ||
      gold.mask.size() != gold.tokens.size()) {
    throw DataError("token_f1: masks are over different token streams");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.mask.size(); ++i) {
    if (pred.mask[i] && gold.mask[i]) ++tp;
    if (pred.mask[i] && !gold.mask[i]) ++fp;
    if (!pred.mask[i] && gold.mask[i]) ++fn;
  }
  return f1_from_counts(tp, fp, fn);
}

double f1a(const std::vector<bool>& preds, const std::vector<bool>& golds) {
  if (preds.size() != golds.size()) {
    throw DataError("f1a: " + std::to_string(preds.size()) +
                    " predictions for " + std::to_string(golds.size()) +
                    " golds");
  }
  if (preds.empty()) throw DataError("f1a: empty input");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && golds[i]) ++tp;
    if (preds[i] && !golds[i]) ++fp;
    if (!preds[i] && golds[i]) ++fn;
  }
  return f1_from_counts(tp, fp, fn);
}

nlohmann::ordered_json MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_examples"] = n_examples;
  j["accuracy"] = accuracy;
  j["bleu"] = bleu ? nlohmann::ordered_json(*bleu) : nullptr;
  j["token_f1"] = token_f1 ? nlohmann::ordered_json(*token_f1) : nullptr;
  j["f1a"] = f1a ? nlohmann::ordered_json(*f1a) : nullptr;
  j["n_spurious"] = n_spurious;
  j["bleu_config"] = {{"tokenize", "intl"},
                      {"smooth", "exp"},
                      {"lowercase", bleu_lowercase},
                      {"references", bleu_references}};
  return j;
}

std::string MetricReport::to_table() const {
  auto cell = [](const std::optional<double>& v, double scale) {
    if (!v) return std::string("-");
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << *v * scale;
    return os.str();
  };
  std::ostringstream os;
  os << std::setw(8) << "Acc" << std::setw(8) << "BLEU" << std::setw(8)
     << "TF1" << std::setw(8) << "F1a" << std::setw(8) << "N" << '\n';
  os << std::setw(8) << cell(accuracy, 100.0) << std::setw(8)
     << cell(bleu, 1.0) << std::setw(8) << cell(token_f1, 100.0)
     << std::setw(8) << cell(f1a, 100.0) << std::setw(8) << n_examples
     << '\n';
  return os.str();
}

}  // namespace wt5
