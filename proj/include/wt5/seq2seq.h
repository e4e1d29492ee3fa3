#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wt5/errors.h"
#include "wt5/formatter.h"

namespace wt5::seq2seq {

inline constexpr int kPad = 0;
inline constexpr int kEos = 1;
inline constexpr int kUnk = 2;
inline constexpr int kNumReserved = 3;

// Word-level vocabulary. Ids 0..2 are PAD, EOS and UNK; the remaining ids
// are ordered by descending frequency, then lexicographically.
class Vocabulary {
 public:
  Vocabulary();

  // Counts whitespace-separated tokens of inputs and targets. Throws on an
  // empty corpus.
  static Vocabulary build(const std::vector<FormattedPair>& pairs,
                          std::size_t min_count);
  // `tokens` become ids 3, 4, ... in the given order.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::string_view text) const;
  // Joins tokens with single spaces; reserved ids other than UNK are
  // skipped.
  std::string decode(std::span<const int> ids) const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// All trainable tensors. Vectors are stored as single-column matrices so
// every tensor can be visited uniformly.
struct Params {
  Eigen::MatrixXd embedding;  // V x d, shared by encoder and decoder
  Eigen::MatrixXd enc_fwd_wx, enc_fwd_wh, enc_fwd_b;  // GRU: 3d x d, 3d x d, 3d
  Eigen::MatrixXd enc_bwd_wx, enc_bwd_wh, enc_bwd_b;
  Eigen::MatrixXd dec_wx, dec_wh, dec_b;
  Eigen::MatrixXd attention;  // d x 2d: score_j = s . (A h_j)
  Eigen::MatrixXd combine_w, combine_b;  // d x 3d, d
  Eigen::MatrixXd output_w, output_b;    // V x d, V

  static Params zeros(std::size_t vocab, std::size_t dim);

  template <typename F>
  void visit(F&& f) {
    f("embedding", embedding);
    f("enc_fwd_wx", enc_fwd_wx);
    f("enc_fwd_wh", enc_fwd_wh);
    f("enc_fwd_b", enc_fwd_b);
    f("enc_bwd_wx", enc_bwd_wx);
    f("enc_bwd_wh", enc_bwd_wh);
    f("enc_bwd_b", enc_bwd_b);
    f("dec_wx", dec_wx);
    f("dec_wh", dec_wh);
    f("dec_b", dec_b);
    f("attention", attention);
    f("combine_w", combine_w);
    f("combine_b", combine_b);
    f("output_w", output_w);
    f("output_b", output_b);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<Params*>(this)->visit(
        [&](const char* name, Eigen::MatrixXd& m) {
          f(name, static_cast<const Eigen::MatrixXd&>(m));
        });
  }

  bool all_finite() const;
  std::size_t parameter_count() const;
};

struct EncodedPair {
  std::vector<int> input;
  std::vector<int> target;  // ends with EOS
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hypothesis {
  std::vector<int> tokens;  // EOS excluded
  double log_prob = 0.0;
  bool complete = false;  // ended with EOS rather than at max_len
};

// Single-layer bidirectional GRU encoder, GRU decoder with bilinear
// dot-product attention, tanh combination layer and softmax output.
class ToyModel {
 public:
  // Uniform initialization in [-0.08, 0.08] under `seed`.
  ToyModel(Vocabulary vocab, std::size_t dim, std::uint64_t seed);
  ToyModel(Vocabulary vocab, Params params);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  Params& params() { return params_; }
  const Params& params() const { return params_; }

  EncodedPair encode_pair(const FormattedPair& pair, std::size_t max_input,
                          std::size_t max_target) const;

  // Mean negative log-likelihood per target token under teacher forcing.
  double loss(std::span<const EncodedPair> batch) const;
  // Same value; accumulates d loss / d params into `grad` (overwritten).
  double loss_and_gradient(std::span<const EncodedPair> batch,
                           Params& grad) const;

  std::vector<int> greedy_decode(std::span<const int> input,
                                 std::size_t max_len) const;
  std::vector<int> beam_decode(std::span<const int> input, std::size_t beam,
                               std::size_t max_len) const;
  Hypothesis beam_search(std::span<const int> input, std::size_t beam,
                         std::size_t max_len) const;

  // Next-token distribution after feeding `prefix` (without the start
  // token). Exposed for inspection and tests.
  Eigen::VectorXd next_token_probs(std::span<const int> input,
                                   std::span<const int> prefix) const;

  // Decodes text to text with greedy (beam == 1) or beam search.
  std::string generate(std::string_view input_text, std::size_t beam,
                       std::size_t max_len) const;

  void save(const std::filesystem::path& path) const;
  static ToyModel load(const std::filesystem::path& path);

 private:
  struct Encoding {
    Eigen::MatrixXd memory;  // 2d x T
    Eigen::MatrixXd keys;    // d x T
    Eigen::VectorXd initial;
  };
  Encoding encode(std::span<const int> input) const;
  // One decoder step; writes the new state, returns output logits.
  Eigen::VectorXd step(const Encoding& enc, const Eigen::VectorXd& state,
                       int prev_token, Eigen::VectorXd& next_state) const;
  void check_ids(std::span<const int> ids) const;

  Vocabulary vocab_;
  std::size_t dim_;
  Params params_;
};

// Plain SGD: params -= lr * grad. Returns the loss before the update.
// Throws DivergenceError (leaving the model untouched) on a non-finite loss
// or gradient.
double train_step(ToyModel& model, std::span<const EncodedPair> batch,
                  double lr);

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  double learning_rate = 0.5;
  std::uint64_t seed = 1;
  std::size_t max_input_len = 64;
  std::size_t max_target_len = 32;

  void validate() const;
};

// Runs config.steps SGD steps over epochs of the data reshuffled under
// config.seed. `on_step(step, loss)` is called after every step.
std::vector<double> train(
    ToyModel& model, const std::vector<EncodedPair>& data,
    const TrainConfig& config,
    const std::function<void(std::size_t, double)>& on_step = {});

// Length-complete beam search over summed log-probabilities. `expand(state,
// token)` feeds `token` and returns the successor state together with the
// log-probabilities of every next token. Candidates are ranked by score,
// ties broken by lexicographically smaller token ids.
template <typename State, typename Expand>
Hypothesis beam_search(State initial, int start_token, Expand&& expand,
                       int eos, std::size_t beam, std::size_t max_len) {
  if (beam == 0) throw std::invalid_argument("beam width must be >= 1");
  struct Live {
    std::vector<int> tokens;
    double score;
    State state;
    int last;
  };
  struct Candidate {
    std::size_t parent;
    int token;
    double score;
  };
  auto better = [](double sa, const std::vector<int>& ta, double sb,
                   const std::vector<int>& tb) {
    if (sa != sb) return sa > sb;
    return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(),
                                        tb.end());
  };

  std::vector<Live> alive{{{}, 0.0, std::move(initial), start_token}};
  std::vector<Hypothesis> finished;
  bool exhausted = true;
  for (std::size_t t = 0; t < max_len && !alive.empty(); ++t) {
    std::vector<State> successors;
    std::vector<Candidate> cands;
    successors.reserve(alive.size());
    for (std::size_t b = 0; b < alive.size(); ++b) {
      auto [next, logp] = expand(alive[b].state, alive[b].last);
      successors.push_back(std::move(next));
      for (std::size_t v = 0; v < static_cast<std::size_t>(logp.size()); ++v) {
        cands.push_back({b, static_cast<int>(v), alive[b].score + logp[v]});
      }
    }
    auto tokens_of = [&](const Candidate& c) {
      std::vector<int> toks = alive[c.parent].tokens;
      toks.push_back(c.token);
      return toks;
    };
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [&](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return better(a.score, tokens_of(a), b.score,
                                      tokens_of(b));
                      });
    std::vector<Live> next_alive;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = cands[i];
      if (c.token == eos) {
        finished.push_back({alive[c.parent].tokens, c.score, true});
      } else {
        next_alive.push_back(
            {tokens_of(c), c.score, successors[c.parent], c.token});
      }
    }
    alive = std::move(next_alive);
    if (!alive.empty() && !finished.empty()) {
      double best_finished = finished.front().log_prob;
      for (const auto& h : finished) best_finished = std::max(best_finished, h.log_prob);
      double best_alive = alive.front().score;
      for (const auto& l : alive) best_alive = std::max(best_alive, l.score);
      // Scores only decrease as hypotheses grow.
      if (best_finished >= best_alive) {
        exhausted = false;
        break;
      }
    }
  }
  if (exhausted) {
    for (auto& l : alive) finished.push_back({std::move(l.tokens), l.score, false});
  }
  if (finished.empty()) return {};
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (better(finished[i].log_prob, finished[i].tokens, finished[best].log_prob,
               finished[best].tokens)) {
      best = i;
    }
  }
  return finished[best];
}

}  // namespace wt5::seq2seq
