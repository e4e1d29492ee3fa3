#include "wt5/seq2seq.h"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "test_support.h"
#include "wt5/random.h"

namespace wt5::seq2seq {
namespace {

using Eigen::MatrixXd;

Vocabulary letters(std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back("w" + std::to_string(i));
  return Vocabulary::from_tokens(t);
}

std::vector<int> random_ids(Rng& rng, std::size_t vocab, std::size_t min_len, std::size_t max_len) {
  std::vector<int> out(min_len + rng.below(max_len - min_len + 1));
  for (auto& id : out) id = static_cast<int>(kNumReserved + rng.below(vocab - kNumReserved));
  return out;
}

std::vector<EncodedPair> random_batch(Rng& rng, std::size_t vocab, std::size_t n) {
  std::vector<EncodedPair> batch(n);
  for (auto& p : batch) {
    p.input = random_ids(rng, vocab, 1, 6);
    p.target = random_ids(rng, vocab, 0, 4);
    p.target.push_back(kEos);
  }
  return batch;
}

// Scales every tensor so logits and gates leave the near-linear regime.
void scale_params(ToyModel& m, double s) {
  m.params().visit([&](const char*, MatrixXd& x) { x *= s; });
}

TEST(Vocabulary, SmallCorpus) {
  auto v = Vocabulary::build({{"a b", "c", false}}, 1);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.token(kPad), "<pad>");
  EXPECT_EQ(v.token(kEos), "</s>");
  EXPECT_EQ(v.token(kUnk), "<unk>");
  EXPECT_EQ(v.id("a"), 3);
  EXPECT_EQ(v.id("b"), 4);
  EXPECT_EQ(v.id("c"), 5);
  EXPECT_EQ(v.id("zzz"), kUnk);
}

TEST(Vocabulary, FrequencyThenLexicographic) {
  auto v = Vocabulary::build({{"b a b", "c b", false}, {"a d", "d", false}}, 1);
  // b:3, a:2, d:2, c:1
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "</s>", "<unk>", "b", "a", "d", "c"}));
  auto v2 = Vocabulary::build({{"b a b", "c b", false}, {"a d", "d", false}}, 2);
  EXPECT_EQ(v2.tokens(), (std::vector<std::string>{"<pad>", "</s>", "<unk>", "b", "a", "d"}));
  EXPECT_EQ(v2.encode("c b"), (std::vector<int>{kUnk, 3}));
}

TEST(Vocabulary, MinCountAboveEverythingLeavesReserved) {
  auto v = Vocabulary::build({{"a b", "c", false}}, 5);
  EXPECT_EQ(v.size(), 3u);
}

TEST(Vocabulary, DeterministicAndErrors) {
  std::vector<FormattedPair> pairs{{"x y z", "y", false}, {"z z", "x", true}};
  EXPECT_EQ(Vocabulary::build(pairs, 1), Vocabulary::build(pairs, 1));
  EXPECT_THROW(Vocabulary::build({}, 1), DataError);
  EXPECT_THROW(Vocabulary::from_tokens({"a", "a"}), DataError);
}

TEST(Vocabulary, DecodeSkipsPadAndEos) {
  auto v = letters(3);
  EXPECT_EQ(v.decode(std::vector<int>{3, kPad, 4, kUnk, kEos, 5}), "w0 w1 <unk> w2");
}

TEST(Loss, UniformSoftmaxGivesLogV) {
  ToyModel m(letters(9), 8, 1);
  m.params().output_w.setZero();
  m.params().output_b.setZero();
  Rng rng(2);
  auto batch = random_batch(rng, 12, 5);
  EXPECT_NEAR(m.loss(batch), std::log(12.0), 1e-12);
}

TEST(Loss, LengthWeightedMeanOfSequences) {
  ToyModel m(letters(9), 8, 3);
  scale_params(m, 5.0);
  Rng rng(4);
  auto batch = random_batch(rng, 12, 6);
  double weighted = 0.0;
  std::size_t tokens = 0;
  for (const auto& p : batch) {
    weighted += m.loss(std::span<const EncodedPair>(&p, 1)) * static_cast<double>(p.target.size());
    tokens += p.target.size();
  }
  EXPECT_NEAR(m.loss(batch), weighted / static_cast<double>(tokens), 1e-12);
  EXPECT_GE(m.loss(batch), 0.0);
}

TEST(Loss, MatchesGradientPassValue) {
  ToyModel m(letters(9), 8, 5);
  Rng rng(6);
  auto batch = random_batch(rng, 12, 4);
  Params g;
  EXPECT_NEAR(m.loss_and_gradient(batch, g), m.loss(batch), 1e-12);
}

TEST(Loss, RejectsOutOfRangeIds) {
  ToyModel m(letters(9), 8, 5);
  std::vector<EncodedPair> batch{{{3, 99}, {kEos}}};
  EXPECT_THROW(m.loss(batch), DataError);
  Params g;
  EXPECT_THROW(m.loss_and_gradient(batch, g), DataError);
  EXPECT_THROW(m.greedy_decode(std::vector<int>{-1}, 3), DataError);
}

// Centered finite differences against the analytic gradient, coordinate by
// coordinate, on every tensor of a width-8, vocabulary-12 model.
TEST(Gradient, MatchesFiniteDifferences) {
  ToyModel m(letters(9), 8, 7);
  scale_params(m, 6.0);
  Rng rng(8);
  auto batch = random_batch(rng, 12, 3);
  Params analytic;
  m.loss_and_gradient(batch, analytic);
  std::vector<const MatrixXd*> grads;
  analytic.visit([&](const char*, const MatrixXd& g) { grads.push_back(&g); });

  const double h = 1e-5;
  std::size_t k = 0;
  m.params().visit([&](const char* name, MatrixXd& w) {
    const MatrixXd& g = *grads[k++];
    double worst = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w.data()[i];
      w.data()[i] = orig + h;
      const double up = m.loss(batch);
      w.data()[i] = orig - h;
      const double down = m.loss(batch);
      w.data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = g.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
      worst = std::max(worst, rel);
    }
    EXPECT_LT(worst, 1e-4) << name;
  });
}

TEST(TrainStep, ZeroLearningRateLeavesParams) {
  ToyModel m(letters(9), 8, 9);
  const Params before = m.params();
  Rng rng(10);
  auto batch = random_batch(rng, 12, 4);
  const double loss = train_step(m, batch, 0.0);
  EXPECT_NEAR(loss, m.loss(batch), 1e-15);
  std::vector<const MatrixXd*> a;
  before.visit([&](const char*, const MatrixXd& x) { a.push_back(&x); });
  std::size_t k = 0;
  m.params().visit([&](const char* name, const MatrixXd& x) { EXPECT_EQ(x, *a[k++]) << name; });
}

TEST(TrainStep, UpdateIsMinusLrTimesGradient) {
  ToyModel m(letters(9), 8, 11);
  ToyModel expected = m;
  Rng rng(12);
  auto batch = random_batch(rng, 12, 4);
  Params g;
  m.loss_and_gradient(batch, g);
  train_step(m, batch, 0.25);
  std::vector<const MatrixXd*> gs;
  g.visit([&](const char*, const MatrixXd& x) { gs.push_back(&x); });
  std::size_t k = 0;
  expected.params().visit([&](const char*, MatrixXd& x) { x -= 0.25 * *gs[k++]; });
  std::vector<const MatrixXd*> want;
  expected.params().visit([&](const char*, const MatrixXd& x) { want.push_back(&x); });
  k = 0;
  m.params().visit([&](const char* name, const MatrixXd& x) { EXPECT_EQ(x, *want[k++]) << name; });
}

TEST(TrainStep, LossNonIncreasingForSmallSteps) {
  int ok = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    Rng rng(1000 + t);
    ToyModel m(letters(9), 8, rng.next());
    scale_params(m, 4.0);
    auto batch = random_batch(rng, 12, 4);
    const double l0 = train_step(m, batch, 0.05);
    const double l1 = train_step(m, batch, 0.05);
    const double l2 = m.loss(batch);
    ok += l1 <= l0 && l2 <= l1;
  }
  EXPECT_GE(ok, 95);
}

TEST(TrainStep, DivergenceIsReportedAndModelKept) {
  ToyModel m(letters(9), 8, 13);
  m.params().output_b(3, 0) = std::numeric_limits<double>::infinity();
  const MatrixXd before = m.params().embedding;
  Rng rng(14);
  auto batch = random_batch(rng, 12, 2);
  EXPECT_THROW(train_step(m, batch, 0.1), DivergenceError);
  EXPECT_EQ(m.params().embedding, before);
}

TEST(Train, DeterministicForFixedSeed) {
  Rng rng(15);
  auto data = random_batch(rng, 12, 40);
  TrainConfig c;
  c.steps = 30;
  c.batch_size = 4;
  c.learning_rate = 0.3;
  c.seed = 77;
  ToyModel a(letters(9), 8, 16), b(letters(9), 8, 16);
  auto la = train(a, data, c);
  auto lb = train(b, data, c);
  EXPECT_EQ(la, lb);
  std::vector<const MatrixXd*> pa;
  a.params().visit([&](const char*, const MatrixXd& x) { pa.push_back(&x); });
  std::size_t k = 0;
  b.params().visit([&](const char* name, const MatrixXd& x) { EXPECT_EQ(x, *pa[k++]) << name; });
  EXPECT_TRUE(a.params().all_finite());
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), DataError);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), DataError);
  ToyModel m(letters(3), 4, 1);
  EXPECT_THROW(train(m, {}, TrainConfig{}), DataError);
}

TEST(Train, LearnsToCopyASmallMapping) {
  // Two fixed pairs: enough for a sanity check that training reduces loss
  // and greedy decoding reproduces the targets.
  std::vector<FormattedPair> pairs{{"x one", "a b", false}, {"x two", "c", false}};
  auto vocab = Vocabulary::build(pairs, 1);
  ToyModel m(vocab, 16, 3);
  std::vector<EncodedPair> data;
  for (const auto& p : pairs) data.push_back(m.encode_pair(p, 16, 16));
  TrainConfig c;
  c.steps = 300;
  c.batch_size = 2;
  c.learning_rate = 0.5;
  auto losses = train(m, data, c);
  EXPECT_LT(losses.back(), losses.front() / 10);
  EXPECT_EQ(m.generate("x one", 1, 10), "a b");
  EXPECT_EQ(m.generate("x two", 1, 10), "c");
  EXPECT_EQ(m.generate("x two", 4, 10), "c");
}

TEST(Greedy, EosFirstGivesEmptyOutput) {
  ToyModel m(letters(9), 8, 17);
  m.params().output_w.setZero();
  m.params().output_b.setZero();
  m.params().output_b(kEos, 0) = 1.0;
  EXPECT_TRUE(m.greedy_decode(std::vector<int>{3, 4}, 10).empty());
  EXPECT_TRUE(m.beam_decode(std::vector<int>{3, 4}, 3, 10).empty());
}

TEST(Greedy, TiesGoToLowestId) {
  ToyModel m(letters(9), 8, 17);
  m.params().output_w.setZero();
  m.params().output_b.setZero();
  m.params().output_b(5, 0) = 2.0;
  m.params().output_b(7, 0) = 2.0;
  EXPECT_EQ(m.greedy_decode(std::vector<int>{3}, 4), (std::vector<int>{5, 5, 5, 5}));
}

TEST(Greedy, LengthBounded) {
  Rng rng(18);
  for (int t = 0; t < 20; ++t) {
    ToyModel m(letters(9), 8, rng.next());
    scale_params(m, 10.0);
    const std::size_t max_len = rng.below(6);
    EXPECT_LE(m.greedy_decode(random_ids(rng, 12, 1, 5), max_len).size(), max_len);
  }
}

TEST(Beam, WidthOneEqualsGreedy) {
  for (int t = 0; t < 50; ++t) {
    Rng rng(2000 + t);
    const std::size_t extra = 2 + rng.below(12);
    ToyModel m(letters(extra), 4 + rng.below(8), rng.next());
    scale_params(m, 1.0 + 15.0 * rng.unit());
    const auto input = random_ids(rng, extra + kNumReserved, 1, 8);
    EXPECT_EQ(m.beam_decode(input, 1, 12), m.greedy_decode(input, 12)) << "trial " << t;
  }
}

TEST(Beam, SoftmaxRowsSumToOne) {
  Rng rng(19);
  ToyModel m(letters(9), 8, 20);
  scale_params(m, 8.0);
  const auto input = random_ids(rng, 12, 2, 6);
  auto out = m.greedy_decode(input, 8);
  for (std::size_t i = 0; i <= out.size(); ++i) {
    auto p = m.next_token_probs(input, std::span<const int>(out.data(), i));
    EXPECT_NEAR(p.sum(), 1.0, 1e-6);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

// A fixed next-token table over {EOS, a, b} keyed by prefix.
struct Table {
  std::map<std::vector<int>, std::array<double, 3>> probs;
  std::array<double, 3> at(const std::vector<int>& prefix) const {
    auto it = probs.find(prefix);
    return it == probs.end() ? std::array<double, 3>{1.0 / 3, 1.0 / 3, 1.0 / 3} : it->second;
  }
};

Hypothesis run_beam(const Table& table, std::size_t beam, std::size_t max_len) {
  auto expand = [&](const std::vector<int>& prefix, int token) {
    std::vector<int> next = prefix;
    if (token >= 0) next.push_back(token);
    auto p = table.at(next);
    Eigen::VectorXd logp(3);
    for (int i = 0; i < 3; ++i) logp[i] = std::log(p[i]);
    return std::pair<std::vector<int>, Eigen::VectorXd>(next, logp);
  };
  return beam_search<std::vector<int>>({}, -1, expand, 0, beam, max_len);
}

// Exhaustive oracle: best log-probability over every sequence that ends in
// EOS within max_len, or runs to max_len.
std::pair<double, std::vector<int>> best_sequence(const Table& table, std::size_t max_len) {
  std::pair<double, std::vector<int>> best{-INFINITY, {}};
  std::function<void(std::vector<int>&, double)> walk = [&](std::vector<int>& prefix, double lp) {
    if (prefix.size() == max_len) {
      if (lp > best.first) best = {lp, prefix};
      return;
    }
    auto p = table.at(prefix);
    if (std::log(p[0]) + lp > best.first) best = {std::log(p[0]) + lp, prefix};
    for (int t = 1; t < 3; ++t) {
      prefix.push_back(t);
      walk(prefix, lp + std::log(p[t]));
      prefix.pop_back();
    }
  };
  std::vector<int> start;
  walk(start, 0.0);
  return best;
}

TEST(Beam, FindsWhatGreedyMisses) {
  Table t;
  t.probs[{}] = {0.05, 0.55, 0.40};
  t.probs[{1}] = {0.30, 0.35, 0.35};
  t.probs[{1, 1}] = {0.30, 0.35, 0.35};
  t.probs[{1, 2}] = {0.30, 0.35, 0.35};
  t.probs[{2}] = {0.95, 0.03, 0.02};
  auto greedy = run_beam(t, 1, 3);
  auto beam = run_beam(t, 3, 3);
  auto oracle = best_sequence(t, 3);
  EXPECT_EQ(oracle.second, std::vector<int>{2});
  EXPECT_EQ(beam.tokens, oracle.second);
  EXPECT_NEAR(beam.log_prob, oracle.first, 1e-12);
  EXPECT_TRUE(beam.complete);
  EXPECT_NE(greedy.tokens, oracle.second);
  EXPECT_LT(greedy.log_prob, beam.log_prob);
}

TEST(Beam, WideBeamIsExactOnRandomTables) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    Table t;
    std::function<void(std::vector<int>&)> fill = [&](std::vector<int>& prefix) {
      std::array<double, 3> p{};
      double z = 0;
      for (auto& x : p) z += (x = 0.01 + rng.unit());
      for (auto& x : p) x /= z;
      t.probs[prefix] = p;
      if (prefix.size() == 3) return;
      for (int tok = 1; tok < 3; ++tok) {
        prefix.push_back(tok);
        fill(prefix);
        prefix.pop_back();
      }
    };
    std::vector<int> root;
    fill(root);
    auto oracle = best_sequence(t, 3);
    auto beam = run_beam(t, 8, 3);
    ASSERT_NEAR(beam.log_prob, oracle.first, 1e-12) << trial;
    ASSERT_EQ(beam.tokens, oracle.second) << trial;
  }
}

TEST(Beam, ZeroWidthRejected) {
  Table t;
  EXPECT_THROW(run_beam(t, 0, 3), std::invalid_argument);
}

TEST(Checkpoint, RoundTrip) {
  testing::TempDir dir;
  ToyModel m(Vocabulary::from_tokens({"héllo", "wörld", "x"}), 8, 22);
  scale_params(m, 3.0);
  m.save(dir / "m.bin");
  ToyModel back = ToyModel::load(dir / "m.bin");
  EXPECT_EQ(back.vocab(), m.vocab());
  EXPECT_EQ(back.dim(), 8u);
  std::vector<const MatrixXd*> a;
  m.params().visit([&](const char*, const MatrixXd& x) { a.push_back(&x); });
  std::size_t k = 0;
  back.params().visit([&](const char* name, const MatrixXd& x) { EXPECT_EQ(x, *a[k++]) << name; });
  EXPECT_EQ(back.generate("héllo x", 1, 5), m.generate("héllo x", 1, 5));
}

TEST(Checkpoint, ByteLayoutHeader) {
  testing::TempDir dir;
  ToyModel m(letters(2), 4, 1);
  m.save(dir / "m.bin");
  const std::string bytes = testing::read_file(dir / "m.bin");
  ASSERT_GE(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 8), std::string("WT5TOYM\0", 8));
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 3])) << 24;
  };
  EXPECT_EQ(u32(8), 1u);   // version
  EXPECT_EQ(u32(12), 4u);  // width
  EXPECT_EQ(u32(16), 5u);  // vocabulary size
  // Header, vocabulary, tensor count, then 15 named tensors of f64.
  std::size_t expect = 20;
  for (const auto& t : m.vocab().tokens()) expect += 4 + t.size();
  expect += 4;
  m.params().visit([&](const char* name, const MatrixXd& x) {
    expect += 4 + std::strlen(name) + 8 + 8 * static_cast<std::size_t>(x.size());
  });
  EXPECT_EQ(bytes.size(), expect);
}

TEST(Checkpoint, CorruptFilesRejected) {
  testing::TempDir dir;
  ToyModel m(letters(2), 4, 1);
  m.save(dir / "m.bin");
  std::string bytes = testing::read_file(dir / "m.bin");
  testing::write_file(dir / "trunc.bin", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(ToyModel::load(dir / "trunc.bin"), DataError);
  bytes[0] = 'X';
  testing::write_file(dir / "magic.bin", bytes);
  EXPECT_THROW(ToyModel::load(dir / "magic.bin"), DataError);
  EXPECT_THROW(ToyModel::load(dir / "missing.bin"), DataError);
}

}  // namespace
}  // namespace wt5::seq2seq
