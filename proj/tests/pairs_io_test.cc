#include "wt5/pairs_io.h"

#include <gtest/gtest.h>

#include "test_support.h"

namespace wt5 {
namespace {

FormattedPair pair(std::string input, std::string target) {
  FormattedPair p;
  p.wants_explanation = input.starts_with("explain ");
  p.input_text = std::move(input);
  p.target_text = std::move(target);
  return p;
}

TEST(Tsv, Escapes) {
  EXPECT_EQ(tsv_escape("a\tb\nc\rd\\e"), "a\\tb\\nc\\rd\\\\e");
  EXPECT_EQ(tsv_unescape("a\\tb\\nc\\rd\\\\e"), "a\tb\nc\rd\\e");
  EXPECT_EQ(tsv_unescape("odd\\q and trailing\\"), "odd\\q and trailing\\");
}

TEST(Tsv, EscapeRoundTripProperty) {
  Rng rng(31);
  const std::string alphabet = "ab \t\n\r\\tnr\xc3\xa9";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const std::size_t n = rng.below(20);
    for (std::size_t k = 0; k < n; ++k) s += alphabet[rng.below(alphabet.size())];
    const std::string escaped = tsv_escape(s);
    ASSERT_EQ(escaped.find_first_of("\t\n\r"), std::string::npos);
    ASSERT_EQ(tsv_unescape(escaped), s);
  }
}

TEST(Pairs, RoundTripBothFormats) {
  std::vector<FormattedPair> pairs{
      pair("explain sentiment: it was \"great\"\tno", "positive explanation: it was"),
      pair("nli hypothesis: a\\b premise: c\nd", "neutral"),
      pair("cos_e question: é? choice: x", "x"),
      pair("explain x: y", ""),
  };
  testing::TempDir dir;
  for (auto format : {PairFormat::kJsonl, PairFormat::kTsv}) {
    const auto path = dir / "p";
    write_pairs(path, pairs, format);
    EXPECT_EQ(read_pairs(path, format), pairs);
  }
}

TEST(Pairs, FormatNamesAndErrors) {
  EXPECT_EQ(parse_pair_format("jsonl"), PairFormat::kJsonl);
  EXPECT_EQ(parse_pair_format("tsv"), PairFormat::kTsv);
  EXPECT_THROW(parse_pair_format("csv"), DataError);
  testing::TempDir dir;
  testing::write_file(dir / "bad.tsv", "fine\tline\nno tab here\n");
  try {
    read_pairs(dir / "bad.tsv", PairFormat::kTsv);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  testing::write_file(dir / "bad.jsonl", "{\"input\": 3}\n");
  EXPECT_THROW(read_pairs(dir / "bad.jsonl", PairFormat::kJsonl), DataError);
  EXPECT_THROW(read_pairs(dir / "missing", PairFormat::kJsonl), DataError);
}

TEST(Predictions, RoundTripAndUniqueIds) {
  testing::TempDir dir;
  std::vector<Prediction> preds{{"a", "positive"}, {"b", "negative explanation: x\ty"}};
  write_predictions(dir / "p.jsonl", preds);
  auto back = read_predictions(dir / "p.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].output, preds[1].output);
  testing::write_file(dir / "dup.jsonl",
                      "{\"id\":\"a\",\"output\":\"x\"}\n\n{\"id\":\"a\",\"output\":\"y\"}\n");
  try {
    read_predictions(dir / "dup.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("duplicate prediction id a"), std::string::npos);
  }
}

}  // namespace
}  // namespace wt5
