#include "wt5/rating.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "test_support.h"

namespace wt5::rating {
namespace {

std::vector<RatingItem> make_items(std::size_t n) {
  std::vector<RatingItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    RatingItem it;
    it.id = "i" + std::to_string(i);
    it.input = "sentiment: review number " + std::to_string(i);
    it.label = i % 2 ? "positive" : "negative";
    it.explanation = "review number";
    if (i % 3 == 0) it.highlight = Highlight{11, 24};
    items.push_back(it);
  }
  return items;
}

std::vector<RatingItem> make_checks(std::size_t n) {
  std::vector<RatingItem> checks;
  for (std::size_t i = 0; i < n; ++i) {
    RatingItem c;
    c.id = "check" + std::to_string(i);
    c.input = "sentiment: I loved every minute.";
    c.label = "positive";
    c.explanation = i % 2 ? "loved every minute" : "the parking lot";
    c.is_attention_check = true;
    c.expected = i % 2 == 1;
    checks.push_back(c);
  }
  return checks;
}

Session make_session(std::size_t n_items, std::uint64_t seed = 1) {
  return Session::create(make_items(n_items), make_checks((n_items + 8) / 9), seed);
}

// A deterministic rater: answers real items with `verdict(item)`, answers
// the attention check correctly unless `fail_check(batch_number)`, and
// leaves a question blank when `skip(batch_number)`.
struct Rater {
  std::string id;
  std::function<bool(const std::string&)> verdict;
  std::function<bool(std::size_t)> fail_check = [](std::size_t) { return false; };
  std::function<bool(std::size_t)> skip = [](std::size_t) { return false; };
  std::size_t batches = 0;

  std::vector<std::optional<bool>> answer(const Session& s, const Batch& b) {
    ++batches;
    std::vector<std::optional<bool>> out;
    for (const auto& id : b.items) {
      const RatingItem& item = s.item(id);
      if (item.is_attention_check) {
        out.push_back(fail_check(batches) ? !*item.expected : *item.expected);
      } else {
        out.push_back(verdict(id));
      }
    }
    if (skip(batches)) out[batches % out.size()].reset();
    return out;
  }
};

// Round-robin over raters until the session completes or every rater is
// drained. Returns the number of rejected batches.
std::size_t drive(Session& s, std::vector<Rater>& raters) {
  std::size_t rejected = 0;
  for (;;) {
    bool progress = false;
    for (auto& r : raters) {
      if (s.complete()) return rejected;
      auto got = s.next_batch(r.id);
      if (std::holds_alternative<Drained>(got)) continue;
      progress = true;
      const Batch b = std::get<Batch>(got);
      if (s.submit(b.id, r.id, r.answer(s, b)).outcome == Outcome::kRejected) ++rejected;
    }
    if (!progress) return rejected;
  }
}

bool good_item(const std::string& id) { return std::stoi(id.substr(1)) % 10 != 0; }

TEST(Create, Errors) {
  EXPECT_THROW(Session::create({}, make_checks(1), 1), DataError);
  EXPECT_THROW(Session::create(make_items(5), make_checks(1), 1), DataError);
  EXPECT_THROW(Session::create(make_items(90), make_checks(9), 1), DataError);
  EXPECT_NO_THROW(Session::create(make_items(90), make_checks(10), 1));
  auto dup = make_items(9);
  dup[3].id = dup[4].id;
  EXPECT_THROW(Session::create(dup, make_checks(1), 1), DataError);
  auto unchecked = make_checks(1);
  unchecked[0].expected.reset();
  EXPECT_THROW(Session::create(make_items(9), unchecked, 1), DataError);
}

TEST(Batch, FreshBatchHasTenItemsOneCheck) {
  Session s = make_session(90);
  auto got = s.next_batch("alice");
  ASSERT_TRUE(std::holds_alternative<Batch>(got));
  const Batch& b = std::get<Batch>(got);
  ASSERT_EQ(b.items.size(), kBatchSize);
  std::size_t checks = 0;
  for (std::size_t k = 0; k < b.items.size(); ++k) {
    if (s.item(b.items[k]).is_attention_check) {
      ++checks;
      EXPECT_EQ(k, b.check_position);
    }
  }
  EXPECT_EQ(checks, 1u);
  EXPECT_EQ(b.counted.size(), kRealPerBatch);
  EXPECT_EQ(b.rater, "alice");
  EXPECT_EQ(b.status, BatchStatus::kOpen);
}

TEST(Batch, DistinctRatersGetDistinctBatches) {
  Session s = make_session(90);
  auto a = std::get<Batch>(s.next_batch("alice"));
  auto b = std::get<Batch>(s.next_batch("bob"));
  EXPECT_NE(a.id, b.id);
  // With plenty of items, concurrent batches do not overlap.
  for (const auto& id : a.counted) EXPECT_FALSE(b.counted.count(id));
}

TEST(Batch, RaterNeverSeesAnItemTwice) {
  Session s = make_session(27);
  std::set<std::string> seen;
  for (;;) {
    auto got = s.next_batch("alice");
    if (std::holds_alternative<Drained>(got)) break;
    const auto& b = std::get<Batch>(got);
    for (const auto& id : b.items) {
      if (!s.item(id).is_attention_check) EXPECT_TRUE(seen.insert(id).second) << id;
    }
  }
  EXPECT_EQ(seen.size(), 27u);
}

TEST(Batch, RaterWhoRatedEverythingIsDrained) {
  Session s = make_session(9);
  auto b = std::get<Batch>(s.next_batch("alice"));
  Rater r{"alice", [](const std::string&) { return true; }};
  EXPECT_EQ(s.submit(b.id, "alice", r.answer(s, b)).outcome, Outcome::kAccepted);
  EXPECT_TRUE(std::holds_alternative<Drained>(s.next_batch("alice")));
  const auto events = s.events().size();
  EXPECT_TRUE(std::holds_alternative<Drained>(s.next_batch("alice")));
  EXPECT_EQ(s.events().size(), events) << "drained requests are not state changes";
}

TEST(Batch, PublicJsonHidesTheCheck) {
  auto c = make_checks(2)[1];
  auto j = item_to_public_json(c);
  EXPECT_FALSE(j.contains("expected"));
  EXPECT_FALSE(j.contains("is_attention_check"));
  EXPECT_TRUE(item_to_json(c).contains("expected"));
}

TEST(Submit, AcceptedBatchAddsOneVerdictPerItem) {
  Session s = make_session(18);
  auto b = std::get<Batch>(s.next_batch("alice"));
  Rater r{"alice", [](const std::string&) { return true; }};
  EXPECT_EQ(s.submit(b.id, "alice", r.answer(s, b)).outcome, Outcome::kAccepted);
  for (const auto& id : b.counted) EXPECT_EQ(s.accepted_verdicts(id), 1u);
  EXPECT_EQ(s.batch(b.id).status, BatchStatus::kAccepted);
}

TEST(Submit, FailedCheckRecordsNothing) {
  Session s = make_session(18);
  auto b = std::get<Batch>(s.next_batch("alice"));
  Rater r{"alice", [](const std::string&) { return true; }, [](std::size_t) { return true; }};
  auto res = s.submit(b.id, "alice", r.answer(s, b));
  EXPECT_EQ(res.outcome, Outcome::kRejected);
  EXPECT_EQ(res.reason, "attention check failed");
  for (const auto& id : b.items) {
    if (!s.item(id).is_attention_check) EXPECT_EQ(s.accepted_verdicts(id), 0u);
  }
  EXPECT_EQ(s.batch(b.id).status, BatchStatus::kRejected);
}

TEST(Submit, UnansweredQuestionRejects) {
  Session s = make_session(18);
  auto b = std::get<Batch>(s.next_batch("alice"));
  Rater r{"alice", [](const std::string&) { return true; }};
  auto answers = r.answer(s, b);
  answers[(b.check_position + 1) % kBatchSize].reset();
  auto res = s.submit(b.id, "alice", answers);
  EXPECT_EQ(res.outcome, Outcome::kRejected);
  EXPECT_EQ(res.reason, "not every question was answered");
  for (const auto& id : b.counted) EXPECT_EQ(s.accepted_verdicts(id), 0u);

  auto b2 = std::get<Batch>(s.next_batch("bob"));
  answers = r.answer(s, b2);
  answers.pop_back();
  EXPECT_EQ(s.submit(b2.id, "bob", answers).outcome, Outcome::kRejected);
}

TEST(Submit, ProtocolErrors) {
  Session s = make_session(18);
  auto b = std::get<Batch>(s.next_batch("alice"));
  Rater r{"alice", [](const std::string&) { return true; }};
  auto answers = r.answer(s, b);
  auto kind = [&](auto&& f) {
    try {
      f();
    } catch (const RatingError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error";
    return RatingError::Kind::kBadSession;
  };
  EXPECT_EQ(kind([&] { s.submit("b999", "alice", answers); }), RatingError::Kind::kUnknownBatch);
  EXPECT_EQ(kind([&] { s.submit(b.id, "mallory", answers); }), RatingError::Kind::kWrongRater);
  auto too_many = answers;
  too_many.push_back(true);
  EXPECT_EQ(kind([&] { s.submit(b.id, "alice", too_many); }), RatingError::Kind::kBadAnswers);
  s.submit(b.id, "alice", answers);
  EXPECT_EQ(kind([&] { s.submit(b.id, "alice", answers); }), RatingError::Kind::kNotOpen);
  EXPECT_EQ(kind([&] { s.next_batch(""); }), RatingError::Kind::kWrongRater);
}

// A rejected batch leaves the verdict state as if it had never been issued;
// its items go back to the pool for other raters.
TEST(Submit, RejectionReturnsItemsToPool) {
  Session s = make_session(9);
  auto b = std::get<Batch>(s.next_batch("alice"));
  Rater r{"alice", [](const std::string&) { return true; }, [](std::size_t) { return true; }};
  s.submit(b.id, "alice", r.answer(s, b));
  auto after = s.state_json()["items"];
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(after[i]["verdicts"], nlohmann::ordered_json::array());
    EXPECT_EQ(after[i]["in_flight"], 0);
  }
  auto again = s.next_batch("carol");
  ASSERT_TRUE(std::holds_alternative<Batch>(again));
  EXPECT_EQ(std::get<Batch>(again).counted, b.counted);
}

TEST(Session, NinetyItemsNeedFiftyAcceptedBatches) {
  Session s = make_session(90);
  std::vector<Rater> raters;
  for (int k = 0; k < 5; ++k) raters.push_back({"r" + std::to_string(k), good_item});
  // First pass: ten batches cover every item once.
  for (int i = 0; i < 10; ++i) {
    auto& r = raters[i % 5];
    auto b = std::get<Batch>(s.next_batch(r.id));
    s.submit(b.id, r.id, r.answer(s, b));
  }
  for (const auto& it : make_items(90)) EXPECT_EQ(s.accepted_verdicts(it.id), 1u);
  EXPECT_EQ(drive(s, raters), 0u);
  EXPECT_TRUE(s.complete());
  EXPECT_EQ(s.accepted_batches(), 50u);
  EXPECT_EQ(s.issued_batches(), 50u);
}

TEST(Aggregate, MajorityOfFive) {
  // Five raters, verdicts scripted per (item, rater): item i gets exactly
  // yes_count(i) yes votes.
  Session s = make_session(9);
  auto yes_count = [](const std::string& id) { return std::stoi(id.substr(1)) % 6; };
  std::vector<Rater> raters;
  for (int k = 0; k < 5; ++k) {
    raters.push_back({"r" + std::to_string(k),
                      [k, yes_count](const std::string& id) { return k < yes_count(id); }});
  }
  drive(s, raters);
  ASSERT_TRUE(s.complete());
  Report rep = s.aggregate();
  std::size_t correct = 0;
  for (const auto& v : rep.items) {
    const int y = yes_count(v.id);
    EXPECT_EQ(v.yes, static_cast<std::size_t>(y));
    EXPECT_EQ(v.no, 5u - y);
    EXPECT_EQ(v.correct, y >= 3) << v.id;
    correct += v.correct;
  }
  // yes counts over i0..i8: 0 1 2 3 4 5 0 1 2 -> three items correct.
  EXPECT_EQ(correct, 3u);
  EXPECT_NEAR(rep.he, 100.0 * 3 / 9, 1e-12);
}

TEST(Aggregate, NonFinalItemsAreListed) {
  Session s = make_session(18);
  auto b = std::get<Batch>(s.next_batch("alice"));
  (void)b;
  try {
    s.aggregate();
    FAIL();
  } catch (const RatingError& e) {
    EXPECT_EQ(e.kind(), RatingError::Kind::kNotFinal);
    EXPECT_NE(std::string(e.what()).find("i17"), std::string::npos);
  }
  EXPECT_EQ(s.non_final_items().size(), 18u);
}

// Scripted crowd over 100 items: honest raters answer by item quality, two
// contrarians answer the opposite (never a majority), one sloppy rater
// fails every third check and one skips a question every other batch.
TEST(Session, HundredItemSimulation) {
  Session s = make_session(100, 42);
  std::vector<Rater> raters;
  for (int k = 0; k < 8; ++k) raters.push_back({"honest" + std::to_string(k), good_item});
  for (int k = 0; k < 2; ++k) {
    raters.push_back({"contrarian" + std::to_string(k),
                      [](const std::string& id) { return !good_item(id); }});
  }
  raters.push_back({"sloppy", good_item, [](std::size_t n) { return n % 3 == 0; }});
  raters.push_back({"skipper", good_item, [](std::size_t) { return false; },
                    [](std::size_t n) { return n % 2 == 0; }});
  const std::size_t rejected = drive(s, raters);
  ASSERT_TRUE(s.complete());
  EXPECT_GT(rejected, 0u);
  for (const auto& it : make_items(100)) EXPECT_EQ(s.accepted_verdicts(it.id), 5u);
  Report rep = s.aggregate();
  EXPECT_DOUBLE_EQ(rep.he, 90.0);
  for (const auto& v : rep.items) {
    EXPECT_EQ(v.yes + v.no, 5u);
    EXPECT_NE(v.yes, v.no);
    EXPECT_EQ(v.correct, good_item(v.id));
  }
  // Every accepted batch carried exactly one check and at most nine counted
  // items; rejected batches contributed nothing.
  std::size_t counted = 0;
  for (const auto& ev : s.events()) {
    if (ev["type"] == "submit" && ev["outcome"] == "accepted") {
      counted += s.batch(ev["batch"].get<std::string>()).counted.size();
    }
  }
  EXPECT_EQ(counted, 500u);
}

TEST(Replay, ReproducesDigest) {
  Session s = make_session(30, 9);
  std::vector<Rater> raters;
  for (int k = 0; k < 6; ++k) raters.push_back({"r" + std::to_string(k), good_item});
  raters.push_back({"sloppy", good_item, [](std::size_t n) { return n % 2 == 1; }});
  // Stop part-way, with an open batch outstanding.
  for (int i = 0; i < 7; ++i) {
    auto& r = raters[i % raters.size()];
    auto b = std::get<Batch>(s.next_batch(r.id));
    s.submit(b.id, r.id, r.answer(s, b));
  }
  auto open = s.next_batch("late");
  ASSERT_TRUE(std::holds_alternative<Batch>(open));
  Session back = Session::replay(s.events());
  EXPECT_EQ(back.digest(), s.digest());
  EXPECT_EQ(back.state_json(), s.state_json());

  // And after completion.
  drive(s, raters);
  Session done = Session::replay(s.events());
  EXPECT_EQ(done.digest(), s.digest());
  EXPECT_NE(done.digest(), back.digest());
}

TEST(Replay, TamperedLogIsRejected) {
  Session s = make_session(18, 3);
  auto b = std::get<Batch>(s.next_batch("alice"));
  Rater r{"alice", good_item};
  s.submit(b.id, "alice", r.answer(s, b));
  auto events = s.events();
  events[1]["items"][0] = "i999";
  EXPECT_THROW(Session::replay(events), RatingError);
  events = s.events();
  events[2]["outcome"] = "rejected";
  EXPECT_THROW(Session::replay(events), RatingError);
  EXPECT_THROW(Session::replay({}), RatingError);
}

TEST(EventLog, AppendReadAndTornTail) {
  testing::TempDir dir;
  const auto path = dir / "s.events.jsonl";
  {
    EventLog log(path);
    log.append({{"type", "create"}, {"n", 1}});
    log.append({{"type", "issue"}, {"n", 2}});
  }
  EXPECT_EQ(EventLog::read(path).size(), 2u);
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"type":"sub)";
  }
  EXPECT_EQ(EventLog::read(path).size(), 2u);
  {
    EventLog log(path);
    log.append({{"type", "submit"}, {"n", 3}});
  }
  auto events = EventLog::read(path);
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[2]["n"], 3);
}

TEST(Source, ParsesItemsFile) {
  auto j = nlohmann::json::parse(R"({
    "seed": 4,
    "items": [{"id": "a", "input": "x", "label": "positive", "explanation": "y",
               "highlight": {"start": 0, "end": 1}}],
    "checks": [{"id": "c", "input": "x", "label": "positive", "explanation": "z", "expected": false}]
  })");
  auto src = parse_session_source(j);
  ASSERT_EQ(src.items.size(), 1u);
  EXPECT_EQ(src.items[0].highlight, (Highlight{0, 1}));
  EXPECT_FALSE(src.items[0].is_attention_check);
  EXPECT_TRUE(src.checks[0].is_attention_check);
  EXPECT_EQ(src.checks[0].expected, false);
  EXPECT_EQ(src.seed, 4u);
  j["items"][0]["expected"] = true;
  EXPECT_THROW(parse_session_source(j), DataError);
}

}  // namespace
}  // namespace wt5::rating
