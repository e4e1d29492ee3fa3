#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "wt5/errors.h"
#include "wt5/random.h"

namespace wt5::rating {

inline constexpr std::size_t kBatchSize = 10;
inline constexpr std::size_t kRealPerBatch = kBatchSize - 1;
inline constexpr std::size_t kVerdictsPerItem = 5;

// Character range of an extracted span inside the displayed input, shown
// one span per item.
struct Highlight {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Highlight&) const = default;
};

struct RatingItem {
  std::string id;
  std::string input;
  std::string label;
  std::string explanation;
  std::optional<Highlight> highlight;
  bool is_attention_check = false;
  std::optional<bool> expected;  // set iff is_attention_check

  bool operator==(const RatingItem&) const = default;
};

RatingItem item_from_json(const nlohmann::json& j, bool is_check);
nlohmann::ordered_json item_to_json(const RatingItem& item);
// What a rater gets to see: no check flag, no expected answer.
nlohmann::ordered_json item_to_public_json(const RatingItem& item);

enum class BatchStatus { kOpen, kAccepted, kRejected };
std::string to_string(BatchStatus s);

struct Batch {
  std::string id;
  std::string rater;
  std::vector<std::string> items;  // kBatchSize ids in display order
  std::size_t check_position = 0;
  // Real items whose verdicts count; the rest only fill the batch to size
  // once fewer than nine items still owe verdicts.
  std::set<std::string> counted;
  BatchStatus status = BatchStatus::kOpen;
};

struct Drained {};

enum class Outcome { kAccepted, kRejected };

struct SubmitResult {
  Outcome outcome = Outcome::kAccepted;
  std::string reason;  // for rejections
};

// Thrown for protocol misuse (unknown batch, double submission, wrong
// rater, wrong answer count).
class RatingError : public DataError {
 public:
  enum class Kind { kUnknownBatch, kNotOpen, kWrongRater, kBadAnswers, kNotFinal, kBadSession };
  RatingError(Kind kind, const std::string& message) : DataError(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ItemVerdict {
  std::string id;
  std::size_t yes = 0;
  std::size_t no = 0;
  bool correct = false;
};

struct Report {
  std::vector<ItemVerdict> items;
  double he = 0.0;  // percentage of items judged correct

  nlohmann::ordered_json to_json() const;
};

// Human-evaluation session: every real item collects five accepted yes/no
// verdicts from distinct raters, nine real items plus one attention check
// per batch. Every mutation is appended to an event log; replaying the log
// reproduces the state exactly.
class Session {
 public:
  static Session create(std::vector<RatingItem> items, std::vector<RatingItem> checks,
                        std::uint64_t seed);
  static Session replay(const std::vector<nlohmann::json>& events);

  std::variant<Batch, Drained> next_batch(const std::string& rater);
  // `answers` holds kBatchSize entries in display order; nullopt means
  // unanswered.
  SubmitResult submit(const std::string& batch_id, const std::string& rater,
                      const std::vector<std::optional<bool>>& answers);
  Report aggregate() const;

  bool complete() const;
  std::vector<std::string> non_final_items() const;
  std::size_t accepted_verdicts(const std::string& item_id) const;
  const Batch& batch(const std::string& batch_id) const;
  const RatingItem& item(const std::string& id) const;
  std::size_t accepted_batches() const;
  std::size_t issued_batches() const { return batches_.size(); }

  // Canonical state serialization and its FNV-1a digest.
  nlohmann::ordered_json state_json() const;
  std::string digest() const;

  const std::vector<nlohmann::json>& events() const { return events_; }

 private:
  Session(std::vector<RatingItem> items, std::vector<RatingItem> checks, std::uint64_t seed);

  struct ItemState {
    std::vector<bool> verdicts;  // accepted only
    std::size_t in_flight = 0;   // counted slots in open batches
    std::size_t order = 0;       // seeded tie-break rank
  };

  std::vector<RatingItem> items_;
  std::vector<RatingItem> checks_;
  std::map<std::string, std::size_t> item_index_;
  std::map<std::string, std::size_t> check_index_;
  std::vector<ItemState> state_;
  std::vector<std::size_t> check_order_;
  std::map<std::string, std::set<std::string>> seen_;  // rater -> real items
  std::map<std::string, Batch> batches_;
  std::uint64_t seed_;
  Rng rng_;
  std::size_t batch_counter_ = 0;
  std::vector<nlohmann::json> events_;
};

// Append-only JSONL event log. Each event is flushed before the call that
// produced it returns.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);
  static std::vector<nlohmann::json> read(const std::filesystem::path& path);
  void append(const nlohmann::json& event);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// Items file: {"items": [...], "checks": [...], "seed": N}. Item objects are
// {"id", "input", "label", "explanation", "highlight"?: {"start","end"}};
// checks additionally carry "expected": bool.
struct SessionSource {
  std::vector<RatingItem> items;
  std::vector<RatingItem> checks;
  std::uint64_t seed = 0;
};
SessionSource parse_session_source(const nlohmann::json& j);

}  // namespace wt5::rating
