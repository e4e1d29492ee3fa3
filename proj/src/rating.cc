#include "wt5/rating.h"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace wt5::rating {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

RatingItem item_from_json(const json& j, bool is_check) {
  RatingItem item;
  try {
    item.id = j.at("id").get<std::string>();
    item.input = j.at("input").get<std::string>();
    item.label = j.at("label").get<std::string>();
    item.explanation = j.at("explanation").get<std::string>();
    if (j.contains("highlight") && !j.at("highlight").is_null()) {
      const auto& h = j.at("highlight");
      item.highlight = Highlight{h.at("start").get<std::size_t>(), h.at("end").get<std::size_t>()};
      if (item.highlight->start >= item.highlight->end) {
        throw DataError("item " + item.id + ": empty highlight");
      }
    }
    item.is_attention_check = is_check;
    if (is_check) {
      item.expected = j.at("expected").get<bool>();
    } else if (j.contains("expected")) {
      throw DataError("item " + item.id + ": only attention checks carry an expected answer");
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad rating item: ") + ex.what());
  }
  if (item.id.empty()) throw DataError("rating item with empty id");
  return item;
}

ojson item_to_public_json(const RatingItem& item) {
  ojson j;
  j["id"] = item.id;
  j["input"] = item.input;
  j["label"] = item.label;
  j["explanation"] = item.explanation;
  if (item.highlight) {
    j["highlight"] = {{"start", item.highlight->start}, {"end", item.highlight->end}};
  }
  return j;
}

ojson item_to_json(const RatingItem& item) {
  ojson j = item_to_public_json(item);
  if (item.expected) j["expected"] = *item.expected;
  return j;
}

std::string to_string(BatchStatus s) {
  switch (s) {
    case BatchStatus::kOpen: return "open";
    case BatchStatus::kAccepted: return "accepted";
    case BatchStatus::kRejected: return "rejected";
  }
  return "open";
}

ojson Report::to_json() const {
  ojson j;
  j["items"] = ojson::array();
  for (const auto& v : items) {
    j["items"].push_back({{"id", v.id}, {"yes", v.yes}, {"no", v.no}, {"correct", v.correct}});
  }
  j["he"] = he;
  return j;
}

SessionSource parse_session_source(const json& j) {
  SessionSource src;
  try {
    for (const auto& x : j.at("items")) src.items.push_back(item_from_json(x, false));
    for (const auto& x : j.at("checks")) src.checks.push_back(item_from_json(x, true));
    src.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad session source: ") + ex.what());
  }
  return src;
}

// ---------------------------------------------------------------------------

Session::Session(std::vector<RatingItem> items, std::vector<RatingItem> checks, std::uint64_t seed)
    : items_(std::move(items)), checks_(std::move(checks)), seed_(seed), rng_(seed) {}

Session Session::create(std::vector<RatingItem> items, std::vector<RatingItem> checks,
                        std::uint64_t seed) {
  if (items.empty()) throw DataError("a rating session needs at least one item");
  if (items.size() < kRealPerBatch) {
    throw DataError("a rating session needs at least " + std::to_string(kRealPerBatch) +
                    " items to fill a batch");
  }
  const std::size_t needed = (items.size() + kRealPerBatch - 1) / kRealPerBatch;
  if (checks.size() < needed) {
    throw DataError("need at least " + std::to_string(needed) + " attention checks for " +
                    std::to_string(items.size()) + " items, got " +
                    std::to_string(checks.size()));
  }
  std::set<std::string> ids;
  for (auto& it : items) {
    if (it.is_attention_check || it.expected) {
      throw DataError("item " + it.id + " is marked as an attention check");
    }
    if (!ids.insert(it.id).second) throw DataError("duplicate item id " + it.id);
  }
  for (auto& c : checks) {
    if (!c.is_attention_check || !c.expected) {
      throw DataError("attention check " + c.id + " has no expected answer");
    }
    if (!ids.insert(c.id).second) throw DataError("duplicate item id " + c.id);
  }

  json created;
  created["type"] = "create";
  created["seed"] = seed;
  created["items"] = json::array();
  created["checks"] = json::array();
  for (const auto& it : items) created["items"].push_back(json::parse(item_to_json(it).dump()));
  for (const auto& c : checks) created["checks"].push_back(json::parse(item_to_json(c).dump()));

  Session s(std::move(items), std::move(checks), seed);
  s.state_.resize(s.items_.size());
  std::vector<std::size_t> order(s.items_.size());
  std::iota(order.begin(), order.end(), 0);
  s.rng_.shuffle(order);
  for (std::size_t rank = 0; rank < order.size(); ++rank) s.state_[order[rank]].order = rank;
  s.check_order_.resize(s.checks_.size());
  std::iota(s.check_order_.begin(), s.check_order_.end(), 0);
  s.rng_.shuffle(s.check_order_);
  for (std::size_t i = 0; i < s.items_.size(); ++i) s.item_index_[s.items_[i].id] = i;
  for (std::size_t i = 0; i < s.checks_.size(); ++i) s.check_index_[s.checks_[i].id] = i;
  s.events_.push_back(std::move(created));
  return s;
}

std::variant<Batch, Drained> Session::next_batch(const std::string& rater) {
  if (rater.empty()) throw RatingError(RatingError::Kind::kWrongRater, "empty rater id");
  static const std::set<std::string> kNone;
  auto seen_it = seen_.find(rater);
  const auto& seen = seen_it == seen_.end() ? kNone : seen_it->second;
  std::vector<std::size_t> eligible, spare;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (seen.count(items_[i].id)) continue;
    const auto& st = state_[i];
    if (st.verdicts.size() + st.in_flight < kVerdictsPerItem) {
      eligible.push_back(i);
    } else {
      spare.push_back(i);
    }
  }
  if (eligible.empty() || eligible.size() + spare.size() < kRealPerBatch) return Drained{};

  auto by_need = [&](std::size_t a, std::size_t b) {
    const auto& sa = state_[a];
    const auto& sb = state_[b];
    const std::size_t la = sa.verdicts.size() + sa.in_flight;
    const std::size_t lb = sb.verdicts.size() + sb.in_flight;
    return la != lb ? la < lb : sa.order < sb.order;
  };
  std::sort(eligible.begin(), eligible.end(), by_need);
  std::sort(spare.begin(), spare.end(),
            [&](std::size_t a, std::size_t b) { return state_[a].order < state_[b].order; });

  Batch batch;
  batch.id = "b" + std::to_string(++batch_counter_);
  batch.rater = rater;
  std::vector<std::string> slots;
  for (std::size_t k = 0; k < eligible.size() && slots.size() < kRealPerBatch; ++k) {
    const auto& id = items_[eligible[k]].id;
    slots.push_back(id);
    batch.counted.insert(id);
    ++state_[eligible[k]].in_flight;
  }
  for (std::size_t k = 0; k < spare.size() && slots.size() < kRealPerBatch; ++k) {
    slots.push_back(items_[spare[k]].id);
  }
  const RatingItem& check = checks_[check_order_[(batch_counter_ - 1) % checks_.size()]];
  slots.push_back(check.id);
  rng_.shuffle(slots);
  batch.items = slots;
  batch.check_position = static_cast<std::size_t>(
      std::find(slots.begin(), slots.end(), check.id) - slots.begin());
  for (const auto& id : slots) {
    if (id != check.id) seen_[rater].insert(id);
  }

  json ev;
  ev["type"] = "issue";
  ev["rater"] = rater;
  ev["batch"] = batch.id;
  ev["items"] = batch.items;
  events_.push_back(std::move(ev));
  batches_[batch.id] = batch;
  return batch;
}

SubmitResult Session::submit(const std::string& batch_id, const std::string& rater,
                             const std::vector<std::optional<bool>>& answers) {
  auto it = batches_.find(batch_id);
  if (it == batches_.end()) {
    throw RatingError(RatingError::Kind::kUnknownBatch, "unknown batch " + batch_id);
  }
  Batch& batch = it->second;
  if (batch.status != BatchStatus::kOpen) {
    throw RatingError(RatingError::Kind::kNotOpen,
                      "batch " + batch_id + " was already submitted");
  }
  if (batch.rater != rater) {
    throw RatingError(RatingError::Kind::kWrongRater,
                      "batch " + batch_id + " belongs to another rater");
  }
  if (answers.size() > kBatchSize) {
    throw RatingError(RatingError::Kind::kBadAnswers,
                      "expected " + std::to_string(kBatchSize) + " answers, got " +
                          std::to_string(answers.size()));
  }

  SubmitResult result;
  const bool all_answered =
      answers.size() == kBatchSize &&
      std::all_of(answers.begin(), answers.end(), [](const auto& a) { return a.has_value(); });
  const RatingItem& check = checks_.at(check_index_.at(batch.items[batch.check_position]));
  if (!all_answered) {
    result = {Outcome::kRejected, "not every question was answered"};
  } else if (*answers[batch.check_position] != *check.expected) {
    result = {Outcome::kRejected, "attention check failed"};
  }

  for (std::size_t k = 0; k < batch.items.size(); ++k) {
    const auto& id = batch.items[k];
    if (!batch.counted.count(id)) continue;
    auto& st = state_[item_index_.at(id)];
    --st.in_flight;
    if (result.outcome == Outcome::kAccepted) st.verdicts.push_back(*answers[k]);
  }
  batch.status =
      result.outcome == Outcome::kAccepted ? BatchStatus::kAccepted : BatchStatus::kRejected;

  json ev;
  ev["type"] = "submit";
  ev["batch"] = batch_id;
  ev["rater"] = rater;
  ev["answers"] = json::array();
  for (const auto& a : answers) ev["answers"].push_back(a ? json(*a) : json(nullptr));
  ev["outcome"] = result.outcome == Outcome::kAccepted ? "accepted" : "rejected";
  events_.push_back(std::move(ev));
  return result;
}

bool Session::complete() const { return non_final_items().empty(); }

std::vector<std::string> Session::non_final_items() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (state_[i].verdicts.size() != kVerdictsPerItem) out.push_back(items_[i].id);
  }
  return out;
}

std::size_t Session::accepted_verdicts(const std::string& item_id) const {
  auto it = item_index_.find(item_id);
  if (it == item_index_.end()) throw DataError("unknown item " + item_id);
  return state_[it->second].verdicts.size();
}

const Batch& Session::batch(const std::string& batch_id) const {
  auto it = batches_.find(batch_id);
  if (it == batches_.end()) {
    throw RatingError(RatingError::Kind::kUnknownBatch, "unknown batch " + batch_id);
  }
  return it->second;
}

const RatingItem& Session::item(const std::string& id) const {
  if (auto it = item_index_.find(id); it != item_index_.end()) return items_[it->second];
  if (auto it = check_index_.find(id); it != check_index_.end()) return checks_[it->second];
  throw DataError("unknown item " + id);
}

std::size_t Session::accepted_batches() const {
  return static_cast<std::size_t>(std::count_if(batches_.begin(), batches_.end(), [](const auto& b) {
    return b.second.status == BatchStatus::kAccepted;
  }));
}

Report Session::aggregate() const {
  auto pending = non_final_items();
  if (!pending.empty()) {
    std::string list;
    for (const auto& id : pending) list += (list.empty() ? "" : ",") + id;
    throw RatingError(RatingError::Kind::kNotFinal,
                      std::to_string(pending.size()) + " items are not final: " + list);
  }
  Report r;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    ItemVerdict v;
    v.id = items_[i].id;
    v.yes = static_cast<std::size_t>(
        std::count(state_[i].verdicts.begin(), state_[i].verdicts.end(), true));
    v.no = state_[i].verdicts.size() - v.yes;
    v.correct = v.yes > v.no;
    correct += v.correct;
    r.items.push_back(v);
  }
  r.he = 100.0 * static_cast<double>(correct) / static_cast<double>(items_.size());
  return r;
}

ojson Session::state_json() const {
  ojson j;
  j["seed"] = seed_;
  j["items"] = ojson::array();
  for (std::size_t i = 0; i < items_.size(); ++i) {
    j["items"].push_back({{"id", items_[i].id},
                          {"verdicts", state_[i].verdicts},
                          {"in_flight", state_[i].in_flight},
                          {"order", state_[i].order}});
  }
  j["check_order"] = check_order_;
  j["batches"] = ojson::array();
  for (const auto& [id, b] : batches_) {
    j["batches"].push_back({{"id", id},
                            {"rater", b.rater},
                            {"items", b.items},
                            {"check_position", b.check_position},
                            {"counted", b.counted},
                            {"status", to_string(b.status)}});
  }
  j["seen"] = ojson::object();
  for (const auto& [rater, ids] : seen_) j["seen"][rater] = ids;
  j["batch_counter"] = batch_counter_;
  std::ostringstream engine;
  engine << rng_.engine();
  j["rng"] = engine.str();
  return j;
}

std::string Session::digest() const {
  const std::string text = state_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Session Session::replay(const std::vector<json>& events) {
  auto bad = [](const std::string& what) {
    return RatingError(RatingError::Kind::kBadSession, "event log: " + what);
  };
  if (events.empty() || events.front().value("type", "") != "create") {
    throw bad("first event must be create");
  }
  const json& c = events.front();
  std::vector<RatingItem> items, checks;
  try {
    for (const auto& x : c.at("items")) items.push_back(item_from_json(x, false));
    for (const auto& x : c.at("checks")) checks.push_back(item_from_json(x, true));
  } catch (const DataError& ex) {
    throw bad(ex.what());
  }
  Session s = create(std::move(items), std::move(checks), c.at("seed").get<std::uint64_t>());
  for (std::size_t k = 1; k < events.size(); ++k) {
    const json& ev = events[k];
    const std::string type = ev.value("type", "");
    try {
      if (type == "issue") {
        auto got = s.next_batch(ev.at("rater").get<std::string>());
        const auto* b = std::get_if<Batch>(&got);
        if (!b || b->id != ev.at("batch").get<std::string>() ||
            b->items != ev.at("items").get<std::vector<std::string>>()) {
          throw bad("event " + std::to_string(k) + " does not reproduce");
        }
      } else if (type == "submit") {
        std::vector<std::optional<bool>> answers;
        for (const auto& a : ev.at("answers")) {
          answers.push_back(a.is_null() ? std::nullopt : std::optional<bool>(a.get<bool>()));
        }
        auto r = s.submit(ev.at("batch").get<std::string>(), ev.at("rater").get<std::string>(),
                          answers);
        const std::string outcome = r.outcome == Outcome::kAccepted ? "accepted" : "rejected";
        if (outcome != ev.at("outcome").get<std::string>()) {
          throw bad("event " + std::to_string(k) + " outcome differs");
        }
      } else {
        throw bad("unknown event type '" + type + "'");
      }
    } catch (const json::exception& ex) {
      throw bad(std::string("event ") + std::to_string(k) + ": " + ex.what());
    }
  }
  return s;
}

// ---------------------------------------------------------------------------

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  // Drop a torn tail left by a crash mid-append.
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!text.empty() && text.back() != '\n') {
      auto keep = text.rfind('\n');
      std::filesystem::resize_file(path_, keep == std::string::npos ? 0 : keep + 1);
    }
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw DataError("cannot open event log " + path_.string());
}

std::vector<json> EventLog::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open event log " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      // A torn final line from a crash mid-write is dropped; anything
      // earlier is corruption.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": corrupt event");
    }
  }
  return out;
}

void EventLog::append(const json& event) {
  out_ << event.dump() << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("failed appending to " + path_.string());
}

}  // namespace wt5::rating
