#include "wt5/rating_service.h"

#include <mutex>

#include "httplib.h"

namespace wt5::rating {

using json = nlohmann::json;

namespace {

constexpr const char* kLogSuffix = ".events.jsonl";

constexpr const char* kFallbackPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>rating service</title>"
    "</head><body><p>Rating service is running. No UI assets are configured; "
    "start the server with --static-dir to serve the rating frontend.</p></body></html>";

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

int status_for(const RatingError& e) {
  switch (e.kind()) {
    case RatingError::Kind::kUnknownBatch: return 404;
    case RatingError::Kind::kNotOpen: return 409;
    case RatingError::Kind::kWrongRater: return 403;
    case RatingError::Kind::kBadAnswers: return 400;
    case RatingError::Kind::kNotFinal: return 409;
    case RatingError::Kind::kBadSession: return 500;
  }
  return 400;
}

}  // namespace

RatingService::RatingService(Options options) : options_(std::move(options)) {
  std::filesystem::create_directories(options_.data_dir);
  std::vector<std::filesystem::path> logs;
  for (const auto& f : std::filesystem::directory_iterator(options_.data_dir)) {
    const std::string name = f.path().filename().string();
    if (name.size() > std::string(kLogSuffix).size() && name.ends_with(kLogSuffix)) {
      logs.push_back(f.path());
    }
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    std::string name = path.filename().string();
    std::string id = name.substr(0, name.size() - std::string(kLogSuffix).size());
    auto events = EventLog::read(path);
    Entry e{Session::replay(events), nullptr};
    e.log = std::make_unique<EventLog>(path);
    sessions_.emplace(id, std::move(e));
    if (id.starts_with("s")) {
      try {
        next_id_ = std::max(next_id_, std::stoul(id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
  server_ = std::make_unique<httplib::Server>();
  install_routes();
}

RatingService::~RatingService() { stop(); }

std::string RatingService::create_session(const SessionSource& source) {
  std::unique_lock lock(mutex_);
  Session s = Session::create(source.items, source.checks, source.seed);
  std::string id = "s" + std::to_string(next_id_++);
  auto log = std::make_unique<EventLog>(options_.data_dir / (id + kLogSuffix));
  for (const auto& ev : s.events()) log->append(ev);
  sessions_.emplace(id, Entry{std::move(s), std::move(log)});
  return id;
}

std::vector<std::string> RatingService::session_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

std::string RatingService::digest(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  return entry(session_id).session.digest();
}

RatingService::Entry& RatingService::entry(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw RatingError(RatingError::Kind::kUnknownBatch, "unknown session " + id);
  return it->second;
}

const RatingService::Entry& RatingService::entry(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw RatingError(RatingError::Kind::kUnknownBatch, "unknown session " + id);
  return it->second;
}

void RatingService::persist_new_events(Entry& e, std::size_t before) {
  const auto& events = e.session.events();
  for (std::size_t k = before; k < events.size(); ++k) e.log->append(events[k]);
}

void RatingService::install_routes() {
  auto& srv = *server_;

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      json body = json::parse(req.body);
      std::string id = create_session(parse_session_source(body));
      send_json(res, 201, {{"session", id}});
    } catch (const json::exception& ex) {
      send_error(res, 400, std::string("malformed JSON: ") + ex.what());
    } catch (const DataError& ex) {
      send_error(res, 400, ex.what());
    }
  });

  srv.Get(R"(/sessions/([^/]+)/batch)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string rater = req.get_param_value("rater");
    if (rater.empty()) return send_error(res, 400, "missing rater parameter");
    try {
      std::unique_lock lock(mutex_);
      Entry& e = entry(req.matches[1]);
      const std::size_t before = e.session.events().size();
      auto got = e.session.next_batch(rater);
      persist_new_events(e, before);
      if (std::holds_alternative<Drained>(got)) {
        return send_json(res, 200, {{"drained", true}});
      }
      const Batch& b = std::get<Batch>(got);
      nlohmann::ordered_json out;
      out["batch"] = b.id;
      out["rater"] = b.rater;
      out["items"] = nlohmann::ordered_json::array();
      for (const auto& id : b.items) out["items"].push_back(item_to_public_json(e.session.item(id)));
      send_json(res, 200, out);
    } catch (const RatingError& ex) {
      send_error(res, status_for(ex), ex.what());
    }
  });

  srv.Post(R"(/sessions/([^/]+)/batch/([^/]+))",
           [this](const httplib::Request& req, httplib::Response& res) {
             try {
               json body = json::parse(req.body);
               const std::string rater = body.at("rater").get<std::string>();
               std::vector<std::optional<bool>> answers;
               for (const auto& a : body.at("answers")) {
                 answers.push_back(a.is_null() ? std::nullopt : std::optional<bool>(a.get<bool>()));
               }
               std::unique_lock lock(mutex_);
               Entry& e = entry(req.matches[1]);
               const std::size_t before = e.session.events().size();
               SubmitResult r = e.session.submit(req.matches[2], rater, answers);
               persist_new_events(e, before);
               nlohmann::ordered_json out;
               out["status"] = r.outcome == Outcome::kAccepted ? "accepted" : "rejected";
               if (!r.reason.empty()) out["reason"] = r.reason;
               send_json(res, 200, out);
             } catch (const json::exception& ex) {
               send_error(res, 400, std::string("malformed submission: ") + ex.what());
             } catch (const RatingError& ex) {
               send_error(res, status_for(ex), ex.what());
             }
           });

  srv.Get(R"(/sessions/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      std::shared_lock lock(mutex_);
      const Entry& e = entry(req.matches[1]);
      auto pending = e.session.non_final_items();
      if (!pending.empty()) {
        return send_json(res, 409, {{"error", "session incomplete"}, {"non_final", pending}});
      }
      send_json(res, 200, e.session.aggregate().to_json());
    } catch (const RatingError& ex) {
      send_error(res, status_for(ex), ex.what());
    }
  });

  if (options_.static_dir) {
    srv.set_mount_point("/", options_.static_dir->string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackPage, "text/html");
    });
  }
}

bool RatingService::listen(const std::string& host, int port) { return server_->listen(host, port); }

int RatingService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool RatingService::listen_after_bind() { return server_->listen_after_bind(); }

void RatingService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void RatingService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace wt5::rating
