#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "wt5/rating.h"

namespace httplib {
class Server;
}

namespace wt5::rating {

// HTTP front of the rating engine.
//
//   POST /sessions                    body: items file JSON -> {"session": id}
//   GET  /sessions/{id}/batch?rater=R -> batch JSON, or {"drained": true}
//   POST /sessions/{id}/batch/{bid}   body: {"rater", "answers": [10]}
//                                     -> {"status": "accepted"|"rejected"}
//   GET  /sessions/{id}/report        -> report JSON, 409 with the non-final
//                                        ids while incomplete
//   GET  /                            -> static assets, when configured
//
// Sessions persist as <data_dir>/<id>.events.jsonl and are replayed on
// construction. All mutations go through one writer lock.
class RatingService {
 public:
  struct Options {
    std::filesystem::path data_dir;
    std::optional<std::filesystem::path> static_dir;
  };

  explicit RatingService(Options options);
  ~RatingService();

  RatingService(const RatingService&) = delete;
  RatingService& operator=(const RatingService&) = delete;

  std::string create_session(const SessionSource& source);
  std::vector<std::string> session_ids() const;
  std::string digest(const std::string& session_id) const;

  // Blocks serving requests until stop() is called from another thread.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Entry {
    Session session;
    std::unique_ptr<EventLog> log;
  };
  void install_routes();
  Entry& entry(const std::string& id);
  const Entry& entry(const std::string& id) const;
  void persist_new_events(Entry& e, std::size_t before);

  Options options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry> sessions_;
  std::size_t next_id_ = 1;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace wt5::rating
