#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "openstreets/openenv.hpp"
#include "openstreets/qagent.hpp"

namespace openstreets {

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

struct ServiceConfig {
  std::chrono::seconds session_ttl{1800};
};

/// What-if service over one corpus. Handlers are plain functions of the request so they
/// can be exercised without sockets; listen() binds them to HTTP routes.
///
///   GET  /network           GeoJSON, Q overlay when a Q-network is loaded
///   GET  /state/{date}      volumes, risk, density and the session's open list
///   POST /whatif            {date, open:[ids]}
///   POST /plan/step         {session?, date, segment_id, action: "open"|"close"}
///   GET  /qvalues           [{segment_id, q_value, rank}]
///
/// Errors: 400 for malformed bodies, unknown segments or dates; 409 for an invalid
/// open (body carries the environment's reason); 404 for /qvalues without a Q-network.
class Service {
 public:
  Service(const Environment& env, const QNetwork* qnet, ServiceConfig cfg = {});

  HttpResponse network(const std::optional<std::string>& date) const;
  HttpResponse state(const std::string& date, const std::optional<std::string>& session) const;
  HttpResponse whatif(const std::string& body) const;
  HttpResponse plan_step(const std::string& body);
  HttpResponse qvalues(const std::optional<std::string>& date) const;

  /// Blocks serving HTTP until stop() is called. Returns false when the port cannot be bound.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it (-1 on failure); serve with listen_after_bind().
  int bind_any(const std::string& host);
  bool listen_after_bind();
  void stop();

 private:
  struct Session {
    Date date;
    std::vector<SegmentId> open;
    std::chrono::steady_clock::time_point last_used;
  };

  std::size_t scoreable_day(const std::string& date) const;
  DayState plan_state(std::size_t day, const std::vector<SegmentId>& open) const;
  std::string plan_json(const std::string& id, const Session& s) const;
  void expire_sessions();
  std::shared_ptr<void> make_server();

  const Environment* env_;
  const QNetwork* qnet_;
  ServiceConfig cfg_;
  std::vector<std::size_t> scoreable_;
  mutable std::mutex env_mutex_;  // the environment caches reroute plans
  mutable std::mutex sessions_mutex_;
  std::map<std::string, Session> sessions_;
  unsigned long long next_session_ = 1;
  std::shared_ptr<void> server_;  // httplib::Server, kept opaque here
};

}  // namespace openstreets
