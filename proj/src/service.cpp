#include "openstreets/service.hpp"

#include <algorithm>

#include "httplib.h"
#include "json.hpp"
#include "openstreets/error.hpp"

namespace openstreets {

using Json = nlohmann::ordered_json;

namespace {

HttpResponse error_response(int status, const std::string& message, Json extra = Json::object()) {
  extra["error"] = message;
  return {status, extra.dump()};
}

// Runs a handler, mapping validation failures onto HTTP statuses.
template <class F>
HttpResponse guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::UnknownSegmentId:
      case ErrorCode::MissingDay:
      case ErrorCode::BadValue:
        return error_response(400, e.what());
      default:
        return error_response(500, e.what());
    }
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, std::string("malformed request: ") + e.what());
  }
}

Json parse_body(const std::string& body) {
  Json j = Json::parse(body);
  if (!j.is_object()) throw Error(ErrorCode::BadValue, "request body must be a JSON object");
  return j;
}

}  // namespace

Service::Service(const Environment& env, const QNetwork* qnet, ServiceConfig cfg)
    : env_(&env), qnet_(qnet), cfg_(cfg), scoreable_(env.scoreable_days()) {}

std::size_t Service::scoreable_day(const std::string& date) const {
  const std::size_t day = env_->corpus().day_index(Date::parse(date));
  if (!std::binary_search(scoreable_.begin(), scoreable_.end(), day)) {
    throw Error(ErrorCode::MissingDay, date + " lacks the prior days the risk model needs");
  }
  return day;
}

DayState Service::plan_state(std::size_t day, const std::vector<SegmentId>& open) const {
  DayState s = env_->make_state(day, {});
  for (SegmentId id : open) {
    StepOutcome o = env_->step_same_day(s, env_->network().segment_index(id));
    if (!o.info.invalid) s = std::move(o.next);
  }
  return s;
}

HttpResponse Service::network(const std::optional<std::string>& date) const {
  return guarded([&] {
    SegmentOverlay overlay;
    if (qnet_) {
      std::lock_guard lock(env_mutex_);
      const std::size_t day = date ? scoreable_day(*date) : scoreable_.front();
      const auto q = segment_q_values(*qnet_, *env_, env_->make_state(day, {}));
      for (std::size_t i = 0; i < q.size(); ++i) overlay[env_->network().segment(i).segment_id] = q[i];
    }
    return HttpResponse{200, export_geojson(env_->network(), overlay)};
  });
}

HttpResponse Service::state(const std::string& date, const std::optional<std::string>& session) const {
  return guarded([&] {
    std::vector<SegmentId> open;
    const Date d = Date::parse(date);
    if (session) {
      std::lock_guard lock(sessions_mutex_);
      if (auto it = sessions_.find(*session); it != sessions_.end() && it->second.date == d) open = it->second.open;
    }
    std::lock_guard lock(env_mutex_);
    const DayState s = plan_state(scoreable_day(date), open);
    Json vols = Json::array();
    for (std::size_t i = 0; i < s.segment_volumes.size(); ++i) {
      vols.push_back({{"segment_id", env_->network().segment(i).segment_id}, {"volume", s.segment_volumes[i]}});
    }
    Json j{{"date", s.date.iso()},
           {"open", open},
           {"risk", s.components.risk_total},
           {"density", s.components.density_total},
           {"cost", env_->cost(s)},
           {"volumes", vols}};
    return HttpResponse{200, j.dump()};
  });
}

HttpResponse Service::whatif(const std::string& body) const {
  return guarded([&] {
    const Json j = parse_body(body);
    const std::string date = j.at("date").get<std::string>();
    const auto open = j.value("open", std::vector<SegmentId>{});
    std::lock_guard lock(env_mutex_);
    scoreable_day(date);
    return HttpResponse{200, openstreets::whatif(*env_, Date::parse(date), open).to_json()};
  });
}

std::string Service::plan_json(const std::string& id, const Session& s) const {
  const WhatIfResult r = openstreets::whatif(*env_, s.date, s.open);
  Json j = Json::parse(r.to_json());
  j["session"] = id;
  j["open"] = s.open;
  Json steps = Json::array();
  const std::size_t day = env_->corpus().day_index(s.date);
  DayState cur = env_->make_state(day, {});
  double total = 0.0;
  for (SegmentId sid : s.open) {
    StepOutcome o = env_->step_same_day(cur, env_->network().segment_index(sid));
    if (o.info.invalid) continue;
    steps.push_back({{"segment_id", sid}, {"reward", o.reward}});
    total += o.reward;
    cur = std::move(o.next);
  }
  j["steps"] = steps;
  j["total"] = total;
  return j.dump();
}

void Service::expire_sessions() {
  const auto now = std::chrono::steady_clock::now();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    it = now - it->second.last_used > cfg_.session_ttl ? sessions_.erase(it) : std::next(it);
  }
}

HttpResponse Service::plan_step(const std::string& body) {
  return guarded([&] {
    const Json j = parse_body(body);
    const std::string date = j.at("date").get<std::string>();
    const SegmentId segment = j.at("segment_id").get<SegmentId>();
    const std::string action = j.value("action", std::string("open"));
    if (action != "open" && action != "close") throw Error(ErrorCode::BadValue, "action must be open or close");

    std::lock_guard slock(sessions_mutex_);
    expire_sessions();
    std::lock_guard elock(env_mutex_);
    scoreable_day(date);
    env_->network().segment_index(segment);
    const Date d = Date::parse(date);

    std::string id = j.value("session", std::string());
    if (id.empty() || !sessions_.count(id)) id = "s" + std::to_string(next_session_++);
    Session& s = sessions_[id];
    s.last_used = std::chrono::steady_clock::now();
    if (s.date != d) {
      s.date = d;
      s.open.clear();
    }

    if (action == "open") {
      if (std::find(s.open.begin(), s.open.end(), segment) != s.open.end()) {
        return error_response(409, "invalid open", {{"reason", to_string(InvalidReason::AlreadyOpen)},
                                                    {"segment_id", segment},
                                                    {"session", id}});
      }
      std::vector<SegmentId> trial = s.open;
      trial.push_back(segment);
      const WhatIfResult r = openstreets::whatif(*env_, d, trial);
      if (!r.invalid.empty()) {
        return error_response(409, "invalid open", {{"reason", to_string(r.invalid.front().reason)},
                                                    {"segment_id", segment},
                                                    {"session", id}});
      }
      s.open = std::move(trial);
    } else {
      auto it = std::find(s.open.begin(), s.open.end(), segment);
      if (it == s.open.end()) throw Error(ErrorCode::BadValue, "segment " + std::to_string(segment) + " is not open");
      s.open.erase(it);
    }
    return HttpResponse{200, plan_json(id, s)};
  });
}

HttpResponse Service::qvalues(const std::optional<std::string>& date) const {
  if (!qnet_) return error_response(404, "no Q-network loaded");
  return guarded([&] {
    std::lock_guard lock(env_mutex_);
    const std::size_t day = date ? scoreable_day(*date) : scoreable_.front();
    const auto q = segment_q_values(*qnet_, *env_, env_->make_state(day, {}));
    return HttpResponse{200, rankings_json(rank_segments(env_->network(), q, q.size()))};
  });
}

// HTTP ------------------------------------------------------------------------

namespace {

void reply(httplib::Response& res, const HttpResponse& r, const char* type = "application/json") {
  res.status = r.status;
  res.set_content(r.body, r.status == 200 ? type : "application/json");
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (req.has_param(name)) return req.get_param_value(name);
  return std::nullopt;
}

}  // namespace

std::shared_ptr<void> Service::make_server() {
  auto svr = std::make_shared<httplib::Server>();
  svr->Get("/network", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, network(param(req, "date")), "application/geo+json");
  });
  svr->Get(R"(/state/([0-9-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto session = param(req, "session");
    if (!session && req.has_header("X-Session")) session = req.get_header_value("X-Session");
    reply(res, state(req.matches[1], session));
  });
  svr->Post("/whatif", [this](const httplib::Request& req, httplib::Response& res) { reply(res, whatif(req.body)); });
  svr->Post("/plan/step",
            [this](const httplib::Request& req, httplib::Response& res) { reply(res, plan_step(req.body)); });
  svr->Get("/qvalues", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, qvalues(param(req, "date")));
  });
  return svr;
}

bool Service::listen(const std::string& host, int port) {
  server_ = make_server();
  return std::static_pointer_cast<httplib::Server>(server_)->listen(host, port);
}

int Service::bind_any(const std::string& host) {
  server_ = make_server();
  return std::static_pointer_cast<httplib::Server>(server_)->bind_to_any_port(host);
}

bool Service::listen_after_bind() {
  if (!server_) return false;
  return std::static_pointer_cast<httplib::Server>(server_)->listen_after_bind();
}

void Service::stop() {
  if (server_) std::static_pointer_cast<httplib::Server>(server_)->stop();
}

}  // namespace openstreets
