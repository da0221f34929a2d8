#include "openstreets/openenv.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "openstreets/error.hpp"

namespace openstreets {

using Json = nlohmann::ordered_json;

const char* to_string(InvalidReason r) noexcept {
  switch (r) {
    case InvalidReason::AlreadyOpen: return "already_open";
    case InvalidReason::NoCars: return "no_cars";
    case InvalidReason::NoAlternative: return "no_alternative";
  }
  return "unknown";
}

bool DayState::is_open(std::size_t segment) const {
  return std::find(open_list.begin(), open_list.end(), segment) != open_list.end();
}

Environment::Environment(const Corpus& corpus, const RiskModel& risk, EnvConfig cfg)
    : corpus_(&corpus), risk_(&risk), cfg_(cfg) {
  if (cfg.horizon < 1) throw Error(ErrorCode::BadValue, "horizon must be at least 1");
  if (cfg.k < 1) throw Error(ErrorCode::BadValue, "k must be at least 1");
  const auto days = scoreable_days();
  if (days.empty()) throw Error(ErrorCode::MissingDay, "corpus has no day with a full risk window");
  std::mt19937_64 rng(cfg.seed);
  norm_day_ = days[std::uniform_int_distribution<std::size_t>(0, days.size() - 1)(rng)];
  const RewardComponents base = evaluate(norm_day_, {}, corpus.base_volumes(norm_day_));
  risk_norm_ = base.risk_total > 0 ? base.risk_total : 1.0;
  density_norm_ = base.density_total > 0 ? base.density_total : 1.0;
}

std::vector<std::size_t> Environment::scoreable_days() const {
  std::vector<std::size_t> out;
  const auto w = static_cast<std::size_t>(risk_->window());
  for (std::size_t d = 0; d < corpus_->day_count(); ++d) {
    if (d + 1 >= w && corpus_->consecutive(d + 1 - w, w)) out.push_back(d);
  }
  return out;
}

std::vector<std::size_t> Environment::start_days() const {
  std::vector<std::size_t> out;
  const auto w = static_cast<std::size_t>(risk_->window());
  const auto h = static_cast<std::size_t>(cfg_.horizon);
  for (std::size_t d = 0; d < corpus_->day_count(); ++d) {
    if (d + 1 >= w && corpus_->consecutive(d + 1 - w, w + h)) out.push_back(d);
  }
  return out;
}

DayState Environment::reset(Date start) const { return reset_day(corpus_->day_index(start)); }

DayState Environment::reset_day(std::size_t day) const {
  const auto w = static_cast<std::size_t>(risk_->window());
  const auto h = static_cast<std::size_t>(cfg_.horizon);
  if (day >= corpus_->day_count() || day + 1 < w || !corpus_->consecutive(day + 1 - w, w + h)) {
    const std::string when = day < corpus_->day_count() ? corpus_->days()[day].iso() : std::to_string(day);
    throw Error(ErrorCode::MissingDay, "episode from " + when + " needs " + std::to_string(w - 1) +
                                           " prior days and " + std::to_string(h) + " following days");
  }
  return make_state(day, {});
}

DayState Environment::make_state(std::size_t day, std::vector<std::size_t> open_list) const {
  DayState s;
  s.day = day;
  s.date = corpus_->days()[day];
  s.volumes = apply_open_list(day, open_list);
  s.segment_volumes = segment_volumes(network().primal(), s.volumes);
  s.open_list = std::move(open_list);
  s.components = evaluate(day, s.open_list, s.volumes);
  return s;
}

std::shared_ptr<const ReroutePlan> Environment::plan_for(const std::vector<std::size_t>& prefix) const {
  if (auto it = plans_.find(prefix); it != plans_.end()) return it->second;
  std::vector<char> closed(network().segment_count(), 0);
  for (std::size_t s : prefix) closed[s] = 1;
  std::shared_ptr<const ReroutePlan> plan;
  try {
    plan = std::make_shared<const ReroutePlan>(
        plan_reroute(network().primal(), prefix.back(), closed, cfg_.k, cfg_.share_rule));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoAlternativePath) throw;
  }
  if (plans_.size() > 500000) plans_.clear();
  plans_.emplace(prefix, plan);
  return plan;
}

ArcVolumes Environment::apply_open_list(std::size_t day, const std::vector<std::size_t>& open_list) const {
  ArcVolumes v = corpus_->base_volumes(day);
  std::vector<std::size_t> prefix;
  for (std::size_t s : open_list) {
    prefix.push_back(s);
    auto plan = plan_for(prefix);
    if (!plan) {
      throw Error(ErrorCode::NoAlternativePath,
                  "segment " + std::to_string(network().segment(s).segment_id) + " cannot be rerouted");
    }
    apply_reroute(*plan, v);
  }
  return v;
}

double Environment::density(const std::vector<double>& segment_volumes) const {
  double total = 0.0;
  for (std::size_t i = 0; i < segment_volumes.size(); ++i) {
    const SegmentRecord& s = network().segment(i);
    total += segment_volumes[i] / (s.lanes * s.length_m);
  }
  return total;
}

RewardComponents Environment::evaluate(std::size_t day, const std::vector<std::size_t>& open_list,
                                       const ArcVolumes& today) const {
  const RoadNetwork& net = network();
  const auto w = static_cast<std::size_t>(risk_->window());
  std::vector<MatrixD> raw;
  raw.reserve(w);
  for (std::size_t j = day + 1 - w; j <= day; ++j) {
    const ArcVolumes vols = j == day ? today : apply_open_list(j, open_list);
    raw.push_back(day_features(net, segment_volumes(net.primal(), vols), corpus_->weather(j), corpus_->days()[j]));
  }
  std::vector<char> opened(net.segment_count(), 0);
  for (std::size_t s : open_list) opened[s] = 1;
  const DualGraph graph = open_list.empty() ? net.dual() : net.dual().without(opened);
  const std::vector<double> p = risk_->predict(raw, graph);

  RewardComponents c;
  const std::vector<double> seg = segment_volumes(net.primal(), today);
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    if (opened[i]) continue;
    c.risk_total += p[i];
  }
  c.density_total = density(seg);
  c.risk_norm = risk_norm_;
  c.density_norm = density_norm_;
  return c;
}

double Environment::cost(const RewardComponents& c) const {
  return cfg_.risk_weight * c.risk_total / risk_norm_ + cfg_.density_weight * c.density_total / density_norm_;
}

std::optional<InvalidReason> Environment::check_action(const DayState& state, std::size_t segment) const {
  if (segment >= network().segment_count()) {
    throw Error(ErrorCode::UnknownSegmentId, "segment index " + std::to_string(segment));
  }
  if (state.is_open(segment)) return InvalidReason::AlreadyOpen;
  if (!(state.segment_volumes[segment] > 0.0)) return InvalidReason::NoCars;
  std::vector<std::size_t> prefix = state.open_list;
  prefix.push_back(segment);
  if (!plan_for(prefix)) return InvalidReason::NoAlternative;
  return std::nullopt;
}

std::vector<std::size_t> Environment::valid_actions(const DayState& state) const {
  const PrimalGraph& g = network().primal();
  std::vector<char> closed(network().segment_count(), 0);
  for (std::size_t s : state.open_list) closed[s] = 1;
  Restriction r = Restriction::blocking_segment_mask(g, closed);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < network().segment_count(); ++s) {
    if (closed[s] || !(state.segment_volumes[s] > 0.0)) continue;
    for (std::size_t a : g.segment_arcs(s)) r.arc_blocked[a] = 1;
    bool ok = true;
    for (std::size_t a : g.segment_arcs(s)) ok = ok && reachable(g, g.arc(a).from, g.arc(a).to, &r);
    for (std::size_t a : g.segment_arcs(s)) r.arc_blocked[a] = 0;
    if (ok) out.push_back(s);
  }
  return out;
}

StepOutcome Environment::transition(const DayState& state, std::size_t segment, std::size_t target_day) const {
  StepOutcome out;
  if (auto reason = check_action(state, segment)) {
    out.next = state;
    out.next.done = true;
    out.done = true;
    out.info.invalid = reason;
    return out;
  }
  std::vector<std::size_t> list = state.open_list;
  list.push_back(segment);
  out.next = make_state(target_day, std::move(list));
  out.next.steps = state.steps + 1;
  out.next.done = target_day != state.day && out.next.steps >= cfg_.horizon;
  out.done = out.next.done;
  out.reward = compute_reward(state, out.next);
  out.info.risk_delta = (out.next.components.risk_total - state.components.risk_total) / risk_norm_;
  out.info.density_delta = (out.next.components.density_total - state.components.density_total) / density_norm_;
  return out;
}

StepOutcome Environment::step(const DayState& state, std::size_t segment) const {
  if (state.day + 1 >= corpus_->day_count() || !corpus_->consecutive(state.day, 2)) {
    throw Error(ErrorCode::MissingDay, "no day after " + state.date.iso());
  }
  return transition(state, segment, state.day + 1);
}

StepOutcome Environment::step_same_day(const DayState& state, std::size_t segment) const {
  return transition(state, segment, state.day);
}

MatrixD Environment::state_features(const DayState& s) const {
  return day_features(network(), s.segment_volumes, corpus_->weather(s.day), s.date);
}

// What-if ---------------------------------------------------------------------

std::string WhatIfResult::to_json() const {
  Json j;
  j["date"] = date.iso();
  j["risk_delta"] = risk_delta;
  j["density_delta"] = density_delta;
  j["reward"] = reward;
  j["applied"] = applied;
  Json changes = Json::array();
  for (const auto& [id, dv] : volume_changes) changes.push_back({{"segment_id", id}, {"delta", dv}});
  j["per_segment_volume_changes"] = changes;
  Json inv = Json::array();
  for (const auto& i : invalid) inv.push_back({{"id", i.segment_id}, {"reason", to_string(i.reason)}});
  j["invalid"] = inv;
  return j.dump();
}

WhatIfResult whatif(const Environment& env, Date date, const std::vector<SegmentId>& opens) {
  const RoadNetwork& net = env.network();
  const std::size_t day = env.corpus().day_index(date);
  const auto days = env.scoreable_days();
  if (!std::binary_search(days.begin(), days.end(), day)) {
    throw Error(ErrorCode::MissingDay, date.iso() + " lacks the prior days the risk model needs");
  }
  std::vector<std::size_t> idx;
  for (SegmentId id : opens) idx.push_back(net.segment_index(id));

  WhatIfResult r;
  r.date = date;
  const DayState before = env.make_state(day, {});
  DayState cur = before;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    StepOutcome o = env.step_same_day(cur, idx[k]);
    if (o.info.invalid) {
      r.invalid.push_back({opens[k], *o.info.invalid});
      continue;
    }
    r.applied.push_back(opens[k]);
    cur = std::move(o.next);
  }
  r.risk_delta = (cur.components.risk_total - before.components.risk_total) / env.risk_norm();
  r.density_delta = (cur.components.density_total - before.components.density_total) / env.density_norm();
  r.reward = env.compute_reward(before, cur);
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    const double dv = cur.segment_volumes[i] - before.segment_volumes[i];
    if (std::abs(dv) > 1e-9) r.volume_changes[net.segment(i).segment_id] = dv;
  }
  return r;
}

std::string trace_line(const DayState& state, std::optional<SegmentId> action, const StepOutcome& outcome) {
  Json j;
  j["date"] = state.date.iso();
  j["action"] = action ? Json(*action) : Json(nullptr);
  j["reward"] = outcome.reward;
  j["risk"] = outcome.next.components.risk_total;
  j["density"] = outcome.next.components.density_total;
  j["invalid"] = outcome.info.invalid ? Json(to_string(*outcome.info.invalid)) : Json(nullptr);
  return j.dump();
}

}  // namespace openstreets
