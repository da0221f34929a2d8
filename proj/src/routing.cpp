#include "openstreets/routing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <thread>

#include "openstreets/error.hpp"

namespace openstreets {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative slack under which two path costs count as tied.
double tie_slack(double cost) { return 1e-12 * std::max(1.0, std::abs(cost)); }

double sequential_cost(const PrimalGraph& g, const std::vector<std::size_t>& arcs) {
  double cost = 0.0;
  for (std::size_t a : arcs) cost += g.arc(a).travel_time_s;
  return cost;
}

}  // namespace

std::vector<std::size_t> path_segments(const PrimalGraph& g, const Path& path) {
  std::vector<std::size_t> out;
  out.reserve(path.arcs.size());
  for (std::size_t a : path.arcs) out.push_back(g.arc(a).segment);
  return out;
}

std::vector<SegmentId> path_segment_ids(const RoadNetwork& net, const Path& path) {
  std::vector<SegmentId> out;
  for (std::size_t s : path_segments(net.primal(), path)) out.push_back(net.segment(s).segment_id);
  return out;
}

Restriction Restriction::blocking_segments(const PrimalGraph& g, std::span<const std::size_t> segments) {
  Restriction r;
  r.arc_blocked.assign(g.arc_count(), 0);
  for (std::size_t s : segments) {
    for (std::size_t a : g.segment_arcs(s)) r.arc_blocked[a] = 1;
  }
  return r;
}

Restriction Restriction::blocking_segment_mask(const PrimalGraph& g, std::span<const char> closed) {
  Restriction r;
  r.arc_blocked.assign(g.arc_count(), 0);
  for (std::size_t a = 0; a < g.arc_count(); ++a) r.arc_blocked[a] = closed[g.arc(a).segment];
  return r;
}

// Shortest paths ----------------------------------------------------------------

ShortestPathTree::ShortestPathTree(const PrimalGraph& g, std::size_t source, const Restriction* restriction,
                                   std::optional<std::size_t> stop_at)
    : graph_(&g), source_(source), dist_(g.vertex_count(), kInf), pred_(g.vertex_count(), kNone) {
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<char> settled(g.vertex_count(), 0);
  std::vector<std::size_t> candidate, incumbent;
  dist_[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (settled[u] || d != dist_[u]) continue;
    settled[u] = 1;
    if (stop_at && *stop_at == u) break;
    for (std::size_t a : g.out_arcs(u)) {
      if (restriction && !restriction->arc_open(a)) continue;
      const Arc& arc = g.arc(a);
      const std::size_t v = arc.to;
      if (settled[v] || v == source || (restriction && !restriction->vertex_open(v))) continue;
      const double nd = d + arc.travel_time_s;
      if (dist_[v] == kInf || nd < dist_[v] - tie_slack(dist_[v])) {
        dist_[v] = nd;
        pred_[v] = a;
        heap.emplace(nd, v);
      } else if (nd <= dist_[v] + tie_slack(dist_[v])) {
        candidate.clear();
        trace_segments(u, candidate);
        candidate.push_back(arc.segment);
        incumbent.clear();
        trace_segments(v, incumbent);
        if (std::lexicographical_compare(candidate.begin(), candidate.end(), incumbent.begin(), incumbent.end())) {
          dist_[v] = nd;
          pred_[v] = a;
          heap.emplace(nd, v);
        }
      }
    }
  }
}

void ShortestPathTree::trace_segments(std::size_t v, std::vector<std::size_t>& out) const {
  const std::size_t start = out.size();
  while (v != source_) {
    const Arc& arc = graph_->arc(pred_[v]);
    out.push_back(arc.segment);
    v = arc.from;
  }
  std::reverse(out.begin() + static_cast<std::ptrdiff_t>(start), out.end());
}

std::optional<Path> ShortestPathTree::path_to(std::size_t v) const {
  if (!reached(v)) return std::nullopt;
  Path path;
  for (std::size_t x = v; x != source_; x = graph_->arc(pred_[x]).from) path.arcs.push_back(pred_[x]);
  std::reverse(path.arcs.begin(), path.arcs.end());
  path.cost_s = dist_[v];
  return path;
}

std::vector<TargetRoute> dijkstra(const PrimalGraph& g, std::size_t source, std::span<const std::size_t> targets,
                                  const Restriction* restriction) {
  std::optional<std::size_t> stop;
  if (targets.size() == 1) stop = targets.front();
  const ShortestPathTree tree(g, source, restriction, stop);
  std::vector<TargetRoute> out;
  out.reserve(targets.size());
  for (std::size_t t : targets) out.push_back({t, tree.path_to(t)});
  return out;
}

bool reachable(const PrimalGraph& g, std::size_t s, std::size_t t, const Restriction* restriction) {
  if (s == t) return true;
  std::vector<char> seen(g.vertex_count(), 0);
  std::vector<std::size_t> stack{s};
  seen[s] = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t a : g.out_arcs(u)) {
      if (restriction && !restriction->arc_open(a)) continue;
      const std::size_t v = g.arc(a).to;
      if (seen[v] || (restriction && !restriction->vertex_open(v))) continue;
      if (v == t) return true;
      seen[v] = 1;
      stack.push_back(v);
    }
  }
  return false;
}

std::vector<Path> yen_ksp(const PrimalGraph& g, std::size_t s, std::size_t t, std::size_t k,
                          const Restriction* restriction) {
  if (k == 0) throw Error(ErrorCode::BadValue, "k must be >= 1");
  Restriction work;
  work.arc_blocked = restriction && !restriction->arc_blocked.empty() ? restriction->arc_blocked
                                                                       : std::vector<char>(g.arc_count(), 0);
  work.vertex_blocked = restriction && !restriction->vertex_blocked.empty()
                            ? restriction->vertex_blocked
                            : std::vector<char>(g.vertex_count(), 0);

  auto first = ShortestPathTree(g, s, &work, t).path_to(t);
  if (!first || s == t) throw Error(ErrorCode::NoPath, "no path between the requested vertices");

  using Key = std::pair<double, std::vector<std::size_t>>;
  std::vector<Path> accepted{*first};
  std::map<Key, Path> candidates;
  std::set<std::vector<std::size_t>> seen{path_segments(g, *first)};
  std::vector<std::size_t> flipped_arcs, flipped_vertices;

  while (accepted.size() < k) {
    const Path prev = accepted.back();
    std::vector<std::size_t> vertices{s};
    for (std::size_t a : prev.arcs) vertices.push_back(g.arc(a).to);

    for (std::size_t i = 0; i < prev.arcs.size(); ++i) {
      const std::size_t spur = vertices[i];
      for (const Path& p : accepted) {
        if (p.arcs.size() > i && std::equal(prev.arcs.begin(), prev.arcs.begin() + static_cast<std::ptrdiff_t>(i),
                                            p.arcs.begin())) {
          if (!work.arc_blocked[p.arcs[i]]) {
            work.arc_blocked[p.arcs[i]] = 1;
            flipped_arcs.push_back(p.arcs[i]);
          }
        }
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (!work.vertex_blocked[vertices[j]]) {
          work.vertex_blocked[vertices[j]] = 1;
          flipped_vertices.push_back(vertices[j]);
        }
      }

      if (auto spur_path = ShortestPathTree(g, spur, &work, t).path_to(t)) {
        Path total;
        total.arcs.assign(prev.arcs.begin(), prev.arcs.begin() + static_cast<std::ptrdiff_t>(i));
        total.arcs.insert(total.arcs.end(), spur_path->arcs.begin(), spur_path->arcs.end());
        total.cost_s = sequential_cost(g, total.arcs);
        auto segments = path_segments(g, total);
        if (seen.insert(segments).second) candidates.emplace(Key{total.cost_s, std::move(segments)}, total);
      }

      for (std::size_t a : flipped_arcs) work.arc_blocked[a] = 0;
      for (std::size_t v : flipped_vertices) work.vertex_blocked[v] = 0;
      flipped_arcs.clear();
      flipped_vertices.clear();
    }
    if (candidates.empty()) break;
    accepted.push_back(candidates.begin()->second);
    candidates.erase(candidates.begin());
  }
  return accepted;
}

// Assignment ------------------------------------------------------------------

std::vector<double> segment_volumes(const PrimalGraph& g, const ArcVolumes& arc_volumes) {
  std::size_t segments = 0;
  for (const Arc& a : g.arcs()) segments = std::max(segments, a.segment + 1);
  std::vector<double> out(segments, 0.0);
  for (std::size_t a = 0; a < g.arc_count(); ++a) out[g.arc(a).segment] += arc_volumes[a];
  return out;
}

Assignment assign_trips(const RoadNetwork& net, std::span<const TripRecord> trips, const Restriction* restriction,
                        unsigned threads) {
  const PrimalGraph& g = net.primal();
  std::map<std::size_t, std::vector<std::size_t>> by_origin;
  for (std::size_t i = 0; i < trips.size(); ++i) by_origin[net.intersection_index(trips[i].origin)].push_back(i);
  for (const auto& trip : trips) net.intersection_index(trip.destination);

  std::vector<std::pair<std::size_t, const std::vector<std::size_t>*>> groups;
  for (const auto& [origin, list] : by_origin) groups.emplace_back(origin, &list);

  struct Partial {
    ArcVolumes volumes;
    std::vector<UnroutableTrip> unroutable;
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, groups.size()));
  std::vector<Partial> partials(workers);

  auto run_chunk = [&](std::size_t w) {
    Partial& part = partials[w];
    part.volumes.assign(g.arc_count(), 0.0);
    const std::size_t begin = groups.size() * w / workers;
    const std::size_t end = groups.size() * (w + 1) / workers;
    for (std::size_t gi = begin; gi < end; ++gi) {
      const auto [origin, list] = groups[gi];
      const ShortestPathTree tree(g, origin, restriction);
      for (std::size_t ti : *list) {
        const TripRecord& trip = trips[ti];
        const std::size_t dest = net.intersection_index(trip.destination);
        const auto path = dest == origin ? std::nullopt : tree.path_to(dest);
        if (!path) {
          part.unroutable.push_back({trip.trip_id, "unroutable"});
          continue;
        }
        for (std::size_t a : path->arcs) part.volumes[a] += trip.count;
      }
    }
  };

  if (workers == 1) {
    run_chunk(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_chunk, w);
    for (auto& th : pool) th.join();
  }

  Assignment out;
  out.arc_volumes.assign(g.arc_count(), 0.0);
  for (const Partial& part : partials) {
    for (std::size_t a = 0; a < g.arc_count(); ++a) out.arc_volumes[a] += part.volumes[a];
    out.unroutable.insert(out.unroutable.end(), part.unroutable.begin(), part.unroutable.end());
  }
  return out;
}

// Rerouting ---------------------------------------------------------------------

ShareRule parse_share_rule(const std::string& text) {
  if (text == "inverse") return ShareRule::Inverse;
  if (text == "literal") return ShareRule::Literal;
  throw Error(ErrorCode::BadValue, "share rule must be 'inverse' or 'literal', got '" + text + "'");
}

std::vector<double> path_shares(std::span<const double> times, ShareRule rule) {
  std::vector<double> weights;
  weights.reserve(times.size());
  for (double t : times) weights.push_back(rule == ShareRule::Inverse ? 1.0 / t : t);
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return weights;
}

ReroutePlan plan_reroute(const PrimalGraph& g, std::size_t segment, std::span<const char> closed, std::size_t k,
                         ShareRule rule) {
  const Restriction restriction = Restriction::blocking_segment_mask(g, closed);
  ReroutePlan plan;
  plan.segment = segment;
  for (std::size_t a : g.segment_arcs(segment)) {
    std::vector<Path> paths;
    try {
      paths = yen_ksp(g, g.arc(a).from, g.arc(a).to, k, &restriction);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPath) throw;
      throw Error(ErrorCode::NoAlternativePath, "no other directed path for segment index " + std::to_string(segment));
    }
    std::vector<double> times;
    for (const Path& p : paths) times.push_back(p.cost_s);
    const auto shares = path_shares(times, rule);
    ArcReroute entry{a, {}};
    for (std::size_t i = 0; i < paths.size(); ++i) entry.paths.push_back({std::move(paths[i]), shares[i]});
    plan.arcs.push_back(std::move(entry));
  }
  return plan;
}

double apply_reroute(const ReroutePlan& plan, ArcVolumes& volumes) {
  double moved = 0.0;
  for (const ArcReroute& entry : plan.arcs) {
    const double v = volumes[entry.arc];
    if (v == 0.0) continue;
    volumes[entry.arc] = 0.0;
    moved += v;
    for (const ReroutePath& rp : entry.paths) {
      const double add = v * rp.share;
      for (std::size_t a : rp.path.arcs) volumes[a] += add;
    }
  }
  return moved;
}

ArcVolumes local_reroute(const ArcVolumes& volumes, std::size_t opened_segment, const RoadNetwork& net,
                         std::size_t k, ShareRule rule, std::span<const std::size_t> already_open) {
  const PrimalGraph& g = net.primal();
  double v = 0.0;
  for (std::size_t a : g.segment_arcs(opened_segment)) v += volumes[a];
  if (!(v > 0.0)) {
    throw Error(ErrorCode::NoCarsToReroute, "segment " + std::to_string(net.segment(opened_segment).segment_id));
  }
  std::vector<char> closed(net.segment_count(), 0);
  for (std::size_t s : already_open) closed[s] = 1;
  closed[opened_segment] = 1;
  const ReroutePlan plan = plan_reroute(g, opened_segment, closed, k, rule);
  ArcVolumes out = volumes;
  apply_reroute(plan, out);
  return out;
}

Assignment global_reroute(const RoadNetwork& net, std::span<const TripRecord> trips,
                          std::span<const std::size_t> open_segments, bool force) {
  if (trips.size() > kGlobalRerouteTripLimit && !force) {
    throw Error(ErrorCode::InstanceTooLarge, std::to_string(trips.size()) + " trips exceed the limit of " +
                                                 std::to_string(kGlobalRerouteTripLimit) + " (use --force)");
  }
  const Restriction restriction = Restriction::blocking_segments(net.primal(), open_segments);
  return assign_trips(net, trips, &restriction);
}

}  // namespace openstreets
