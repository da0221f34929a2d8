#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openstreets/dates.hpp"
#include "openstreets/roadnet.hpp"

namespace openstreets {

/// A trip after GPS endpoints have been snapped to intersections.
struct TripRecord {
  std::int64_t trip_id = 0;
  Date date;
  NodeId origin = 0;
  NodeId destination = 0;
  int count = 1;
};

/// Directed path as a sequence of arc indices; cost is the left-to-right sum of
/// arc travel times.
struct Path {
  std::vector<std::size_t> arcs;
  double cost_s = 0.0;
};

/// Segment indices along a path (equal to segment-id order, see RoadNetwork).
std::vector<std::size_t> path_segments(const PrimalGraph& g, const Path& path);
std::vector<SegmentId> path_segment_ids(const RoadNetwork& net, const Path& path);

/// Arcs and vertices excluded from a search. Empty vectors mean "nothing blocked".
struct Restriction {
  std::vector<char> arc_blocked;
  std::vector<char> vertex_blocked;

  static Restriction blocking_segments(const PrimalGraph& g, std::span<const std::size_t> segments);
  /// `closed` is indexed by segment.
  static Restriction blocking_segment_mask(const PrimalGraph& g, std::span<const char> closed);

  bool arc_open(std::size_t a) const { return arc_blocked.empty() || !arc_blocked[a]; }
  bool vertex_open(std::size_t v) const { return vertex_blocked.empty() || !vertex_blocked[v]; }
};

/// Single-source shortest paths over free-flow travel times. Among equal-cost
/// paths the tree keeps the lexicographically smallest segment sequence, which
/// makes every reconstructed path reproducible.
class ShortestPathTree {
 public:
  ShortestPathTree(const PrimalGraph& g, std::size_t source, const Restriction* restriction = nullptr,
                   std::optional<std::size_t> stop_at = std::nullopt);

  bool reached(std::size_t v) const { return pred_[v] != kNone || v == source_; }
  double cost(std::size_t v) const { return dist_[v]; }
  /// Empty optional when v is unreachable.
  std::optional<Path> path_to(std::size_t v) const;

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  void trace_segments(std::size_t v, std::vector<std::size_t>& out) const;

  const PrimalGraph* graph_;
  std::size_t source_;
  std::vector<double> dist_;
  std::vector<std::size_t> pred_;
};

struct TargetRoute {
  std::size_t target = 0;
  std::optional<Path> path;  // nullopt = Unreachable
};

/// Shortest paths from `source` to each target, built from one predecessor tree.
std::vector<TargetRoute> dijkstra(const PrimalGraph& g, std::size_t source, std::span<const std::size_t> targets,
                                  const Restriction* restriction = nullptr);

/// Up to k loopless s-t paths sorted by (cost, segment sequence). Throws Error(NoPath)
/// when t is unreachable.
std::vector<Path> yen_ksp(const PrimalGraph& g, std::size_t s, std::size_t t, std::size_t k,
                          const Restriction* restriction = nullptr);

/// True when a directed path s -> t exists under the restriction.
bool reachable(const PrimalGraph& g, std::size_t s, std::size_t t, const Restriction* restriction = nullptr);

// Trip assignment -------------------------------------------------------------

/// Vehicles per day on every arc of the primal graph.
using ArcVolumes = std::vector<double>;

std::vector<double> segment_volumes(const PrimalGraph& g, const ArcVolumes& arc_volumes);

struct UnroutableTrip {
  std::int64_t trip_id = 0;
  std::string reason;
};

struct Assignment {
  ArcVolumes arc_volumes;
  std::vector<UnroutableTrip> unroutable;
};

/// Single shortest path per trip; Dijkstra runs once per distinct origin. Origins may
/// be processed on `threads` workers; partial sums are merged in origin order, so the
/// result does not depend on the schedule.
Assignment assign_trips(const RoadNetwork& net, std::span<const TripRecord> trips,
                        const Restriction* restriction = nullptr, unsigned threads = 1);

// Rerouting -------------------------------------------------------------------

enum class ShareRule { Inverse, Literal };

ShareRule parse_share_rule(const std::string& text);

struct ReroutePath {
  Path path;
  double share = 0.0;
};

/// Replacement routes for one direction (arc) of an opened segment.
struct ArcReroute {
  std::size_t arc = 0;
  std::vector<ReroutePath> paths;
};

/// Topology-only part of a local reroute; depends on the network and the closed set
/// but not on the day's volumes, so it can be reused across days.
struct ReroutePlan {
  std::size_t segment = 0;
  std::vector<ArcReroute> arcs;
};

/// Path shares for travel times `times` under the given rule; they sum to 1.
std::vector<double> path_shares(std::span<const double> times, ShareRule rule);

/// Top-k alternatives for every direction of `segment` in the network with all
/// `closed` segments removed (closed must include `segment`). Throws
/// Error(NoAlternativePath) if any direction has none.
ReroutePlan plan_reroute(const PrimalGraph& g, std::size_t segment, std::span<const char> closed, std::size_t k,
                         ShareRule rule);

/// Moves the opened segment's volume onto the planned paths. Returns the volume moved.
double apply_reroute(const ReroutePlan& plan, ArcVolumes& volumes);

/// One-shot local reroute: validates volume > 0 (NoCarsToReroute), plans, applies.
/// `already_open` lists segments closed before this one.
ArcVolumes local_reroute(const ArcVolumes& volumes, std::size_t opened_segment, const RoadNetwork& net,
                         std::size_t k, ShareRule rule = ShareRule::Inverse,
                         std::span<const std::size_t> already_open = {});

inline constexpr std::size_t kGlobalRerouteTripLimit = 50000;

/// Exact rerouting: every trip re-planned with the open segments removed.
/// Throws Error(InstanceTooLarge) above kGlobalRerouteTripLimit trips unless forced.
Assignment global_reroute(const RoadNetwork& net, std::span<const TripRecord> trips,
                          std::span<const std::size_t> open_segments, bool force = false);

}  // namespace openstreets
