#pragma once

#include <Eigen/SparseCore>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace openstreets {

using SegmentId = std::int64_t;
using NodeId = std::int64_t;

/// One row of segments.csv: the static infrastructure attributes of a street segment.
struct SegmentRecord {
  SegmentId segment_id = 0;
  NodeId from_node = 0;
  NodeId to_node = 0;
  double length_m = 0.0;
  double width_m = 0.0;
  int lanes = 1;
  double speed_limit_kmh = 0.0;
  bool one_way = false;
  bool bike_lane = false;
  bool border = false;
  bool double_level = false;
  std::optional<double> curve_radius_m;  // absent = straight
};

struct Intersection {
  NodeId id = 0;
  double lat = 0.0;
  double lon = 0.0;
};

/// Free-flow seconds to traverse a segment: length over posted speed.
inline double travel_time(const SegmentRecord& seg) { return seg.length_m / (seg.speed_limit_kmh / 3.6); }

/// Directed arc of the primal graph. Indices refer to RoadNetwork vertex/segment order.
struct Arc {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t segment = 0;
  double travel_time_s = 0.0;
};

/// Intersections as vertices, segments as directed arcs (two arcs for two-way segments).
/// Arcs are stored segment by segment: the forward arc, then the reverse arc if any.
class PrimalGraph {
 public:
  PrimalGraph() = default;
  PrimalGraph(std::size_t vertex_count, std::size_t segment_count, std::vector<Arc> arcs);

  std::size_t vertex_count() const noexcept { return out_offsets_.empty() ? 0 : out_offsets_.size() - 1; }
  std::size_t arc_count() const noexcept { return arcs_.size(); }
  const Arc& arc(std::size_t a) const { return arcs_[a]; }
  const std::vector<Arc>& arcs() const noexcept { return arcs_; }

  std::span<const std::size_t> out_arcs(std::size_t v) const {
    return {out_list_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
  }
  std::span<const std::size_t> in_arcs(std::size_t v) const {
    return {in_list_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
  }
  /// One or two arcs, forward first.
  std::span<const std::size_t> segment_arcs(std::size_t segment) const {
    return {seg_list_.data() + seg_offsets_[segment], seg_offsets_[segment + 1] - seg_offsets_[segment]};
  }

 private:
  std::vector<Arc> arcs_;
  std::vector<std::size_t> out_offsets_, out_list_;
  std::vector<std::size_t> in_offsets_, in_list_;
  std::vector<std::size_t> seg_offsets_, seg_list_;
};

struct DualEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
};

/// Segments as vertices; two segments are adjacent iff they share an intersection.
/// Weights use symmetric normalization w_uv = 1 / sqrt(deg(u) deg(v)).
class DualGraph {
 public:
  DualGraph() = default;
  /// `neighbors[v]` lists the vertices adjacent to v; must be symmetric and loop-free.
  explicit DualGraph(std::vector<std::vector<std::size_t>> neighbors);

  std::size_t vertex_count() const noexcept { return neighbors_.size(); }
  std::size_t degree(std::size_t v) const { return neighbors_[v].size(); }
  std::span<const std::size_t> neighbors(std::size_t v) const { return neighbors_[v]; }
  /// 0 when u and v are not adjacent.
  double weight(std::size_t u, std::size_t v) const;
  /// Each undirected edge once, u < v, in ascending (u, v) order.
  std::vector<DualEdge> edges() const;

  /// Symmetric |V|x|V| matrix holding w_uv; row v aggregates the neighbors of v.
  const Eigen::SparseMatrix<double>& normalized_adjacency() const noexcept { return adjacency_; }

  /// Same vertex set with every vertex flagged in `removed` detached (edges dropped,
  /// remaining weights renormalized). Equivalent to deleting those vertices.
  DualGraph without(std::span<const char> removed) const;

 private:
  std::vector<std::vector<std::size_t>> neighbors_;
  Eigen::SparseMatrix<double> adjacency_;
};

/// Immutable road network with primal (routing) and dual (graph convolution) views.
/// Segments are kept sorted by segment_id and intersections by id, so index order
/// equals id order throughout the library.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  /// Validates invariants (throws BadValueError / Error(DuplicateSegmentId)).
  RoadNetwork(std::vector<SegmentRecord> segments, std::vector<Intersection> intersections);

  const std::vector<SegmentRecord>& segments() const noexcept { return segments_; }
  const SegmentRecord& segment(std::size_t index) const { return segments_[index]; }
  std::size_t segment_count() const noexcept { return segments_.size(); }
  std::optional<std::size_t> find_segment(SegmentId id) const;
  /// Throws Error(UnknownSegmentId).
  std::size_t segment_index(SegmentId id) const;

  const std::vector<Intersection>& intersections() const noexcept { return intersections_; }
  std::size_t intersection_count() const noexcept { return intersections_.size(); }
  std::optional<std::size_t> find_intersection(NodeId id) const;
  /// Throws Error(UnknownIntersection).
  std::size_t intersection_index(NodeId id) const;

  /// Vertex indices (into intersections()) of a segment's endpoints.
  std::size_t from_vertex(std::size_t segment) const { return endpoints_[segment].first; }
  std::size_t to_vertex(std::size_t segment) const { return endpoints_[segment].second; }

  const PrimalGraph& primal() const noexcept { return primal_; }
  const DualGraph& dual() const noexcept { return dual_; }

  /// Non-fatal diagnostics (e.g. "DisconnectedNetwork: 2 components").
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::vector<SegmentRecord> segments_;
  std::vector<Intersection> intersections_;
  std::vector<std::pair<std::size_t, std::size_t>> endpoints_;
  std::map<SegmentId, std::size_t> segment_lookup_;
  std::map<NodeId, std::size_t> node_lookup_;
  std::vector<std::size_t> by_latitude_;  // intersection indices sorted by latitude
  PrimalGraph primal_;
  DualGraph dual_;
  std::vector<std::string> warnings_;

  friend std::size_t snap_index(double lat, double lon, const RoadNetwork& net);
};

/// Exact header of segments.csv.
const std::vector<std::string>& segments_csv_header();

RoadNetwork ingest_segments(std::istream& in);
RoadNetwork ingest_segments(const std::string& path);
std::string write_segments_csv(const RoadNetwork& net);

DualGraph build_dual(const RoadNetwork& net);
PrimalGraph build_primal(const RoadNetwork& net);

/// Equirectangular distance in meters (mean-latitude scaling of longitude).
double equirectangular_m(double lat1, double lon1, double lat2, double lon2);

/// Nearest intersection id; ties go to the lowest id. Throws Error(EmptyNetwork).
NodeId snap(double lat, double lon, const RoadNetwork& net);
std::size_t snap_index(double lat, double lon, const RoadNetwork& net);

// GeoJSON map layer -----------------------------------------------------------

struct MapFeature {
  SegmentId segment_id = 0;
  double from_lon = 0.0, from_lat = 0.0;
  double to_lon = 0.0, to_lat = 0.0;
  std::optional<double> value;
};

using SegmentOverlay = std::map<SegmentId, double>;

/// Throws Error(UnknownSegmentId) when the overlay names a segment not in the network.
std::vector<MapFeature> map_features(const RoadNetwork& net, const SegmentOverlay& overlay);
/// Canonical text: fixed key order, coordinates with 6 decimals, values in shortest
/// round-trip form, one feature per line.
std::string write_geojson(const std::vector<MapFeature>& features);
std::vector<MapFeature> parse_geojson(const std::string& text);
std::string export_geojson(const RoadNetwork& net, const SegmentOverlay& overlay);

}  // namespace openstreets
