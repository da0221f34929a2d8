#include "openstreets/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "openstreets/csv.hpp"
#include "openstreets/error.hpp"

namespace openstreets {

namespace {

constexpr double kEarthRadiusM = 6371008.8;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void build_csr(std::size_t n, const std::vector<Arc>& arcs, bool by_from, std::vector<std::size_t>& offsets,
               std::vector<std::size_t>& list) {
  offsets.assign(n + 1, 0);
  for (const Arc& a : arcs) ++offsets[(by_from ? a.from : a.to) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  list.assign(arcs.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t i = 0; i < arcs.size(); ++i) list[cursor[by_from ? arcs[i].from : arcs[i].to]++] = i;
}

void check_positive(std::size_t row, const char* column, double value) {
  if (!std::isfinite(value)) throw BadValueError(row, column, "not finite");
  if (!(value > 0.0)) throw BadValueError(row, column, "must be > 0");
}

}  // namespace

PrimalGraph::PrimalGraph(std::size_t vertex_count, std::size_t segment_count, std::vector<Arc> arcs)
    : arcs_(std::move(arcs)) {
  build_csr(vertex_count, arcs_, true, out_offsets_, out_list_);
  build_csr(vertex_count, arcs_, false, in_offsets_, in_list_);
  seg_offsets_.assign(segment_count + 1, 0);
  for (const Arc& a : arcs_) ++seg_offsets_[a.segment + 1];
  std::partial_sum(seg_offsets_.begin(), seg_offsets_.end(), seg_offsets_.begin());
  seg_list_.assign(arcs_.size(), 0);
  std::vector<std::size_t> cursor(seg_offsets_.begin(), seg_offsets_.end() - 1);
  for (std::size_t i = 0; i < arcs_.size(); ++i) seg_list_[cursor[arcs_[i].segment]++] = i;
}

// DualGraph -------------------------------------------------------------------

DualGraph::DualGraph(std::vector<std::vector<std::size_t>> neighbors) : neighbors_(std::move(neighbors)) {
  const std::size_t n = neighbors_.size();
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t v = 0; v < n; ++v) {
    auto& list = neighbors_[v];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    for (std::size_t u : list) {
      if (u == v) throw Error(ErrorCode::BadValue, "dual graph contains a self-loop");
      if (u >= n) throw Error(ErrorCode::BadValue, "dual neighbor index out of range");
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u : neighbors_[v]) {
      triplets.emplace_back(static_cast<int>(v), static_cast<int>(u),
                            1.0 / std::sqrt(static_cast<double>(neighbors_[u].size() * neighbors_[v].size())));
    }
  }
  adjacency_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  adjacency_.setFromTriplets(triplets.begin(), triplets.end());
  adjacency_.makeCompressed();
}

double DualGraph::weight(std::size_t u, std::size_t v) const {
  const auto& list = neighbors_[v];
  if (!std::binary_search(list.begin(), list.end(), u)) return 0.0;
  return 1.0 / std::sqrt(static_cast<double>(degree(u) * degree(v)));
}

std::vector<DualEdge> DualGraph::edges() const {
  std::vector<DualEdge> out;
  for (std::size_t u = 0; u < neighbors_.size(); ++u) {
    for (std::size_t v : neighbors_[u]) {
      if (u < v) out.push_back({u, v, weight(u, v)});
    }
  }
  return out;
}

DualGraph DualGraph::without(std::span<const char> removed) const {
  std::vector<std::vector<std::size_t>> kept(neighbors_.size());
  for (std::size_t v = 0; v < neighbors_.size(); ++v) {
    if (removed[v]) continue;
    for (std::size_t u : neighbors_[v]) {
      if (!removed[u]) kept[v].push_back(u);
    }
  }
  return DualGraph(std::move(kept));
}

// RoadNetwork -----------------------------------------------------------------

RoadNetwork::RoadNetwork(std::vector<SegmentRecord> segments, std::vector<Intersection> intersections)
    : segments_(std::move(segments)), intersections_(std::move(intersections)) {
  std::sort(intersections_.begin(), intersections_.end(),
            [](const Intersection& a, const Intersection& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < intersections_.size(); ++i) {
    if (!node_lookup_.emplace(intersections_[i].id, i).second) {
      throw Error(ErrorCode::BadValue, "duplicate intersection id " + std::to_string(intersections_[i].id));
    }
  }
  // Row numbers in diagnostics follow the caller's order, so validate before sorting.
  std::set<SegmentId> seen;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const SegmentRecord& s = segments_[i];
    const std::size_t row = i + 1;
    if (!seen.insert(s.segment_id).second) {
      throw Error(ErrorCode::DuplicateSegmentId,
                  "segment_id " + std::to_string(s.segment_id) + " repeated at row " + std::to_string(row));
    }
    if (s.from_node == s.to_node) throw BadValueError(row, "to_node", "from_node equals to_node");
    check_positive(row, "length_m", s.length_m);
    check_positive(row, "width_m", s.width_m);
    if (s.lanes < 1) throw BadValueError(row, "lanes", "must be >= 1");
    check_positive(row, "speed_limit_kmh", s.speed_limit_kmh);
    if (s.curve_radius_m) check_positive(row, "curve_radius_m", *s.curve_radius_m);
    if (!node_lookup_.count(s.from_node)) throw BadValueError(row, "from_node", "unknown intersection");
    if (!node_lookup_.count(s.to_node)) throw BadValueError(row, "to_node", "unknown intersection");
  }
  std::sort(segments_.begin(), segments_.end(),
            [](const SegmentRecord& a, const SegmentRecord& b) { return a.segment_id < b.segment_id; });
  endpoints_.reserve(segments_.size());
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    segment_lookup_.emplace(segments_[i].segment_id, i);
    endpoints_.emplace_back(node_lookup_.at(segments_[i].from_node), node_lookup_.at(segments_[i].to_node));
  }

  by_latitude_.resize(intersections_.size());
  std::iota(by_latitude_.begin(), by_latitude_.end(), std::size_t{0});
  std::stable_sort(by_latitude_.begin(), by_latitude_.end(), [&](std::size_t a, std::size_t b) {
    return intersections_[a].lat < intersections_[b].lat;
  });

  primal_ = build_primal(*this);
  dual_ = build_dual(*this);

  // Weak connectivity over intersections that carry at least one segment.
  std::vector<std::size_t> parent(intersections_.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : endpoints_) parent[find(a)] = find(b);
  std::set<std::size_t> roots;
  for (const auto& [a, b] : endpoints_) roots.insert(find(a));
  if (roots.size() > 1) {
    warnings_.push_back("DisconnectedNetwork: " + std::to_string(roots.size()) + " weakly connected components");
  }
}

std::optional<std::size_t> RoadNetwork::find_segment(SegmentId id) const {
  auto it = segment_lookup_.find(id);
  if (it == segment_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t RoadNetwork::segment_index(SegmentId id) const {
  auto found = find_segment(id);
  if (!found) throw Error(ErrorCode::UnknownSegmentId, "segment " + std::to_string(id));
  return *found;
}

std::optional<std::size_t> RoadNetwork::find_intersection(NodeId id) const {
  auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t RoadNetwork::intersection_index(NodeId id) const {
  auto found = find_intersection(id);
  if (!found) throw Error(ErrorCode::UnknownIntersection, "intersection " + std::to_string(id));
  return *found;
}

PrimalGraph build_primal(const RoadNetwork& net) {
  std::vector<Arc> arcs;
  arcs.reserve(net.segment_count() * 2);
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    const double t = travel_time(net.segment(i));
    arcs.push_back({net.from_vertex(i), net.to_vertex(i), i, t});
    if (!net.segment(i).one_way) arcs.push_back({net.to_vertex(i), net.from_vertex(i), i, t});
  }
  return PrimalGraph(net.intersection_count(), net.segment_count(), std::move(arcs));
}

DualGraph build_dual(const RoadNetwork& net) {
  std::vector<std::vector<std::size_t>> incident(net.intersection_count());
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    incident[net.from_vertex(i)].push_back(i);
    incident[net.to_vertex(i)].push_back(i);
  }
  std::vector<std::vector<std::size_t>> neighbors(net.segment_count());
  for (const auto& list : incident) {
    for (std::size_t a : list) {
      for (std::size_t b : list) {
        if (a != b) neighbors[a].push_back(b);
      }
    }
  }
  return DualGraph(std::move(neighbors));
}

// CSV -------------------------------------------------------------------------

const std::vector<std::string>& segments_csv_header() {
  static const std::vector<std::string> header = {
      "segment_id", "from_node", "to_node",   "from_lat",        "from_lon", "to_lat",
      "to_lon",     "length_m",  "width_m",   "lanes",           "speed_limit_kmh",
      "one_way",    "bike_lane", "border",    "double_level",    "curve_radius_m"};
  return header;
}

RoadNetwork ingest_segments(std::istream& in) {
  const CsvTable table = CsvTable::read(in, segments_csv_header());
  std::vector<SegmentRecord> segments;
  std::map<NodeId, Intersection> nodes;
  auto add_node = [&](std::size_t row, NodeId id, double lat, double lon, const char* column) {
    auto [it, inserted] = nodes.emplace(id, Intersection{id, lat, lon});
    if (!inserted && (std::abs(it->second.lat - lat) > 1e-7 || std::abs(it->second.lon - lon) > 1e-7)) {
      throw BadValueError(row + 1, column, "intersection " + std::to_string(id) + " has conflicting coordinates");
    }
  };
  for (std::size_t r = 0; r < table.rows(); ++r) {
    SegmentRecord s;
    s.segment_id = table.integer(r, "segment_id");
    s.from_node = table.integer(r, "from_node");
    s.to_node = table.integer(r, "to_node");
    s.length_m = table.real(r, "length_m");
    s.width_m = table.real(r, "width_m");
    const long long lanes = table.integer(r, "lanes");
    if (lanes < 1 || lanes > 64) throw BadValueError(r + 1, "lanes", "must be in [1, 64]");
    s.lanes = static_cast<int>(lanes);
    s.speed_limit_kmh = table.real(r, "speed_limit_kmh");
    s.one_way = table.flag(r, "one_way");
    s.bike_lane = table.flag(r, "bike_lane");
    s.border = table.flag(r, "border");
    s.double_level = table.flag(r, "double_level");
    s.curve_radius_m = table.optional_real(r, "curve_radius_m");
    add_node(r, s.from_node, table.real(r, "from_lat"), table.real(r, "from_lon"), "from_lat");
    add_node(r, s.to_node, table.real(r, "to_lat"), table.real(r, "to_lon"), "to_lat");
    segments.push_back(s);
  }
  std::vector<Intersection> intersections;
  for (const auto& [id, node] : nodes) intersections.push_back(node);
  return RoadNetwork(std::move(segments), std::move(intersections));
}

RoadNetwork ingest_segments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return ingest_segments(in);
}

std::string write_segments_csv(const RoadNetwork& net) {
  std::ostringstream out;
  const auto& header = segments_csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  char buf[512];
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    const SegmentRecord& s = net.segment(i);
    const Intersection& a = net.intersections()[net.from_vertex(i)];
    const Intersection& b = net.intersections()[net.to_vertex(i)];
    std::string curve;
    if (s.curve_radius_m) {
      char c[64];
      std::snprintf(c, sizeof c, "%.3f", *s.curve_radius_m);
      curve = c;
    }
    std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%.7f,%.7f,%.7f,%.7f,%.3f,%.3f,%d,%.3f,%d,%d,%d,%d,%s\n",
                  static_cast<long long>(s.segment_id), static_cast<long long>(s.from_node),
                  static_cast<long long>(s.to_node), a.lat, a.lon, b.lat, b.lon, s.length_m, s.width_m, s.lanes,
                  s.speed_limit_kmh, s.one_way ? 1 : 0, s.bike_lane ? 1 : 0, s.border ? 1 : 0,
                  s.double_level ? 1 : 0, curve.c_str());
    out << buf;
  }
  return out.str();
}

// Snapping --------------------------------------------------------------------

double equirectangular_m(double lat1, double lon1, double lat2, double lon2) {
  const double x = (lon2 - lon1) * kDegToRad * std::cos(0.5 * (lat1 + lat2) * kDegToRad);
  const double y = (lat2 - lat1) * kDegToRad;
  return kEarthRadiusM * std::sqrt(x * x + y * y);
}

std::size_t snap_index(double lat, double lon, const RoadNetwork& net) {
  if (net.intersections_.empty()) throw Error(ErrorCode::EmptyNetwork, "cannot snap on an empty network");
  const auto& order = net.by_latitude_;
  const auto& nodes = net.intersections_;
  // Sweep outward from the query latitude; |dlat| lower-bounds the distance.
  const auto start = static_cast<std::ptrdiff_t>(
      std::lower_bound(order.begin(), order.end(), lat,
                       [&](std::size_t i, double value) { return nodes[i].lat < value; }) -
      order.begin());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  auto consider = [&](std::size_t i) {
    const double d = equirectangular_m(lat, lon, nodes[i].lat, nodes[i].lon);
    if (d < best || (d == best && nodes[i].id < nodes[best_index].id)) {
      best = d;
      best_index = i;
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(order.size());
  for (std::ptrdiff_t i = start; i < n; ++i) {
    if ((nodes[order[i]].lat - lat) * kDegToRad * kEarthRadiusM > best * (1.0 + 1e-12)) break;
    consider(order[i]);
  }
  for (std::ptrdiff_t i = start - 1; i >= 0; --i) {
    if ((lat - nodes[order[i]].lat) * kDegToRad * kEarthRadiusM > best * (1.0 + 1e-12)) break;
    consider(order[i]);
  }
  return best_index;
}

NodeId snap(double lat, double lon, const RoadNetwork& net) {
  return net.intersections()[snap_index(lat, lon, net)].id;
}

}  // namespace openstreets
