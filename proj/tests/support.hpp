#pragma once

// Builders and independent oracles shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "openstreets/nn/tape.hpp"
#include "openstreets/roadnet.hpp"
#include "openstreets/routing.hpp"

namespace testsupport {

using namespace openstreets;

/// Segment with a travel time of length/10 s (speed 36 km/h).
inline SegmentRecord seg(SegmentId id, NodeId from, NodeId to, double length_m = 100.0, bool one_way = false,
                         int lanes = 1, double speed_kmh = 36.0) {
  SegmentRecord s;
  s.segment_id = id;
  s.from_node = from;
  s.to_node = to;
  s.length_m = length_m;
  s.width_m = 10.0;
  s.lanes = lanes;
  s.speed_limit_kmh = speed_kmh;
  s.one_way = one_way;
  return s;
}

/// Network whose intersections are the endpoints of `segments`, laid out on a line.
inline RoadNetwork network_of(std::vector<SegmentRecord> segments) {
  std::vector<NodeId> ids;
  for (const auto& s : segments) {
    ids.push_back(s.from_node);
    ids.push_back(s.to_node);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<Intersection> nodes;
  for (NodeId id : ids) nodes.push_back({id, 40.7 + 0.001 * static_cast<double>(id), -74.0});
  return RoadNetwork(std::move(segments), std::move(nodes));
}

/// Random directed graph on `n` vertices: each ordered pair gets a one-way segment with
/// probability p. With `integer_times` travel times are whole seconds, so ties occur.
inline RoadNetwork random_network(std::size_t n, double p, std::mt19937_64& rng, bool integer_times = false) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> whole(1, 4);
  std::vector<SegmentRecord> segs;
  SegmentId next = 1;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v || unit(rng) >= p) continue;
      const double length = integer_times ? 10.0 * whole(rng) : 10.0 + 90.0 * unit(rng);
      segs.push_back(seg(next++, static_cast<NodeId>(u), static_cast<NodeId>(v), length, true));
    }
  }
  std::vector<Intersection> nodes;
  for (std::size_t v = 0; v < n; ++v) nodes.push_back({static_cast<NodeId>(v), 40.7 + 0.001 * v, -74.0});
  return RoadNetwork(std::move(segs), std::move(nodes));
}

/// All-pairs shortest travel times by Floyd-Warshall (infinity when unreachable).
inline std::vector<std::vector<double>> floyd_warshall(const PrimalGraph& g) {
  const std::size_t n = g.vertex_count();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (std::size_t v = 0; v < n; ++v) d[v][v] = 0.0;
  for (const Arc& a : g.arcs()) d[a.from][a.to] = std::min(d[a.from][a.to], a.travel_time_s);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

struct EnumeratedPath {
  double cost = 0.0;
  std::vector<std::size_t> segments;
};

/// Every simple s-t path by depth-first enumeration, sorted by (cost, segment sequence).
/// Costs are summed left to right like the library does.
inline std::vector<EnumeratedPath> all_simple_paths(const PrimalGraph& g, std::size_t s, std::size_t t) {
  std::vector<EnumeratedPath> out;
  std::vector<char> on_path(g.vertex_count(), 0);
  std::vector<std::size_t> arcs;
  std::function<void(std::size_t)> dfs = [&](std::size_t u) {
    if (u == t) {
      EnumeratedPath p;
      for (std::size_t a : arcs) {
        p.cost += g.arc(a).travel_time_s;
        p.segments.push_back(g.arc(a).segment);
      }
      out.push_back(std::move(p));
      return;
    }
    on_path[u] = 1;
    for (std::size_t a : g.out_arcs(u)) {
      const std::size_t v = g.arc(a).to;
      if (on_path[v]) continue;
      arcs.push_back(a);
      dfs(v);
      arcs.pop_back();
    }
    on_path[u] = 0;
  };
  dfs(s);
  std::sort(out.begin(), out.end(), [](const EnumeratedPath& a, const EnumeratedPath& b) {
    return std::tie(a.cost, a.segments) < std::tie(b.cost, b.segments);
  });
  return out;
}

/// The k cheapest simple s-t paths avoiding `blocked` segments, by depth-first search
/// under a cost bound that doubles until k paths fit (or every path does).
inline std::vector<EnumeratedPath> cheapest_simple_paths(const PrimalGraph& g, std::size_t s, std::size_t t,
                                                         std::size_t k, const std::vector<char>& blocked) {
  double total = 0.0;
  for (const Arc& a : g.arcs()) total += a.travel_time_s;
  double bound = 1.0;
  for (;;) {
    std::vector<EnumeratedPath> out;
    std::vector<char> on_path(g.vertex_count(), 0);
    std::vector<std::size_t> arcs;
    std::function<void(std::size_t, double)> dfs = [&](std::size_t u, double cost) {
      if (u == t) {
        EnumeratedPath p;
        for (std::size_t a : arcs) {
          p.cost += g.arc(a).travel_time_s;
          p.segments.push_back(g.arc(a).segment);
        }
        out.push_back(std::move(p));
        return;
      }
      on_path[u] = 1;
      for (std::size_t a : g.out_arcs(u)) {
        const Arc& arc = g.arc(a);
        if (blocked[arc.segment] || on_path[arc.to] || cost + arc.travel_time_s > bound) continue;
        arcs.push_back(a);
        dfs(arc.to, cost + arc.travel_time_s);
        arcs.pop_back();
      }
      on_path[u] = 0;
    };
    dfs(s, 0.0);
    std::sort(out.begin(), out.end(), [](const EnumeratedPath& a, const EnumeratedPath& b) {
      return std::tie(a.cost, a.segments) < std::tie(b.cost, b.segments);
    });
    // Paths at exactly the bound may be cut; only trust results strictly below it.
    if (bound > total || (out.size() >= k && out[k - 1].cost < bound)) {
      if (out.size() > k) out.resize(k);
      return out;
    }
    bound *= 2.0;
  }
}

/// Sum of outgoing minus incoming arc volume at every vertex.
inline std::vector<double> divergence(const PrimalGraph& g, const std::vector<double>& arc_volumes) {
  std::vector<double> d(g.vertex_count(), 0.0);
  for (std::size_t a = 0; a < g.arc_count(); ++a) {
    d[g.arc(a).from] += arc_volumes[a];
    d[g.arc(a).to] -= arc_volumes[a];
  }
  return d;
}

/// Random symmetric loop-free neighbour lists.
inline DualGraph random_dual(std::size_t n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (unit(rng) < p) {
        nb[u].push_back(v);
        nb[v].push_back(u);
      }
  return DualGraph(std::move(nb));
}

inline nn::Matrix<double> random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                        double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  nn::Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // parameter block with the largest error
};

/// Compares analytic parameter gradients with central differences of `loss`.
/// `analytic` must leave d loss / d p in p.grad for every listed parameter.
/// Per block error: ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
inline GradCheck check_gradients(const std::vector<nn::Parameter<double>*>& params, const std::function<double()>& loss,
                                 const std::function<void()>& analytic, double h = 1e-5, double floor = 1e-8) {
  for (auto* p : params) p->zero_grad();
  analytic();
  GradCheck out;
  for (auto* p : params) {
    nn::Matrix<double> numeric(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data()[i];
      p->value.data()[i] = keep + h;
      const double up = loss();
      p->value.data()[i] = keep - h;
      const double down = loss();
      p->value.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const double denom = std::max({p->grad.norm(), numeric.norm(), floor});
    const double err = (p->grad - numeric).norm() / denom;
    if (err >= out.max_rel_error) {
      out.max_rel_error = err;
      out.worst = p->name;
    }
  }
  return out;
}

}  // namespace testsupport
