#include "openstreets/electrical.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <string>

#include "openstreets/error.hpp"

namespace openstreets {

UndirectedGraph undirected_subgraph(const RoadNetwork& net) {
  UndirectedGraph g;
  g.vertex_count = net.intersection_count();
  for (std::size_t i = 0; i < net.segment_count(); ++i) {
    const SegmentRecord& s = net.segment(i);
    if (s.one_way) continue;
    g.edges.push_back({net.from_vertex(i), net.to_vertex(i), static_cast<double>(s.lanes), i});
  }
  return g;
}

Eigen::VectorXd net_outflow(const UndirectedGraph& graph, const Eigen::VectorXd& flow) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(graph.vertex_count));
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(e);
    out(static_cast<Eigen::Index>(graph.edges[e].u)) += flow(i);
    out(static_cast<Eigen::Index>(graph.edges[e].v)) -= flow(i);
  }
  return out;
}

double flow_energy(const UndirectedGraph& graph, const Eigen::VectorXd& flow) {
  double energy = 0.0;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const double f = flow(static_cast<Eigen::Index>(e));
    energy += f * f / graph.edges[e].capacity;
  }
  return energy;
}

ElectricalFlowResult electrical_flow(const UndirectedGraph& graph, std::size_t s, std::size_t t) {
  const std::size_t n = graph.vertex_count;
  if (s >= n || t >= n || s == t) throw Error(ErrorCode::BadValue, "invalid terminals for electrical flow");
  for (const auto& e : graph.edges) {
    if (!(e.capacity > 0.0)) throw Error(ErrorCode::BadValue, "capacities must be positive");
  }

  // Component of s.
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : graph.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::vector<long> local(n, -1);
  std::vector<std::size_t> members{s};
  local[s] = 0;
  for (std::size_t head = 0; head < members.size(); ++head) {
    for (std::size_t w : adj[members[head]]) {
      if (local[w] < 0) {
        local[w] = static_cast<long>(members.size());
        members.push_back(w);
      }
    }
  }
  if (local[t] < 0) {
    throw Error(ErrorCode::Disconnected, "vertices " + std::to_string(s) + " and " + std::to_string(t) +
                                             " are not connected in the undirected subgraph");
  }

  // Laplacian of the component, grounded at t (row/column of t removed).
  const auto m = static_cast<Eigen::Index>(members.size());
  const Eigen::Index ground = local[t];
  auto reduced = [&](Eigen::Index i) { return i < ground ? i : i - 1; };
  std::vector<Eigen::Triplet<double>> full, grounded;
  for (const auto& e : graph.edges) {
    if (local[e.u] < 0) continue;
    const Eigen::Index a = local[e.u], b = local[e.v];
    if (a == b) continue;
    for (auto [i, j, value] : {std::tuple{a, a, e.capacity}, std::tuple{b, b, e.capacity},
                               std::tuple{a, b, -e.capacity}, std::tuple{b, a, -e.capacity}}) {
      full.emplace_back(i, j, value);
      if (i != ground && j != ground) grounded.emplace_back(reduced(i), reduced(j), value);
    }
  }
  Eigen::SparseMatrix<double> laplacian(m, m), lg(m - 1, m - 1);
  laplacian.setFromTriplets(full.begin(), full.end());
  lg.setFromTriplets(grounded.begin(), grounded.end());

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(m);
  if (m > 1) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m - 1);
    rhs(reduced(local[s])) = 1.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lg);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "Laplacian factorization failed");
    const Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "Laplacian solve failed");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i != ground) phi(i) = x(reduced(i));
    }
  }
  // L^+ chi is orthogonal to the all-ones vector of the component.
  phi.array() -= phi.mean();

  Eigen::VectorXd chi = Eigen::VectorXd::Zero(m);
  chi(local[s]) = 1.0;
  chi(ground) = -1.0;

  ElectricalFlowResult result;
  result.residual = (laplacian * phi - chi).norm();
  if (!(result.residual < 1e-10 * std::max(1.0, phi.norm()))) {
    throw Error(ErrorCode::SingularSystem, "Laplacian residual too large: " + std::to_string(result.residual));
  }
  result.potentials = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m; ++i) result.potentials(static_cast<Eigen::Index>(members[i])) = phi(i);
  result.flow = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(graph.edges.size()));
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    if (local[edge.u] < 0) continue;
    result.flow(static_cast<Eigen::Index>(e)) =
        edge.capacity * (phi(local[edge.u]) - phi(local[edge.v]));
  }
  result.energy = flow_energy(graph, result.flow);
  return result;
}

}  // namespace openstreets
