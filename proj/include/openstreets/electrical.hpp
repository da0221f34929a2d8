#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "openstreets/roadnet.hpp"

namespace openstreets {

struct CapacityEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double capacity = 1.0;
  std::size_t segment = 0;  // source segment when extracted from a road network
};

/// Undirected multigraph with positive edge capacities (conductances).
struct UndirectedGraph {
  std::size_t vertex_count = 0;
  std::vector<CapacityEdge> edges;
};

/// The two-way segments of a network; capacity = lane count.
UndirectedGraph undirected_subgraph(const RoadNetwork& net);

struct ElectricalFlowResult {
  /// Entries of L^+ chi_st on the component of s (mean zero there); 0 elsewhere.
  Eigen::VectorXd potentials;
  /// flow[e] = capacity_e * (phi_u - phi_v), oriented u -> v as stored in the edge.
  Eigen::VectorXd flow;
  double energy = 0.0;
  double residual = 0.0;
};

/// Minimum-energy unit s-t flow. Throws Error(Disconnected) when t is not in the
/// component of s and Error(SingularSystem) if the grounded solve fails.
ElectricalFlowResult electrical_flow(const UndirectedGraph& graph, std::size_t s, std::size_t t);

/// Net flow leaving each vertex: +1 at s, -1 at t, 0 elsewhere for a valid unit flow.
Eigen::VectorXd net_outflow(const UndirectedGraph& graph, const Eigen::VectorXd& flow);

/// Sum of flow^2 / capacity.
double flow_energy(const UndirectedGraph& graph, const Eigen::VectorXd& flow);

}  // namespace openstreets
