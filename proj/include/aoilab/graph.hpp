#pragma once

#include <compare>
#include <span>
#include <vector>

namespace aoilab {

struct Edge {
  int from = 0;
  int to = 0;
  auto operator<=>(const Edge&) const = default;
};

// Directed graph on agents 0..num_nodes-1. Edges are kept sorted and unique;
// self-loops and out-of-range endpoints are rejected at construction.
class DirectedGraph {
 public:
  DirectedGraph() = default;
  DirectedGraph(int num_nodes, std::vector<Edge> edges);

  int num_nodes() const { return num_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool has_edge(int from, int to) const;

 private:
  int num_nodes_ = 0;
  std::vector<Edge> edges_;
};

// True iff every ordered pair of nodes is connected by a directed path.
// A single-node graph is strongly connected.
bool is_strongly_connected(const DirectedGraph& g);

// Edge-set union; all graphs must share the same node count.
DirectedGraph union_graph(std::span<const DirectedGraph> graphs);

}  // namespace aoilab
