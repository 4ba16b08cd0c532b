#include "aoilab/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace aoilab {

DirectedGraph::DirectedGraph(int num_nodes, std::vector<Edge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  if (num_nodes_ <= 0) {
    throw std::invalid_argument("graph: node count must be positive");
  }
  for (const Edge& e : edges_) {
    if (e.from < 0 || e.from >= num_nodes_ || e.to < 0 || e.to >= num_nodes_) {
      throw std::invalid_argument("graph: edge endpoint out of range");
    }
    if (e.from == e.to) {
      throw std::invalid_argument("graph: self-loops are not allowed");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool DirectedGraph::has_edge(int from, int to) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
}

namespace {

// Nodes reachable from `start` following edges, forward or reversed.
std::vector<bool> reachable(const DirectedGraph& g, int start, bool reversed) {
  std::vector<std::vector<int>> adj(g.num_nodes());
  for (const Edge& e : g.edges()) {
    if (reversed) {
      adj[e.to].push_back(e.from);
    } else {
      adj[e.from].push_back(e.to);
    }
  }
  std::vector<bool> seen(g.num_nodes(), false);
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

}  // namespace

bool is_strongly_connected(const DirectedGraph& g) {
  if (g.num_nodes() == 1) return true;
  const auto fwd = reachable(g, 0, false);
  const auto bwd = reachable(g, 0, true);
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (!fwd[v] || !bwd[v]) return false;
  }
  return true;
}

DirectedGraph union_graph(std::span<const DirectedGraph> graphs) {
  if (graphs.empty()) {
    throw std::invalid_argument("union_graph: empty input");
  }
  const int n = graphs.front().num_nodes();
  std::vector<Edge> all;
  for (const DirectedGraph& g : graphs) {
    if (g.num_nodes() != n) {
      throw std::invalid_argument("union_graph: mismatched node counts");
    }
    all.insert(all.end(), g.edges().begin(), g.edges().end());
  }
  return DirectedGraph(n, std::move(all));
}

}  // namespace aoilab
