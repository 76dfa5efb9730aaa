#ifndef GPUPLAN_MIN_COST_FLOW_H_
#define GPUPLAN_MIN_COST_FLOW_H_

#include <cstdint>
#include <vector>

namespace gpuplan {

// Successive shortest augmenting paths on the residual graph, with SPFA
// (queue-based Bellman-Ford) as the shortest-path routine so residual arcs
// with negative cost need no potentials.
class MinCostFlow {
 public:
  struct Arc {
    int from = 0;
    int to = 0;
    std::int64_t capacity = 0;
    std::int64_t cost = 0;
    std::int64_t flow = 0;
  };

  struct Result {
    std::int64_t flow = 0;
    std::int64_t cost = 0;
    int augmentations = 0;
  };

  explicit MinCostFlow(int vertex_count) : adjacency_(vertex_count) {}

  // Returns the arc index; its residual twin is index + 1.
  int add_arc(int from, int to, std::int64_t capacity, std::int64_t cost);

  // Pushes up to `max_flow` units from source to sink at minimum cost.
  // Requires no negative-cost cycle in the initial network.
  Result solve(int source, int sink, std::int64_t max_flow);

  const Arc& arc(int index) const { return arcs_[index]; }
  int arc_count() const { return static_cast<int>(arcs_.size()); }
  int vertex_count() const { return static_cast<int>(adjacency_.size()); }

 private:
  bool shortest_path(int source, int sink, std::vector<int>& via_arc) const;

  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adjacency_;
};

}  // namespace gpuplan

#endif  // GPUPLAN_MIN_COST_FLOW_H_
