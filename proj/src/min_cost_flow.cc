#include "gpuplan/min_cost_flow.h"

#include <algorithm>
#include <deque>
#include <limits>

#include "gpuplan/error.h"

namespace gpuplan {

int MinCostFlow::add_arc(int from, int to, std::int64_t capacity,
                         std::int64_t cost) {
  if (from < 0 || to < 0 || from >= vertex_count() || to >= vertex_count()) {
    throw Error(ErrorCode::kInvalidArgument, "arc endpoint out of range");
  }
  const int index = static_cast<int>(arcs_.size());
  arcs_.push_back({from, to, capacity, cost, 0});
  arcs_.push_back({to, from, 0, -cost, 0});
  adjacency_[from].push_back(index);
  adjacency_[to].push_back(index + 1);
  return index;
}

bool MinCostFlow::shortest_path(int source, int sink,
                                std::vector<int>& via_arc) const {
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
  const int n = vertex_count();
  std::vector<std::int64_t> dist(n, kInf);
  std::vector<char> queued(n, 0);
  via_arc.assign(n, -1);

  std::deque<int> queue;
  dist[source] = 0;
  queue.push_back(source);
  queued[source] = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    queued[u] = 0;
    for (int e : adjacency_[u]) {
      const Arc& a = arcs_[e];
      if (a.capacity - a.flow <= 0) continue;
      const std::int64_t candidate = dist[u] + a.cost;
      if (candidate < dist[a.to]) {
        dist[a.to] = candidate;
        via_arc[a.to] = e;
        if (!queued[a.to]) {
          queue.push_back(a.to);
          queued[a.to] = 1;
        }
      }
    }
  }
  return dist[sink] != kInf;
}

MinCostFlow::Result MinCostFlow::solve(int source, int sink,
                                       std::int64_t max_flow) {
  Result result;
  std::vector<int> via_arc;
  while (result.flow < max_flow && shortest_path(source, sink, via_arc)) {
    std::int64_t push = max_flow - result.flow;
    for (int v = sink; v != source; v = arcs_[via_arc[v]].from) {
      const Arc& a = arcs_[via_arc[v]];
      push = std::min(push, a.capacity - a.flow);
    }
    for (int v = sink; v != source; v = arcs_[via_arc[v]].from) {
      const int e = via_arc[v];
      arcs_[e].flow += push;
      arcs_[e ^ 1].flow -= push;
      result.cost += push * arcs_[e].cost;
    }
    result.flow += push;
    ++result.augmentations;
  }
  return result;
}

}  // namespace gpuplan
