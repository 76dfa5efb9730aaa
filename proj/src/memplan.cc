#include "gpuplan/memplan.h"

#include <algorithm>
#include <climits>
#include <functional>
#include <queue>
#include <set>

#include "gpuplan/error.h"
#include "gpuplan/min_cost_flow.h"

namespace gpuplan {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kNaive: return "naive";
    case Strategy::kGreedy: return "greedy";
    case Strategy::kMinCostFlow: return "mincostflow";
    case Strategy::kBruteForce: return "bruteforce";
  }
  return "naive";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "naive") return Strategy::kNaive;
  if (name == "greedy") return Strategy::kGreedy;
  if (name == "mincostflow" || name == "mcfp") return Strategy::kMinCostFlow;
  if (name == "bruteforce") return Strategy::kBruteForce;
  return std::nullopt;
}

std::vector<TensorUsage> usage_records(const GraphModel& g) {
  std::vector<TensorUsage> out;
  for (const LivenessInterval& iv : liveness(g)) {
    out.push_back({iv.tensor, g.tensors.at(iv.tensor).size_bytes(),
                   iv.first_use, iv.last_use});
  }
  return out;
}

std::map<TensorId, int> MemoryPlan::object_index() const {
  std::map<TensorId, int> out;
  for (int i = 0; i < static_cast<int>(objects.size()); ++i) {
    for (TensorId t : objects[i].tensors) out.emplace(t, i);
  }
  return out;
}

nlohmann::json plan_to_json(const MemoryPlan& p) {
  nlohmann::json objects = nlohmann::json::array();
  for (const SharedObject& o : p.objects) {
    nlohmann::json tensors = nlohmann::json::array();
    for (TensorId t : o.tensors) tensors.push_back(to_int(t));
    objects.push_back({{"id", o.id}, {"size", o.size}, {"tensors", std::move(tensors)}});
  }
  return {{"strategy", strategy_name(p.strategy)},
          {"objects", std::move(objects)},
          {"total_bytes", p.total_bytes}};
}

MemoryPlan plan_from_json(const nlohmann::json& j) {
  try {
    MemoryPlan p;
    auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!strategy) throw Error(ErrorCode::kParse, "unknown plan strategy");
    p.strategy = *strategy;
    for (const auto& jo : j.at("objects")) {
      SharedObject o;
      o.id = jo.at("id").get<int>();
      o.size = jo.at("size").get<std::int64_t>();
      for (int t : jo.at("tensors").get<std::vector<int>>()) o.tensors.push_back(TensorId{t});
      p.objects.push_back(std::move(o));
    }
    p.total_bytes = j.at("total_bytes").get<std::int64_t>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

namespace {

void finalize_total(MemoryPlan& p) {
  p.total_bytes = 0;
  for (const SharedObject& o : p.objects) p.total_bytes += o.size;
}

}  // namespace

// ---------------------------------------------------------------------------

MemoryPlan plan_naive(std::span<const TensorUsage> records) {
  MemoryPlan p{Strategy::kNaive, {}, 0};
  for (const TensorUsage& r : records) {
    p.objects.push_back({static_cast<int>(p.objects.size()), r.size, {r.tensor}});
  }
  finalize_total(p);
  return p;
}

MemoryPlan plan_naive(const GraphModel& g) { return plan_naive(usage_records(g)); }

// ---------------------------------------------------------------------------

namespace {

struct PoolKey {
  std::int64_t size;
  int object;
};

struct CountingPoolLess {
  std::int64_t* counter;
  bool operator()(const PoolKey& a, const PoolKey& b) const {
    ++*counter;
    return a.size != b.size ? a.size < b.size : a.object < b.object;
  }
};

struct InUseKey {
  int release_after;
  int object;
};

// Min-heap order for std::priority_queue.
struct CountingInUseGreater {
  std::int64_t* counter;
  bool operator()(const InUseKey& a, const InUseKey& b) const {
    ++*counter;
    return a.release_after != b.release_after ? a.release_after > b.release_after
                                              : a.object > b.object;
  }
};

}  // namespace

MemoryPlan plan_greedy(std::span<const TensorUsage> records, GreedyStats* stats) {
  std::int64_t comparisons = 0;
  MemoryPlan plan{Strategy::kGreedy, {}, 0};

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].first_use < records[b].first_use;
  });

  std::set<PoolKey, CountingPoolLess> available(CountingPoolLess{&comparisons});
  std::priority_queue<InUseKey, std::vector<InUseKey>, CountingInUseGreater> in_use(
      CountingInUseGreater{&comparisons});

  for (std::size_t idx : order) {
    const TensorUsage& t = records[idx];
    // Everything whose last consumer ran before this producer is free again.
    while (!in_use.empty() && in_use.top().release_after < t.first_use) {
      const int obj = in_use.top().object;
      in_use.pop();
      available.insert({plan.objects[obj].size, obj});
    }

    int chosen;
    if (available.empty()) {
      chosen = static_cast<int>(plan.objects.size());
      plan.objects.push_back({chosen, t.size, {}});
    } else {
      auto up = available.lower_bound({t.size, INT_MIN});
      auto pick = up;
      if (up == available.end() ||
          (up != available.begin() &&
           t.size - std::prev(up)->size < up->size - t.size)) {
        // Largest smaller size wins; take its lowest id.
        pick = available.lower_bound({std::prev(up)->size, INT_MIN});
      }
      chosen = pick->object;
      available.erase(pick);
      SharedObject& obj = plan.objects[chosen];
      if (t.size > obj.size) obj.size = t.size;
    }
    plan.objects[chosen].tensors.push_back(t.tensor);
    in_use.push({t.last_use, chosen});
  }
  finalize_total(plan);
  if (stats) stats->comparisons = comparisons;
  return plan;
}

MemoryPlan plan_greedy(const GraphModel& g, GreedyStats* stats) {
  return plan_greedy(usage_records(g), stats);
}

// ---------------------------------------------------------------------------

FlowNetwork build_flow_network(std::span<const TensorUsage> records,
                               const FlowNetworkOptions& options) {
  FlowNetwork net;
  net.records.assign(records.begin(), records.end());
  const int n = static_cast<int>(records.size());
  for (int x = 0; x < n; ++x) {
    net.edges.push_back({FlowNetwork::kSource, FlowNetwork::right(x), 1,
                         records[x].size, 0, FlowEdgeKind::kNewObject, x, -1});
    net.edges.push_back({FlowNetwork::kSource, FlowNetwork::left(x), 1, 0, 0,
                         FlowEdgeKind::kSourceLeft, x, -1});
    net.edges.push_back({FlowNetwork::right(x), FlowNetwork::kSink, 1, 0, 0,
                         FlowEdgeKind::kRightSink, x, -1});
  }
  for (int x = 0; x < n; ++x) {
    std::vector<int> targets;
    for (int y = 0; y < n; ++y) {
      if (y != x && reusable_after(records[x], records[y])) targets.push_back(y);
    }
    if (options.reuse_window && static_cast<int>(targets.size()) > *options.reuse_window) {
      std::stable_sort(targets.begin(), targets.end(), [&](int a, int b) {
        return records[a].first_use < records[b].first_use;
      });
      targets.resize(std::max(0, *options.reuse_window));
      std::sort(targets.begin(), targets.end());
    }
    for (int y : targets) {
      net.edges.push_back({FlowNetwork::left(x), FlowNetwork::right(y), 1,
                           std::max<std::int64_t>(0, records[y].size - records[x].size),
                           0, FlowEdgeKind::kReuse, x, y});
    }
  }
  return net;
}

FlowNetwork build_flow_network(const GraphModel& g, const FlowNetworkOptions& options) {
  return build_flow_network(usage_records(g), options);
}

FlowNetwork solve_mcfp(FlowNetwork net) {
  MinCostFlow solver(net.vertex_count());
  std::vector<int> arc_of(net.edges.size());
  for (std::size_t i = 0; i < net.edges.size(); ++i) {
    const FlowEdge& e = net.edges[i];
    arc_of[i] = solver.add_arc(e.from, e.to, e.capacity, e.cost);
  }
  const auto result =
      solver.solve(FlowNetwork::kSource, FlowNetwork::kSink, net.required_flow());
  if (result.flow != net.required_flow()) {
    throw Error(ErrorCode::kInfeasible,
                "flow network admits " + std::to_string(result.flow) + " of " +
                    std::to_string(net.required_flow()) + " units");
  }
  for (std::size_t i = 0; i < net.edges.size(); ++i) {
    net.edges[i].flow = solver.arc(arc_of[i]).flow;
  }
  net.solved = true;
  net.total_flow = result.flow;
  net.total_cost = result.cost;
  return net;
}

MemoryPlan extract_assignment(const FlowNetwork& net) {
  if (!net.solved || net.total_flow != net.required_flow()) {
    throw Error(ErrorCode::kInfeasible, "flow network is not solved to full flow");
  }
  const int n = static_cast<int>(net.records.size());
  std::vector<char> head(n, 0);
  std::vector<int> next(n, -1);
  std::vector<int> incoming(n, 0);
  for (const FlowEdge& e : net.edges) {
    if (e.flow < e.capacity) continue;
    if (e.kind == FlowEdgeKind::kNewObject) {
      head[e.x] = 1;
      ++incoming[e.x];
    } else if (e.kind == FlowEdgeKind::kReuse) {
      next[e.x] = e.y;
      ++incoming[e.y];
    }
  }
  MemoryPlan plan{Strategy::kMinCostFlow, {}, 0};
  for (int x = 0; x < n; ++x) {
    if (incoming[x] != 1) {
      throw Error(ErrorCode::kInfeasible, "tensor without a unique flow assignment");
    }
    if (!head[x]) continue;
    SharedObject obj{static_cast<int>(plan.objects.size()), 0, {}};
    for (int cur = x; cur != -1; cur = next[cur]) {
      obj.tensors.push_back(net.records[cur].tensor);
      obj.size = std::max(obj.size, net.records[cur].size);
    }
    plan.objects.push_back(std::move(obj));
  }
  finalize_total(plan);
  return plan;
}

MemoryPlan plan_mincostflow(const GraphModel& g, const FlowNetworkOptions& options) {
  return extract_assignment(solve_mcfp(build_flow_network(g, options)));
}

// ---------------------------------------------------------------------------

namespace {

struct Group {
  int max_last;
  std::int64_t size;
  std::vector<int> members;
};

void search_groupings(std::span<const TensorUsage> r, std::span<const int> order,
                      std::size_t next, std::vector<Group>& groups,
                      std::int64_t cost, std::int64_t& best,
                      std::vector<Group>& best_groups) {
  if (cost >= best) return;
  if (next == order.size()) {
    best = cost;
    best_groups = groups;
    return;
  }
  const int y = order[next];
  // Indexed access: the recursion below may reallocate `groups`.
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].max_last >= r[y].first_use) continue;
    const Group saved = groups[i];
    const std::int64_t growth = std::max<std::int64_t>(0, r[y].size - saved.size);
    groups[i].max_last = std::max(saved.max_last, r[y].last_use);
    groups[i].size += growth;
    groups[i].members.push_back(y);
    search_groupings(r, order, next + 1, groups, cost + growth, best, best_groups);
    groups[i] = saved;
  }
  groups.push_back({r[y].last_use, r[y].size, {y}});
  search_groupings(r, order, next + 1, groups, cost + r[y].size, best, best_groups);
  groups.pop_back();
}

}  // namespace

MemoryPlan brute_force_plan(std::span<const TensorUsage> records) {
  if (records.size() > kBruteForceLimit) {
    throw Error(ErrorCode::kTooLarge,
                "exhaustive planning is limited to " +
                    std::to_string(kBruteForceLimit) + " intermediates, got " +
                    std::to_string(records.size()));
  }
  std::vector<int> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return records[a].first_use < records[b].first_use;
  });
  std::vector<Group> groups;
  std::vector<Group> best_groups;
  std::int64_t best = 0;
  for (const TensorUsage& r : records) best += r.size;
  ++best;  // the all-separate grouping must be accepted
  search_groupings(records, order, 0, groups, 0, best, best_groups);

  MemoryPlan plan{Strategy::kBruteForce, {}, 0};
  for (const Group& grp : best_groups) {
    SharedObject obj{static_cast<int>(plan.objects.size()), grp.size, {}};
    for (int m : grp.members) obj.tensors.push_back(records[m].tensor);
    plan.objects.push_back(std::move(obj));
  }
  finalize_total(plan);
  return plan;
}

MemoryPlan brute_force_plan(const GraphModel& g) { return brute_force_plan(usage_records(g)); }

MemoryPlan plan_memory(const GraphModel& g, Strategy strategy) {
  switch (strategy) {
    case Strategy::kNaive: return plan_naive(g);
    case Strategy::kGreedy: return plan_greedy(g);
    case Strategy::kMinCostFlow: return plan_mincostflow(g);
    case Strategy::kBruteForce: return brute_force_plan(g);
  }
  return plan_naive(g);
}

// ---------------------------------------------------------------------------

std::string PlanViolation::to_string() const {
  const std::string t = std::to_string(to_int(tensor));
  switch (kind) {
    case PlanViolationKind::kOverlap:
      return "overlap(object " + std::to_string(object) + ": " + t + "," +
             std::to_string(to_int(other.value_or(TensorId{-1}))) + ")";
    case PlanViolationKind::kUndersized:
      return "undersized(object " + std::to_string(object) + ": " + t + ")";
    case PlanViolationKind::kUnassigned:
      return "unassigned(" + t + ")";
    case PlanViolationKind::kDuplicate:
      return "duplicate(" + t + ")";
    case PlanViolationKind::kUnknownTensor:
      return "unknown-tensor(object " + std::to_string(object) + ": " + t + ")";
  }
  return "violation";
}

std::vector<PlanViolation> verify_plan(std::span<const TensorUsage> records,
                                       const MemoryPlan& p) {
  std::map<TensorId, const TensorUsage*> by_id;
  for (const TensorUsage& r : records) by_id.emplace(r.tensor, &r);

  std::vector<PlanViolation> out;
  std::set<TensorId> assigned;
  for (const SharedObject& obj : p.objects) {
    std::vector<const TensorUsage*> members;
    for (TensorId t : obj.tensors) {
      auto it = by_id.find(t);
      if (it == by_id.end()) {
        out.push_back({PlanViolationKind::kUnknownTensor, obj.id, t, std::nullopt});
        continue;
      }
      if (!assigned.insert(t).second) {
        out.push_back({PlanViolationKind::kDuplicate, obj.id, t, std::nullopt});
      }
      if (it->second->size > obj.size) {
        out.push_back({PlanViolationKind::kUndersized, obj.id, t, std::nullopt});
      }
      members.push_back(it->second);
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        if (lifetimes_overlap(*members[i], *members[j])) {
          out.push_back({PlanViolationKind::kOverlap, obj.id, members[i]->tensor,
                         members[j]->tensor});
        }
      }
    }
  }
  for (const TensorUsage& r : records) {
    if (!assigned.contains(r.tensor)) {
      out.push_back({PlanViolationKind::kUnassigned, -1, r.tensor, std::nullopt});
    }
  }
  return out;
}

std::vector<PlanViolation> verify_plan(const GraphModel& g, const MemoryPlan& p) {
  return verify_plan(usage_records(g), p);
}

}  // namespace gpuplan
