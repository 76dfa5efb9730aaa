#ifndef GPUPLAN_MEMPLAN_H_
#define GPUPLAN_MEMPLAN_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpuplan/graph.h"
#include "json.hpp"

namespace gpuplan {

// Planner input: one record per intermediate tensor. Tensor x's object can be
// reused by y iff x.last_use < y.first_use (an op's inputs and outputs
// coexist, so equality is a conflict).
struct TensorUsage {
  TensorId tensor{};
  std::int64_t size = 0;
  int first_use = 0;
  int last_use = 0;
};

// Records ordered by (producer index, output slot).
std::vector<TensorUsage> usage_records(const GraphModel& g);

inline bool reusable_after(const TensorUsage& earlier, const TensorUsage& later) {
  return earlier.last_use < later.first_use;
}
inline bool lifetimes_overlap(const TensorUsage& a, const TensorUsage& b) {
  return !reusable_after(a, b) && !reusable_after(b, a);
}

enum class Strategy { kNaive, kGreedy, kMinCostFlow, kBruteForce };

std::string_view strategy_name(Strategy s);
// Accepts naive, greedy, mincostflow (or mcfp), bruteforce.
std::optional<Strategy> parse_strategy(std::string_view name);

struct SharedObject {
  int id = 0;
  std::int64_t size = 0;
  std::vector<TensorId> tensors;

  friend bool operator==(const SharedObject&, const SharedObject&) = default;
};

struct MemoryPlan {
  Strategy strategy = Strategy::kNaive;
  std::vector<SharedObject> objects;
  std::int64_t total_bytes = 0;

  // tensor -> index into objects
  std::map<TensorId, int> object_index() const;

  friend bool operator==(const MemoryPlan&, const MemoryPlan&) = default;
};

nlohmann::json plan_to_json(const MemoryPlan& p);
MemoryPlan plan_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Naive: one object per tensor.

MemoryPlan plan_naive(std::span<const TensorUsage> records);
MemoryPlan plan_naive(const GraphModel& g);

// ---------------------------------------------------------------------------
// Greedy by closest size. Walks execution indices; each new tensor takes the
// free object whose size is closest by absolute difference (ties: larger,
// then lower id), growing it when needed; objects return to the pool after
// the op at their tensor's last use. The free pool is an ordered set keyed
// by size and the in-use set a min-heap keyed by release index, so each
// tensor costs O(log n) comparisons.

struct GreedyStats {
  std::int64_t comparisons = 0;
};

MemoryPlan plan_greedy(std::span<const TensorUsage> records,
                       GreedyStats* stats = nullptr);
MemoryPlan plan_greedy(const GraphModel& g, GreedyStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Min-cost flow.

enum class FlowEdgeKind {
  kNewObject,   // s -> r_x, cost size_x
  kReuse,       // l_x -> r_y, cost max(0, size_y - size_x)
  kSourceLeft,  // s -> l_x, cost 0
  kRightSink,   // r_x -> t, cost 0
};

struct FlowEdge {
  int from = 0;
  int to = 0;
  std::int64_t capacity = 1;
  std::int64_t cost = 0;
  std::int64_t flow = 0;
  FlowEdgeKind kind = FlowEdgeKind::kNewObject;
  int x = -1;  // record index of the tensor owning `from` (or `to` for s->r)
  int y = -1;  // reuse target record index
};

// Vertex layout: 0 = source, 1 = sink, 2 + 2i = l_i, 3 + 2i = r_i.
struct FlowNetwork {
  std::vector<TensorUsage> records;
  std::vector<FlowEdge> edges;
  bool solved = false;
  std::int64_t total_flow = 0;
  std::int64_t total_cost = 0;

  static constexpr int kSource = 0;
  static constexpr int kSink = 1;
  static constexpr int left(int i) { return 2 + 2 * i; }
  static constexpr int right(int i) { return 3 + 2 * i; }
  int vertex_count() const { return 2 + 2 * static_cast<int>(records.size()); }
  std::int64_t required_flow() const { return static_cast<std::int64_t>(records.size()); }
};

struct FlowNetworkOptions {
  // When set, each l_x keeps reuse edges only to the `reuse_window` tensors
  // that start earliest after x dies, bounding reuse edges to O(N) so the
  // solver runs in O(N^3). This can lose the optimal flow; off by default.
  std::optional<int> reuse_window;
};

FlowNetwork build_flow_network(std::span<const TensorUsage> records,
                               const FlowNetworkOptions& options = {});
FlowNetwork build_flow_network(const GraphModel& g,
                               const FlowNetworkOptions& options = {});

// Throws ErrorCode::kInfeasible when fewer than N units can be routed.
FlowNetwork solve_mcfp(FlowNetwork net);

// Throws ErrorCode::kInfeasible when the network is unsolved or its flow is
// not N.
MemoryPlan extract_assignment(const FlowNetwork& net);

MemoryPlan plan_mincostflow(const GraphModel& g,
                            const FlowNetworkOptions& options = {});

// ---------------------------------------------------------------------------
// Exhaustive optimum over all reuse-compatible groupings.

inline constexpr std::size_t kBruteForceLimit = 8;

// Throws ErrorCode::kTooLarge above kBruteForceLimit tensors.
MemoryPlan brute_force_plan(std::span<const TensorUsage> records);
MemoryPlan brute_force_plan(const GraphModel& g);

MemoryPlan plan_memory(const GraphModel& g, Strategy strategy);

// ---------------------------------------------------------------------------

enum class PlanViolationKind { kOverlap, kUndersized, kUnassigned, kDuplicate, kUnknownTensor };

struct PlanViolation {
  PlanViolationKind kind;
  int object = -1;
  TensorId tensor{};
  std::optional<TensorId> other;

  std::string to_string() const;
};

std::vector<PlanViolation> verify_plan(const GraphModel& g, const MemoryPlan& p);
std::vector<PlanViolation> verify_plan(std::span<const TensorUsage> records,
                                       const MemoryPlan& p);

}  // namespace gpuplan

#endif  // GPUPLAN_MEMPLAN_H_
