#ifndef GPUPLAN_BENCH_H_
#define GPUPLAN_BENCH_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gpuplan/graph.h"
#include "gpuplan/layout.h"
#include "gpuplan/memplan.h"
#include "json.hpp"

namespace gpuplan {

// Parameters of the random DAG generator. Tensor sizes follow from shapes
// drawn uniformly with H, W in [1, max_spatial] and C in [1, max_channels],
// i.e. 4 B up to 4 * max_spatial^2 * max_channels B with the defaults.
struct GraphGenerator {
  std::uint64_t seed = 1;
  int min_ops = 1;
  int max_ops = 30;
  // Chance that an op reads a tensor that already has a consumer.
  double fan_out_prob = 0.3;
  // Chance that an op is a shape-preserving CUSTOM op (not executable).
  double custom_prob = 0.0;
  // Chance that an unconsumed tensor stays an intermediate instead of
  // becoming a graph output. The last op always feeds a graph output.
  double dead_end_prob = 0.1;
  int max_spatial = 8;
  int max_channels = 16;
};

// Shape-consistent, executable graph (weights carry data) that passes
// validate_graph. Identical generators give identical graphs.
GraphModel generate_random_dag(const GraphGenerator& gen);

// Fills every graph input with values in [-1, 1).
std::map<TensorId, DenseTensor> random_inputs(const GraphModel& g, std::uint64_t seed);

// Planner-only workload for scaling runs: `count` tensors, tensor i produced
// at index i and released after a random span of at most `max_span` ops.
std::vector<TensorUsage> random_usage_records(int count, std::uint64_t seed,
                                              int max_span = 32);

// Depthwise-separable stack shaped like MobileNet v1 at 224x224x3: a
// stride-2 3x3 conv to 32 channels, 13 depthwise/pointwise blocks widening to
// 1024 with stride-2 reductions, a 7x7 depthwise reduction and a 1x1 conv to
// 1001 classes. Weight tensors carry no data.
GraphModel mobilenet_like();

struct StrategyComparison {
  std::string graph_id;
  std::int64_t naive = 0;
  std::int64_t greedy = 0;
  std::int64_t mcfp = 0;
  std::int64_t lower_bound = 0;
  std::string winner;  // "greedy", "mcfp" or "tie"
};

StrategyComparison compare_strategies(const GraphModel& g, std::string graph_id);

nlohmann::json comparison_to_json(const StrategyComparison& c);

// Published totals for MobileNet v1, in MB, kept only as context next to the
// bundled approximation.
struct ReferenceFootprint {
  double naive_mb = 9.6;
  double greedy_mb = 2.3;
  double mcfp_mb = 2.7;
};

enum class BenchSuite { kRandom, kMobilenet };

// {"suite", "reports": [...], "summary": {...}} and, for the mobilenet
// suite, the published reference figures.
nlohmann::json run_bench(BenchSuite suite, std::uint64_t first_seed, std::uint64_t last_seed);

}  // namespace gpuplan

#endif  // GPUPLAN_BENCH_H_
