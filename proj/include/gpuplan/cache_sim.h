#ifndef GPUPLAN_CACHE_SIM_H_
#define GPUPLAN_CACHE_SIM_H_

#include <cstdint>
#include <list>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gpuplan/dispatch.h"
#include "gpuplan/graph.h"
#include "json.hpp"

namespace gpuplan {

enum class MemoryLayout { kPhwc4, kHwc };

std::string_view layout_name(MemoryLayout layout);

// Fully associative LRU cache. capacity_lines == 0 means unbounded.
struct CacheModel {
  int line_bytes = 64;
  std::int64_t capacity_lines = 0;
  int load_bytes = 16;

  // Throws ErrorCode::kInvalidArgument unless line_bytes is a positive
  // multiple of load_bytes.
  void validate() const;
};

struct CacheReport {
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  std::int64_t bytes_fetched = 0;
  double miss_rate = 0.0;
};

nlohmann::json report_to_json(const CacheReport& r);

struct MemoryRequest {
  std::int64_t address = 0;
  int bytes = 0;
};

// Replays requests against the cache. A request spanning several lines is
// one lookup per line, so hits + misses counts line lookups and
// bytes_fetched = misses * line_bytes.
class CacheSimulator {
 public:
  explicit CacheSimulator(const CacheModel& model);

  void access(const MemoryRequest& request);
  void run(std::span<const MemoryRequest> trace);

  CacheReport report() const;
  void reset_counters();

 private:
  bool touch_line(std::int64_t line);

  CacheModel model_;
  std::list<std::int64_t> lru_;  // front = most recent
  std::unordered_map<std::int64_t, std::list<std::int64_t>::iterator> where_;
  std::int64_t hits_ = 0;
  std::int64_t misses_ = 0;
};

CacheReport simulate_trace(std::span<const MemoryRequest> trace, const CacheModel& model);

// Requests of the first loop iteration of a 1x1 convolution: every useful
// thread (x < W_out, y < H_out, z < ceil(C_out/4)) loads `load_bytes` from
// the start of input cell (y * stride, x * stride), i.e. its first four
// channels. Threads are taken in `order`; stub threads issue nothing.
std::vector<MemoryRequest> conv1x1_first_loads(MemoryLayout layout,
                                               const ConvConfig& access,
                                               std::span<const ThreadId> order,
                                               int load_bytes);

// Throws ErrorCode::kInvalidArgument for kernels other than 1x1.
CacheReport simulate_cache(MemoryLayout layout, const ConvConfig& access,
                           const CacheModel& model, std::span<const ThreadId> order);

// Convenience form: the slice grid of access.out_shape under `wg`, taken in
// thread_order.
CacheReport simulate_cache(MemoryLayout layout, const ConvConfig& access,
                           const CacheModel& model, const WorkGroupConfig& wg = {});

}  // namespace gpuplan

#endif  // GPUPLAN_CACHE_SIM_H_
