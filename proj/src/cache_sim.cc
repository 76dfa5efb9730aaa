#include "gpuplan/cache_sim.h"

#include "gpuplan/error.h"
#include "gpuplan/layout.h"

namespace gpuplan {

std::string_view layout_name(MemoryLayout layout) {
  return layout == MemoryLayout::kPhwc4 ? "phwc4" : "hwc";
}

void CacheModel::validate() const {
  if (line_bytes <= 0 || load_bytes <= 0 || line_bytes % load_bytes != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "line_bytes must be a positive multiple of load_bytes");
  }
  if (capacity_lines < 0) {
    throw Error(ErrorCode::kInvalidArgument, "capacity_lines must be >= 0");
  }
}

nlohmann::json report_to_json(const CacheReport& r) {
  return {{"hits", r.hits},
          {"misses", r.misses},
          {"bytes_fetched", r.bytes_fetched},
          {"miss_rate", r.miss_rate}};
}

CacheSimulator::CacheSimulator(const CacheModel& model) : model_(model) {
  model_.validate();
}

bool CacheSimulator::touch_line(std::int64_t line) {
  if (auto it = where_.find(line); it != where_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    return true;
  }
  lru_.push_front(line);
  where_[line] = lru_.begin();
  if (model_.capacity_lines > 0 &&
      static_cast<std::int64_t>(lru_.size()) > model_.capacity_lines) {
    where_.erase(lru_.back());
    lru_.pop_back();
  }
  return false;
}

void CacheSimulator::access(const MemoryRequest& request) {
  if (request.bytes <= 0) return;
  const std::int64_t first = request.address / model_.line_bytes;
  const std::int64_t last = (request.address + request.bytes - 1) / model_.line_bytes;
  for (std::int64_t line = first; line <= last; ++line) {
    if (touch_line(line)) {
      ++hits_;
    } else {
      ++misses_;
    }
  }
}

void CacheSimulator::run(std::span<const MemoryRequest> trace) {
  for (const MemoryRequest& r : trace) access(r);
}

CacheReport CacheSimulator::report() const {
  CacheReport r;
  r.hits = hits_;
  r.misses = misses_;
  r.bytes_fetched = misses_ * model_.line_bytes;
  const std::int64_t lookups = hits_ + misses_;
  r.miss_rate = lookups == 0 ? 0.0 : static_cast<double>(misses_) / lookups;
  return r;
}

void CacheSimulator::reset_counters() {
  hits_ = 0;
  misses_ = 0;
}

CacheReport simulate_trace(std::span<const MemoryRequest> trace, const CacheModel& model) {
  CacheSimulator sim(model);
  sim.run(trace);
  return sim.report();
}

std::vector<MemoryRequest> conv1x1_first_loads(MemoryLayout layout,
                                               const ConvConfig& access,
                                               std::span<const ThreadId> order,
                                               int load_bytes) {
  const TensorShape& in = access.in_shape;
  const TensorShape& out = access.out_shape;
  const int out_slices = slice_count(out.c);
  std::vector<MemoryRequest> trace;
  trace.reserve(order.size());
  for (const ThreadId& t : order) {
    if (t.x >= out.w || t.y >= out.h || t.z >= out_slices) continue;
    const int h = t.y * access.stride;
    const int w = t.x * access.stride;
    if (h >= in.h || w >= in.w) continue;
    std::int64_t element;
    if (layout == MemoryLayout::kPhwc4) {
      element = phwc4_offset(in, 0, h, w, 0);
    } else {
      element = (std::int64_t{h} * in.w + w) * in.c;
    }
    trace.push_back({element * 4, load_bytes});
  }
  return trace;
}

CacheReport simulate_cache(MemoryLayout layout, const ConvConfig& access,
                           const CacheModel& model, std::span<const ThreadId> order) {
  if (access.kernel != 1) {
    throw Error(ErrorCode::kInvalidArgument, "cache simulation covers 1x1 kernels only");
  }
  model.validate();
  const auto trace = conv1x1_first_loads(layout, access, order, model.load_bytes);
  return simulate_trace(trace, model);
}

CacheReport simulate_cache(MemoryLayout layout, const ConvConfig& access,
                           const CacheModel& model, const WorkGroupConfig& wg) {
  const auto order = thread_order(slice_grid(access.out_shape, wg));
  return simulate_cache(layout, access, model, order);
}

}  // namespace gpuplan
