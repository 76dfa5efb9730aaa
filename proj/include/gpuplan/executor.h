#ifndef GPUPLAN_EXECUTOR_H_
#define GPUPLAN_EXECUTOR_H_

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "gpuplan/graph.h"
#include "gpuplan/layout.h"
#include "gpuplan/memplan.h"
#include "json.hpp"

namespace gpuplan {

struct ExecutionOptions {
  // Reject writes into an object whose current tensor is still live, and
  // reads of a tensor whose object was overwritten.
  bool check_live_windows = true;
  // After every op, assert every live PHWC4 buffer has zero padding lanes.
  bool check_pads = false;
};

using TensorMap = std::map<TensorId, DenseTensor>;

// Arena of PHWC4 buffers. Intermediates live in their plan's shared
// objects; every other non-weight tensor gets a private buffer. Objects are
// sized to the largest PHWC4 footprint of their tensors, which can exceed
// the plan's dense byte size when C is not a multiple of 4.
class ExecutionContext {
 public:
  ExecutionContext(const GraphModel& g, const MemoryPlan& plan, ExecutionOptions options);

  const GraphModel& graph() const { return graph_; }
  const ExecutionOptions& options() const { return options_; }
  int step() const { return step_; }
  void set_step(int step) { step_ = step; }

  // PHWC4 storage for `t`; the write form claims the backing object.
  std::span<float> write(TensorId t);
  std::span<const float> read(TensorId t) const;

  // Dense weight values, e.g. conv kernels and biases.
  const std::vector<float>& constant(TensorId t) const;

  // Checks padding lanes of every tensor currently holding its object.
  void check_pads() const;

  int last_use(TensorId t) const;

 private:
  struct Binding {
    int buffer = 0;
  };

  const GraphModel& graph_;
  ExecutionOptions options_;
  std::vector<std::vector<float>> buffers_;
  std::map<TensorId, Binding> bindings_;
  std::vector<std::optional<TensorId>> owner_;
  std::map<TensorId, int> last_use_;
  int step_ = 0;
};

// Runs one op against the context. Throws ErrorCode::kInvalidGraph on shape
// mismatch and ErrorCode::kUnsupported for CUSTOM ops.
void run_op(const OpNode& node, ExecutionContext& ctx);

// Packs inputs, runs ops in execution order and unpacks the graph outputs.
// Throws ErrorCode::kInvalidGraph / kPlanViolation when the graph or plan is
// invalid and kInvalidArgument when inputs are missing or mis-shaped.
TensorMap run_graph(const GraphModel& g, const MemoryPlan& plan, const TensorMap& inputs,
                    const ExecutionOptions& options = {});

nlohmann::json tensors_to_json(const TensorMap& tensors);
TensorMap tensors_from_json(const nlohmann::json& j);

}  // namespace gpuplan

#endif  // GPUPLAN_EXECUTOR_H_
