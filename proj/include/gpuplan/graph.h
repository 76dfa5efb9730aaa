#ifndef GPUPLAN_GRAPH_H_
#define GPUPLAN_GRAPH_H_

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gpuplan {

enum class TensorId : std::int32_t {};
enum class OpId : std::int32_t {};

constexpr std::int32_t to_int(TensorId id) { return static_cast<std::int32_t>(id); }
constexpr std::int32_t to_int(OpId id) { return static_cast<std::int32_t>(id); }

// Logical [B,H,W,C] shape. Batches are treated as a concatenation of
// independent [H,W,C] tensors everywhere.
struct TensorShape {
  int b = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  std::int64_t element_count() const {
    return std::int64_t{b} * h * w * c;
  }
  bool is_valid() const { return b >= 1 && h >= 1 && w >= 1 && c >= 1; }

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

std::string to_string(const TensorShape& shape);

enum class TensorRole { kGraphInput, kGraphOutput, kIntermediate, kWeight };

inline constexpr int kDefaultElementBytes = 4;

struct TensorSpec {
  TensorId id{};
  TensorShape shape;
  TensorRole role = TensorRole::kIntermediate;
  int element_bytes = kDefaultElementBytes;

  std::int64_t size_bytes() const {
    return shape.element_count() * element_bytes;
  }

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

enum class OpKind {
  kConv2D,
  kDepthwiseConv,
  kAdd,
  kConcat,
  kRelu,
  kPad,
  kResize,
  kReshape,
  kCustom,
};

std::string_view op_kind_name(OpKind kind);
// Unknown names map to kCustom.
OpKind parse_op_kind(std::string_view name);

enum class Activation { kNone, kRelu };

// Spatial amounts, in the order top, bottom, left, right.
struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;

  bool is_zero() const { return top == 0 && bottom == 0 && left == 0 && right == 0; }
  Padding& operator+=(const Padding& o) {
    top += o.top;
    bottom += o.bottom;
    left += o.left;
    right += o.right;
    return *this;
  }
  friend bool operator==(const Padding&, const Padding&) = default;
};

// Attribute bag shared by all kinds; each kind reads only its own fields.
//   CONV_2D / DEPTHWISE_CONV: stride, padding, fused_activation
//   PAD: padding (zero fill)
//   RESIZE: resize_scale (nearest neighbour, integer)
//   CUSTOM: supported, custom_name
struct OpAttrs {
  std::array<int, 2> stride{1, 1};
  Padding padding;
  Activation fused_activation = Activation::kNone;
  int resize_scale = 1;
  bool supported = true;
  std::string custom_name;

  friend bool operator==(const OpAttrs&, const OpAttrs&) = default;
};

struct OpNode {
  OpId id{};
  OpKind kind = OpKind::kCustom;
  std::vector<TensorId> inputs;
  std::vector<TensorId> outputs;
  OpAttrs attrs;

  // Built-ins are always delegate-supported; CUSTOM carries its own flag.
  bool is_supported() const { return kind != OpKind::kCustom || attrs.supported; }

  friend bool operator==(const OpNode&, const OpNode&) = default;
};

// Conv weights are OHWI: [out_c, kh, kw, in_c]. Depthwise weights are
// [1, kh, kw, c]. Bias is [1, 1, 1, out_c]. Weight values are optional and
// only needed for execution.
struct GraphModel {
  std::map<TensorId, TensorSpec> tensors;
  std::map<OpId, OpNode> ops;
  std::vector<OpId> execution_order;
  std::map<TensorId, std::vector<float>> constants;

  const TensorSpec& tensor(TensorId id) const;
  const OpNode& op(OpId id) const;
  bool has_tensor(TensorId id) const { return tensors.contains(id); }

  friend bool operator==(const GraphModel&, const GraphModel&) = default;
};

enum class ViolationKind {
  kDanglingTensor,
  kMultiProducer,
  kMissingProducer,
  kUnexpectedProducer,
  kCycle,
  kShapeMismatch,
  kBadArity,
  kBadOrder,
  kBadTensor,
};

struct GraphViolation {
  ViolationKind kind;
  std::optional<OpId> op;
  std::optional<TensorId> tensor;
  std::string detail;

  // e.g. "dangling-tensor(99)" or "multi-producer(3)".
  std::string to_string() const;
};

std::vector<GraphViolation> validate_graph(const GraphModel& g);

// Kahn's algorithm, ties broken by ascending op id. Throws ErrorCode::kCycle
// naming an op that lies on a cycle.
std::vector<OpId> topo_sort(const GraphModel& g);

// Returns g.execution_order when set, otherwise topo_sort(g).
std::vector<OpId> execution_order(const GraphModel& g);

// Copy of g with execution_order recomputed.
GraphModel with_topo_order(GraphModel g);

// Output shape implied by the op's inputs and attributes. Empty for CUSTOM
// or when the inputs do not admit any output (detail in *why).
std::optional<TensorShape> infer_output_shape(const GraphModel& g,
                                              const OpNode& op,
                                              std::string* why = nullptr);

struct LivenessInterval {
  TensorId tensor{};
  int first_use = 0;
  int last_use = 0;

  friend bool operator==(const LivenessInterval&, const LivenessInterval&) = default;
};

// One interval per produced intermediate, in (producer index, output slot)
// order.
std::vector<LivenessInterval> liveness(const GraphModel& g);

std::int64_t peak_live_bytes(const GraphModel& g);

// Small graph-walking helpers shared by passes, planners and the executor.
std::map<TensorId, OpId> producers(const GraphModel& g);
std::map<TensorId, std::vector<OpId>> consumers(const GraphModel& g);
std::vector<TensorId> intermediate_tensors(const GraphModel& g);

}  // namespace gpuplan

#endif  // GPUPLAN_GRAPH_H_
