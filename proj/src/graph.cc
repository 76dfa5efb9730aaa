#include "gpuplan/graph.h"

#include <algorithm>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "gpuplan/error.h"

namespace gpuplan {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidGraph: return "invalid_graph";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kCorruptBuffer: return "corrupt_buffer";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kPlanViolation: return "plan_violation";
    case ErrorCode::kUnknownModel: return "unknown_model";
    case ErrorCode::kTooLarge: return "too_large";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kIo: return "io_error";
  }
  return "error";
}

std::string to_string(const TensorShape& s) {
  std::ostringstream os;
  os << "[" << s.b << "," << s.h << "," << s.w << "," << s.c << "]";
  return os.str();
}

std::string_view op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConv2D: return "CONV_2D";
    case OpKind::kDepthwiseConv: return "DEPTHWISE_CONV";
    case OpKind::kAdd: return "ADD";
    case OpKind::kConcat: return "CONCAT";
    case OpKind::kRelu: return "RELU";
    case OpKind::kPad: return "PAD";
    case OpKind::kResize: return "RESIZE";
    case OpKind::kReshape: return "RESHAPE";
    case OpKind::kCustom: return "CUSTOM";
  }
  return "CUSTOM";
}

OpKind parse_op_kind(std::string_view name) {
  static constexpr OpKind kAll[] = {
      OpKind::kConv2D, OpKind::kDepthwiseConv, OpKind::kAdd,
      OpKind::kConcat, OpKind::kRelu,          OpKind::kPad,
      OpKind::kResize, OpKind::kReshape,       OpKind::kCustom};
  for (OpKind k : kAll) {
    if (op_kind_name(k) == name) return k;
  }
  return OpKind::kCustom;
}

const TensorSpec& GraphModel::tensor(TensorId id) const {
  auto it = tensors.find(id);
  if (it == tensors.end()) {
    throw Error(ErrorCode::kInvalidGraph,
                "unknown tensor " + std::to_string(to_int(id)));
  }
  return it->second;
}

const OpNode& GraphModel::op(OpId id) const {
  auto it = ops.find(id);
  if (it == ops.end()) {
    throw Error(ErrorCode::kInvalidGraph,
                "unknown op " + std::to_string(to_int(id)));
  }
  return it->second;
}

std::string GraphViolation::to_string() const {
  std::string name;
  switch (kind) {
    case ViolationKind::kDanglingTensor: name = "dangling-tensor"; break;
    case ViolationKind::kMultiProducer: name = "multi-producer"; break;
    case ViolationKind::kMissingProducer: name = "missing-producer"; break;
    case ViolationKind::kUnexpectedProducer: name = "unexpected-producer"; break;
    case ViolationKind::kCycle: name = "cycle"; break;
    case ViolationKind::kShapeMismatch: name = "shape-mismatch"; break;
    case ViolationKind::kBadArity: name = "bad-arity"; break;
    case ViolationKind::kBadOrder: name = "bad-order"; break;
    case ViolationKind::kBadTensor: name = "bad-tensor"; break;
  }
  std::string subject;
  if (tensor) {
    subject = std::to_string(to_int(*tensor));
  } else if (op) {
    subject = "op " + std::to_string(to_int(*op));
  }
  return name + "(" + subject + ")";
}

std::map<TensorId, OpId> producers(const GraphModel& g) {
  std::map<TensorId, OpId> out;
  for (const auto& [id, op] : g.ops) {
    for (TensorId t : op.outputs) out.emplace(t, id);
  }
  return out;
}

std::map<TensorId, std::vector<OpId>> consumers(const GraphModel& g) {
  std::map<TensorId, std::vector<OpId>> out;
  for (const auto& [id, op] : g.ops) {
    for (TensorId t : op.inputs) {
      auto& list = out[t];
      if (list.empty() || list.back() != id) list.push_back(id);
    }
  }
  return out;
}

std::vector<TensorId> intermediate_tensors(const GraphModel& g) {
  std::vector<TensorId> out;
  for (const auto& [id, t] : g.tensors) {
    if (t.role == TensorRole::kIntermediate) out.push_back(id);
  }
  return out;
}

namespace {

// Op-level dependency edges: producer -> consumer, deduplicated. Uses the
// first producer when a tensor has several (validate_graph reports those).
std::map<OpId, std::set<OpId>> op_successors(const GraphModel& g) {
  std::map<TensorId, OpId> prod;
  for (const auto& [id, op] : g.ops) {
    for (TensorId t : op.outputs) prod.try_emplace(t, id);
  }
  std::map<OpId, std::set<OpId>> succ;
  for (const auto& [id, op] : g.ops) succ[id];
  for (const auto& [id, op] : g.ops) {
    for (TensorId t : op.inputs) {
      auto it = prod.find(t);
      if (it != prod.end()) succ[it->second].insert(id);
    }
  }
  return succ;
}

// Walks predecessor links among the unsorted remainder until an op repeats;
// that op lies on a cycle.
OpId find_cycle_member(const std::map<OpId, std::set<OpId>>& succ,
                       const std::set<OpId>& remaining) {
  std::map<OpId, OpId> pred;
  for (OpId u : remaining) {
    for (OpId v : succ.at(u)) {
      if (remaining.contains(v)) pred.try_emplace(v, u);
    }
  }
  OpId cur = *remaining.begin();
  std::set<OpId> seen;
  while (!seen.contains(cur)) {
    seen.insert(cur);
    cur = pred.at(cur);
  }
  return cur;
}

}  // namespace

std::vector<OpId> topo_sort(const GraphModel& g) {
  auto succ = op_successors(g);
  std::map<OpId, int> indegree;
  for (const auto& [u, vs] : succ) {
    indegree.try_emplace(u, 0);
    for (OpId v : vs) ++indegree[v];
  }
  std::priority_queue<OpId, std::vector<OpId>, std::greater<>> ready;
  for (const auto& [u, d] : indegree) {
    if (d == 0) ready.push(u);
  }
  std::vector<OpId> order;
  order.reserve(g.ops.size());
  while (!ready.empty()) {
    OpId u = ready.top();
    ready.pop();
    order.push_back(u);
    for (OpId v : succ[u]) {
      if (--indegree[v] == 0) ready.push(v);
    }
  }
  if (order.size() != g.ops.size()) {
    std::set<OpId> remaining;
    for (const auto& [id, op] : g.ops) remaining.insert(id);
    for (OpId id : order) remaining.erase(id);
    OpId member = find_cycle_member(succ, remaining);
    throw Error(ErrorCode::kCycle,
                "cycle through op " + std::to_string(to_int(member)));
  }
  return order;
}

std::vector<OpId> execution_order(const GraphModel& g) {
  if (!g.execution_order.empty() || g.ops.empty()) return g.execution_order;
  return topo_sort(g);
}

GraphModel with_topo_order(GraphModel g) {
  g.execution_order.clear();
  g.execution_order = topo_sort(g);
  return g;
}

namespace {

bool fail(std::string* why, std::string msg) {
  if (why) *why = std::move(msg);
  return false;
}

const TensorSpec* find_tensor(const GraphModel& g, TensorId id) {
  auto it = g.tensors.find(id);
  return it == g.tensors.end() ? nullptr : &it->second;
}

std::optional<TensorShape> infer_conv(const GraphModel& g, const OpNode& op,
                                      std::string* why) {
  if (op.inputs.size() < 2 || op.inputs.size() > 3) {
    fail(why, "expects input, weights and optional bias");
    return std::nullopt;
  }
  const TensorSpec* in = find_tensor(g, op.inputs[0]);
  const TensorSpec* wt = find_tensor(g, op.inputs[1]);
  if (!in || !wt) return std::nullopt;
  if (wt->role != TensorRole::kWeight) {
    fail(why, "second input must be a weight tensor");
    return std::nullopt;
  }
  const bool depthwise = op.kind == OpKind::kDepthwiseConv;
  const TensorShape& x = in->shape;
  const TensorShape& k = wt->shape;
  const int out_c = depthwise ? x.c : k.b;
  if (depthwise ? (k.b != 1 || k.c != x.c) : (k.c != x.c)) {
    fail(why, "weight shape " + to_string(k) + " does not match input " +
                  to_string(x));
    return std::nullopt;
  }
  if (op.inputs.size() == 3) {
    const TensorSpec* bias = find_tensor(g, op.inputs[2]);
    if (!bias) return std::nullopt;
    if (bias->role != TensorRole::kWeight ||
        bias->shape != TensorShape{1, 1, 1, out_c}) {
      fail(why, "bias must be a [1,1,1," + std::to_string(out_c) +
                    "] weight tensor");
      return std::nullopt;
    }
  }
  const auto& [sh, sw] = op.attrs.stride;
  const Padding& p = op.attrs.padding;
  if (sh < 1 || sw < 1 || p.top < 0 || p.bottom < 0 || p.left < 0 ||
      p.right < 0) {
    fail(why, "stride must be positive and padding non-negative");
    return std::nullopt;
  }
  const int padded_h = x.h + p.top + p.bottom;
  const int padded_w = x.w + p.left + p.right;
  if (padded_h < k.h || padded_w < k.w) {
    fail(why, "kernel larger than padded input");
    return std::nullopt;
  }
  return TensorShape{x.b, (padded_h - k.h) / sh + 1, (padded_w - k.w) / sw + 1,
                     out_c};
}

}  // namespace

std::optional<TensorShape> infer_output_shape(const GraphModel& g,
                                              const OpNode& op,
                                              std::string* why) {
  std::vector<const TensorSpec*> ins;
  for (TensorId t : op.inputs) {
    const TensorSpec* spec = find_tensor(g, t);
    if (!spec) {
      fail(why, "missing input tensor");
      return std::nullopt;
    }
    ins.push_back(spec);
  }
  auto single_input = [&]() -> const TensorSpec* {
    if (ins.size() != 1) {
      fail(why, std::string(op_kind_name(op.kind)) + " takes one input");
      return nullptr;
    }
    return ins[0];
  };

  switch (op.kind) {
    case OpKind::kConv2D:
    case OpKind::kDepthwiseConv:
      return infer_conv(g, op, why);
    case OpKind::kAdd: {
      if (ins.empty()) {
        fail(why, "ADD needs at least one input");
        return std::nullopt;
      }
      // Inputs are either full-shape or a [1,1,1,C] broadcast operand.
      std::optional<TensorShape> full;
      int channels = ins[0]->shape.c;
      for (const TensorSpec* t : ins) {
        const TensorShape& s = t->shape;
        if (s.c != channels) {
          fail(why, "ADD channel mismatch");
          return std::nullopt;
        }
        const bool broadcast = s.b == 1 && s.h == 1 && s.w == 1;
        if (broadcast) continue;
        if (full && *full != s) {
          fail(why, "ADD operand shapes differ");
          return std::nullopt;
        }
        full = s;
      }
      return full.value_or(TensorShape{1, 1, 1, channels});
    }
    case OpKind::kConcat: {
      if (ins.empty()) {
        fail(why, "CONCAT needs at least one input");
        return std::nullopt;
      }
      TensorShape out = ins[0]->shape;
      out.c = 0;
      for (const TensorSpec* t : ins) {
        const TensorShape& s = t->shape;
        if (s.b != out.b || s.h != out.h || s.w != out.w) {
          fail(why, "CONCAT operands differ outside the channel axis");
          return std::nullopt;
        }
        out.c += s.c;
      }
      return out;
    }
    case OpKind::kRelu: {
      const TensorSpec* in = single_input();
      if (!in) return std::nullopt;
      return in->shape;
    }
    case OpKind::kPad: {
      const TensorSpec* in = single_input();
      if (!in) return std::nullopt;
      const Padding& p = op.attrs.padding;
      if (p.top < 0 || p.bottom < 0 || p.left < 0 || p.right < 0) {
        fail(why, "negative padding");
        return std::nullopt;
      }
      TensorShape out = in->shape;
      out.h += p.top + p.bottom;
      out.w += p.left + p.right;
      return out;
    }
    case OpKind::kResize: {
      const TensorSpec* in = single_input();
      if (!in) return std::nullopt;
      if (op.attrs.resize_scale < 1) {
        fail(why, "resize scale must be >= 1");
        return std::nullopt;
      }
      TensorShape out = in->shape;
      out.h *= op.attrs.resize_scale;
      out.w *= op.attrs.resize_scale;
      return out;
    }
    case OpKind::kReshape:
    case OpKind::kCustom:
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<GraphViolation> validate_graph(const GraphModel& g) {
  std::vector<GraphViolation> out;
  auto add = [&](ViolationKind kind, std::optional<OpId> op,
                 std::optional<TensorId> tensor, std::string detail) {
    out.push_back({kind, op, tensor, std::move(detail)});
  };

  for (const auto& [id, t] : g.tensors) {
    if (t.id != id || !t.shape.is_valid() || t.element_bytes < 1) {
      add(ViolationKind::kBadTensor, std::nullopt, id,
          "tensor needs a positive shape and element width");
    }
  }

  std::map<TensorId, std::vector<OpId>> produced_by;
  bool dangling = false;
  for (const auto& [id, op] : g.ops) {
    for (const auto* list : {&op.inputs, &op.outputs}) {
      for (TensorId t : *list) {
        if (!g.tensors.contains(t)) {
          add(ViolationKind::kDanglingTensor, id, t,
              "op references unknown tensor");
          dangling = true;
        }
      }
    }
    for (TensorId t : op.outputs) produced_by[t].push_back(id);
  }

  for (const auto& [t, prods] : produced_by) {
    if (prods.size() > 1) {
      add(ViolationKind::kMultiProducer, prods[1], t,
          "tensor has " + std::to_string(prods.size()) + " producers");
    }
  }
  for (const auto& [id, t] : g.tensors) {
    const bool produced = produced_by.contains(id);
    const bool source =
        t.role == TensorRole::kGraphInput || t.role == TensorRole::kWeight;
    if (source && produced) {
      add(ViolationKind::kUnexpectedProducer, produced_by[id].front(), id,
          "graph inputs and weights cannot be produced by an op");
    } else if (!source && !produced) {
      add(ViolationKind::kMissingProducer, std::nullopt, id,
          "tensor is never produced");
    }
  }

  std::optional<std::vector<OpId>> order;
  try {
    order = topo_sort(g);
  } catch (const Error& e) {
    add(ViolationKind::kCycle, std::nullopt, std::nullopt, e.what());
  }

  if (order && !g.execution_order.empty()) {
    std::vector<OpId> sorted = g.execution_order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<OpId> all;
    for (const auto& [id, op] : g.ops) all.push_back(id);
    if (sorted != all) {
      add(ViolationKind::kBadOrder, std::nullopt, std::nullopt,
          "execution_order is not a permutation of the ops");
    } else {
      std::set<TensorId> available;
      for (const auto& [id, t] : g.tensors) {
        if (!produced_by.contains(id)) available.insert(id);
      }
      for (OpId id : g.execution_order) {
        const OpNode& op = g.ops.at(id);
        for (TensorId t : op.inputs) {
          if (g.tensors.contains(t) && !available.contains(t)) {
            add(ViolationKind::kBadOrder, id, t,
                "execution_order consumes a tensor before it is produced");
          }
        }
        for (TensorId t : op.outputs) available.insert(t);
      }
    }
  }

  if (dangling) return out;
  for (const auto& [id, op] : g.ops) {
    if (op.kind == OpKind::kCustom) {
      if (op.outputs.empty()) {
        add(ViolationKind::kBadArity, id, std::nullopt, "op has no outputs");
      }
      continue;
    }
    if (op.outputs.size() != 1) {
      add(ViolationKind::kBadArity, id, std::nullopt,
          std::string(op_kind_name(op.kind)) + " produces exactly one tensor");
      continue;
    }
    const TensorShape& declared = g.tensors.at(op.outputs[0]).shape;
    if (op.kind == OpKind::kReshape) {
      if (op.inputs.size() != 1) {
        add(ViolationKind::kBadArity, id, std::nullopt,
            "RESHAPE takes one input");
      } else if (g.tensors.at(op.inputs[0]).shape.element_count() !=
                 declared.element_count()) {
        add(ViolationKind::kShapeMismatch, id, op.outputs[0],
            "RESHAPE changes the element count");
      }
      continue;
    }
    std::string why;
    auto inferred = infer_output_shape(g, op, &why);
    if (!inferred) {
      add(ViolationKind::kShapeMismatch, id, std::nullopt, why);
    } else if (*inferred != declared) {
      add(ViolationKind::kShapeMismatch, id, op.outputs[0],
          "declared " + to_string(declared) + " but inputs imply " +
              to_string(*inferred));
    }
  }
  return out;
}

std::vector<LivenessInterval> liveness(const GraphModel& g) {
  const std::vector<OpId> order = execution_order(g);
  std::map<OpId, int> index;
  for (int i = 0; i < static_cast<int>(order.size()); ++i) index[order[i]] = i;

  std::vector<LivenessInterval> out;
  std::map<TensorId, std::size_t> slot;
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    const OpNode& op = g.ops.at(order[i]);
    for (TensorId t : op.outputs) {
      auto it = g.tensors.find(t);
      if (it == g.tensors.end() || it->second.role != TensorRole::kIntermediate)
        continue;
      if (slot.contains(t)) continue;
      slot[t] = out.size();
      out.push_back({t, i, i});
    }
  }
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    for (TensorId t : g.ops.at(order[i]).inputs) {
      auto it = slot.find(t);
      if (it == slot.end()) continue;
      LivenessInterval& iv = out[it->second];
      if (i > iv.first_use) iv.last_use = std::max(iv.last_use, i);
    }
  }
  return out;
}

std::int64_t peak_live_bytes(const GraphModel& g) {
  const auto intervals = liveness(g);
  if (intervals.empty()) return 0;
  // Difference array over execution indices.
  int horizon = 0;
  for (const auto& iv : intervals) horizon = std::max(horizon, iv.last_use + 2);
  std::vector<std::int64_t> delta(horizon, 0);
  for (const auto& iv : intervals) {
    const std::int64_t size = g.tensors.at(iv.tensor).size_bytes();
    delta[iv.first_use] += size;
    delta[iv.last_use + 1] -= size;
  }
  std::int64_t live = 0;
  std::int64_t peak = 0;
  for (std::int64_t d : delta) {
    live += d;
    peak = std::max(peak, live);
  }
  return peak;
}

}  // namespace gpuplan
