#include "gpuplan/passes.h"

#include <algorithm>
#include <functional>
#include <numeric>

#include "gpuplan/error.h"

namespace gpuplan {

nlohmann::json log_to_json(const RewriteLog& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const RewriteEntry& e : log.entries) {
    nlohmann::json removed = nlohmann::json::array();
    for (OpId id : e.removed_op_ids) removed.push_back(to_int(id));
    out.push_back({{"pass_name", e.pass_name},
                   {"removed_op_ids", std::move(removed)},
                   {"fused_into_op_id", e.fused_into_op_id
                                            ? nlohmann::json(to_int(*e.fused_into_op_id))
                                            : nlohmann::json(nullptr)}});
  }
  return out;
}

RewriteLog log_from_json(const nlohmann::json& j) {
  try {
    RewriteLog log;
    for (const auto& je : j) {
      RewriteEntry e;
      e.pass_name = je.at("pass_name").get<std::string>();
      for (int id : je.at("removed_op_ids").get<std::vector<int>>()) {
        e.removed_op_ids.push_back(OpId{id});
      }
      const auto& fused = je.at("fused_into_op_id");
      if (!fused.is_null()) e.fused_into_op_id = OpId{fused.get<int>()};
      log.entries.push_back(std::move(e));
    }
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

namespace {

bool is_conv(const OpNode& op) {
  return op.kind == OpKind::kConv2D || op.kind == OpKind::kDepthwiseConv;
}

void replace_in(std::vector<TensorId>& list, TensorId from, TensorId to) {
  std::replace(list.begin(), list.end(), from, to);
}

void erase_tensor(GraphModel& g, TensorId t) {
  g.tensors.erase(t);
  g.constants.erase(t);
}

// The op consuming `t`, provided it is the only one and uses `t` once.
const OpNode* sole_consumer(const GraphModel& g, TensorId t) {
  const OpNode* found = nullptr;
  for (const auto& [id, op] : g.ops) {
    const auto uses = std::count(op.inputs.begin(), op.inputs.end(), t);
    if (uses == 0) continue;
    if (uses > 1 || found) return nullptr;
    found = &op;
  }
  return found;
}

const OpNode* producer_of(const GraphModel& g, TensorId t) {
  for (const auto& [id, op] : g.ops) {
    if (std::find(op.outputs.begin(), op.outputs.end(), t) != op.outputs.end()) return &op;
  }
  return nullptr;
}

bool is_role(const GraphModel& g, TensorId t, TensorRole role) {
  auto it = g.tensors.find(t);
  return it != g.tensors.end() && it->second.role == role;
}

// --- identity removal -------------------------------------------------------

bool apply_identity(GraphModel& g, OpId id) {
  auto it = g.ops.find(id);
  if (it == g.ops.end()) return false;
  const OpNode op = it->second;
  const bool identity =
      (op.kind == OpKind::kResize && op.attrs.resize_scale == 1) ||
      op.kind == OpKind::kAdd || op.kind == OpKind::kConcat;
  if (!identity || op.inputs.size() != 1 || op.outputs.size() != 1) return false;
  const TensorId in = op.inputs[0];
  const TensorId out = op.outputs[0];
  if (in == out || !g.has_tensor(in) || !g.has_tensor(out)) return false;
  if (g.tensor(in).shape != g.tensor(out).shape) return false;

  if (!is_role(g, out, TensorRole::kGraphOutput)) {
    g.ops.erase(id);
    for (auto& [oid, other] : g.ops) replace_in(other.inputs, out, in);
    erase_tensor(g, out);
    return true;
  }
  // Graph output: keep its id and let the input's producer write it.
  if (!is_role(g, in, TensorRole::kIntermediate) || !producer_of(g, in)) return false;
  g.ops.erase(id);
  for (auto& [oid, other] : g.ops) {
    replace_in(other.inputs, in, out);
    replace_in(other.outputs, in, out);
  }
  erase_tensor(g, in);
  return true;
}

// --- pad merge --------------------------------------------------------------

std::optional<OpId> apply_merge_pad(GraphModel& g, OpId id) {
  auto it = g.ops.find(id);
  if (it == g.ops.end()) return std::nullopt;
  const OpNode pad = it->second;
  if (pad.kind != OpKind::kPad || pad.inputs.size() != 1 || pad.outputs.size() != 1) {
    return std::nullopt;
  }
  const TensorId out = pad.outputs[0];
  if (!is_role(g, out, TensorRole::kIntermediate)) return std::nullopt;
  const OpNode* consumer = sole_consumer(g, out);
  if (!consumer || !is_conv(*consumer) || consumer->inputs.empty() ||
      consumer->inputs[0] != out) {
    return std::nullopt;
  }
  OpNode& conv = g.ops.at(consumer->id);
  conv.attrs.padding += pad.attrs.padding;
  conv.inputs[0] = pad.inputs[0];
  g.ops.erase(id);
  erase_tensor(g, out);
  return conv.id;
}

// --- element-wise fusion ----------------------------------------------------

// Returns the conv op that absorbed `id`.
std::optional<OpId> apply_fuse(GraphModel& g, OpId id) {
  auto it = g.ops.find(id);
  if (it == g.ops.end()) return std::nullopt;
  const OpNode elem = it->second;
  if (elem.outputs.size() != 1) return std::nullopt;

  auto fusable_source = [&](TensorId t) -> OpNode* {
    if (!is_role(g, t, TensorRole::kIntermediate)) return nullptr;
    const OpNode* prod = producer_of(g, t);
    if (!prod || !is_conv(*prod) || prod->outputs.size() != 1) return nullptr;
    if (sole_consumer(g, t) != &g.ops.at(id)) return nullptr;
    if (prod->attrs.fused_activation != Activation::kNone) return nullptr;
    return &g.ops.at(prod->id);
  };

  if (elem.kind == OpKind::kRelu && elem.inputs.size() == 1) {
    OpNode* conv = fusable_source(elem.inputs[0]);
    if (!conv) return std::nullopt;
    const TensorId mid = elem.inputs[0];
    conv->attrs.fused_activation = Activation::kRelu;
    conv->outputs[0] = elem.outputs[0];
    const OpId target = conv->id;
    g.ops.erase(id);
    erase_tensor(g, mid);
    return target;
  }
  if (elem.kind == OpKind::kAdd && elem.inputs.size() == 2) {
    for (int side = 0; side < 2; ++side) {
      const TensorId mid = elem.inputs[side];
      const TensorId bias = elem.inputs[1 - side];
      OpNode* conv = fusable_source(mid);
      if (!conv || conv->inputs.size() != 2) continue;
      if (!is_role(g, bias, TensorRole::kWeight)) continue;
      const TensorShape& mid_shape = g.tensor(mid).shape;
      if (g.tensor(bias).shape != TensorShape{1, 1, 1, mid_shape.c}) continue;
      if (g.tensor(elem.outputs[0]).shape != mid_shape) continue;
      conv->inputs.push_back(bias);
      conv->outputs[0] = elem.outputs[0];
      const OpId target = conv->id;
      g.ops.erase(id);
      erase_tensor(g, mid);
      return target;
    }
  }
  return std::nullopt;
}

// Applies `step` to the lowest-id op it accepts, repeatedly, until no op is
// accepted.
using Step = std::function<std::optional<std::optional<OpId>>(GraphModel&, OpId)>;

PassResult run_to_fixpoint(const GraphModel& input, std::string_view name,
                           const Step& step) {
  PassResult result{input, {}};
  GraphModel& g = result.graph;
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<OpId> ids;
    for (const auto& [id, op] : g.ops) ids.push_back(id);
    for (OpId id : ids) {
      if (auto applied = step(g, id)) {
        result.log.entries.push_back({std::string(name), {id}, *applied});
        changed = true;
        break;
      }
    }
  }
  if (!result.log.entries.empty()) g = with_topo_order(std::move(g));
  return result;
}

std::optional<std::optional<OpId>> identity_step(GraphModel& g, OpId id) {
  if (apply_identity(g, id)) return std::optional<OpId>{};
  return std::nullopt;
}

std::optional<std::optional<OpId>> merge_step(GraphModel& g, OpId id) {
  if (auto into = apply_merge_pad(g, id)) return std::optional<OpId>{into};
  return std::nullopt;
}

std::optional<std::optional<OpId>> fuse_step(GraphModel& g, OpId id) {
  if (auto into = apply_fuse(g, id)) return std::optional<OpId>{into};
  return std::nullopt;
}

}  // namespace

PassResult remove_identity_ops(const GraphModel& g) {
  return run_to_fixpoint(g, kRemoveIdentityOps, identity_step);
}

PassResult merge_pad(const GraphModel& g) {
  return run_to_fixpoint(g, kMergePad, merge_step);
}

PassResult fuse_elementwise(const GraphModel& g) {
  return run_to_fixpoint(g, kFuseElementwise, fuse_step);
}

PassResult run_passes(const GraphModel& g, const std::vector<std::string>& names) {
  PassResult result{g, {}};
  for (const std::string& name : names) {
    PassResult step;
    if (name == kRemoveIdentityOps) {
      step = remove_identity_ops(result.graph);
    } else if (name == kMergePad) {
      step = merge_pad(result.graph);
    } else if (name == kFuseElementwise) {
      step = fuse_elementwise(result.graph);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown pass '" + name + "'");
    }
    result.graph = std::move(step.graph);
    result.log.append(step.log);
  }
  return result;
}

PassResult optimize(const GraphModel& g) {
  return run_passes(g, {std::string(kRemoveIdentityOps), std::string(kMergePad),
                        std::string(kFuseElementwise)});
}

GraphModel replay_log(const GraphModel& input, const RewriteLog& log) {
  GraphModel g = input;
  for (const RewriteEntry& e : log.entries) {
    if (e.removed_op_ids.size() != 1) {
      throw Error(ErrorCode::kInvalidArgument, "log entry must remove exactly one op");
    }
    const OpId id = e.removed_op_ids[0];
    std::optional<OpId> into;
    bool ok = false;
    if (e.pass_name == kRemoveIdentityOps) {
      ok = apply_identity(g, id);
    } else if (e.pass_name == kMergePad) {
      into = apply_merge_pad(g, id);
      ok = into.has_value();
    } else if (e.pass_name == kFuseElementwise) {
      into = apply_fuse(g, id);
      ok = into.has_value();
    }
    if (!ok || into != e.fused_into_op_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "log entry " + e.pass_name + " on op " +
                      std::to_string(to_int(id)) + " does not apply");
    }
  }
  if (!log.entries.empty()) g = with_topo_order(std::move(g));
  return g;
}

// --- partitioning -------------------------------------------------------------

int Partition::delegate_count() const {
  return static_cast<int>(std::count_if(segments.begin(), segments.end(), [](const Segment& s) {
    return s.backend == Backend::kGpuDelegate;
  }));
}

Partition partition_delegate(const GraphModel& g) {
  const std::vector<OpId> order = execution_order(g);
  const int n = static_cast<int>(order.size());
  std::map<OpId, int> index;
  for (int i = 0; i < n; ++i) index[order[i]] = i;

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };

  const auto prod = producers(g);
  for (int i = 0; i < n; ++i) {
    const OpNode& op = g.ops.at(order[i]);
    for (TensorId t : op.inputs) {
      auto p = prod.find(t);
      if (p == prod.end()) continue;
      const int j = index.at(p->second);
      if (g.ops.at(p->second).is_supported() != op.is_supported()) continue;
      const int a = find(i);
      const int b = find(j);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }

  // Roots are the smallest member index, so walking in order emits segments
  // sorted by their first op.
  std::map<int, Segment> by_root;
  for (int i = 0; i < n; ++i) {
    const OpNode& op = g.ops.at(order[i]);
    Segment& seg = by_root[find(i)];
    seg.backend = op.is_supported() ? Backend::kGpuDelegate : Backend::kCpuFallback;
    seg.op_ids.push_back(op.id);
  }
  Partition out;
  for (auto& [root, seg] : by_root) out.segments.push_back(std::move(seg));
  return out;
}

nlohmann::json partition_to_json(const Partition& p) {
  nlohmann::json segments = nlohmann::json::array();
  for (const Segment& s : p.segments) {
    nlohmann::json ops = nlohmann::json::array();
    for (OpId id : s.op_ids) ops.push_back(to_int(id));
    segments.push_back({{"backend", s.backend == Backend::kGpuDelegate ? "gpu_delegate"
                                                                       : "cpu_fallback"},
                        {"op_ids", std::move(ops)}});
  }
  return {{"segments", std::move(segments)}, {"delegate_count", p.delegate_count()}};
}

}  // namespace gpuplan
