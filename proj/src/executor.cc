#include "gpuplan/executor.h"

#include <algorithm>
#include <limits>

#include "gpuplan/error.h"
#include "gpuplan/graph_json.h"

namespace gpuplan {

namespace {

constexpr int kForever = std::numeric_limits<int>::max();

std::string tid(TensorId t) { return std::to_string(to_int(t)); }

// Shared by RELU and fused activations so both paths round identically.
inline float relu(float v) { return v > 0.0f ? v : 0.0f; }

}  // namespace

ExecutionContext::ExecutionContext(const GraphModel& g, const MemoryPlan& plan,
                                   ExecutionOptions options)
    : graph_(g), options_(options) {
  for (const LivenessInterval& iv : liveness(g)) last_use_[iv.tensor] = iv.last_use;

  for (const SharedObject& obj : plan.objects) {
    std::int64_t elements = 0;
    for (TensorId t : obj.tensors) {
      elements = std::max(elements, phwc4_element_count(g.tensor(t).shape));
      bindings_[t] = {static_cast<int>(buffers_.size())};
    }
    buffers_.emplace_back(static_cast<std::size_t>(elements), 0.0f);
  }
  for (const auto& [id, spec] : g.tensors) {
    if (bindings_.contains(id)) continue;
    if (spec.role == TensorRole::kIntermediate) {
      throw Error(ErrorCode::kPlanViolation, "intermediate " + tid(id) + " has no object");
    }
    if (spec.role == TensorRole::kWeight && !g.constants.contains(id)) continue;
    bindings_[id] = {static_cast<int>(buffers_.size())};
    buffers_.emplace_back(static_cast<std::size_t>(phwc4_element_count(spec.shape)), 0.0f);
  }
  owner_.assign(buffers_.size(), std::nullopt);

  // Weights double as data operands (e.g. a bias ADD), so keep a packed copy.
  for (const auto& [id, values] : g.constants) {
    if (!bindings_.contains(id)) continue;
    const TensorSpec& spec = g.tensor(id);
    phwc4_pack_into(DenseTensor{spec.shape, values}, write(id));
  }
}

int ExecutionContext::last_use(TensorId t) const {
  auto it = last_use_.find(t);
  return it == last_use_.end() ? kForever : it->second;
}

std::span<float> ExecutionContext::write(TensorId t) {
  auto it = bindings_.find(t);
  if (it == bindings_.end()) {
    throw Error(ErrorCode::kInvalidGraph, "tensor " + tid(t) + " has no storage");
  }
  const int b = it->second.buffer;
  if (options_.check_live_windows && owner_[b] && *owner_[b] != t &&
      last_use(*owner_[b]) >= step_) {
    throw Error(ErrorCode::kPlanViolation,
                "writing tensor " + tid(t) + " at step " + std::to_string(step_) +
                    " clobbers live tensor " + tid(*owner_[b]));
  }
  owner_[b] = t;
  const auto count = static_cast<std::size_t>(phwc4_element_count(graph_.tensor(t).shape));
  std::span<float> view(buffers_[b].data(), count);
  std::fill(view.begin(), view.end(), 0.0f);
  return view;
}

std::span<const float> ExecutionContext::read(TensorId t) const {
  auto it = bindings_.find(t);
  if (it == bindings_.end()) {
    throw Error(ErrorCode::kInvalidGraph,
                "tensor " + tid(t) + " has no storage (weight without data?)");
  }
  const int b = it->second.buffer;
  if (options_.check_live_windows && owner_[b] != t) {
    throw Error(ErrorCode::kPlanViolation,
                "tensor " + tid(t) + " read at step " + std::to_string(step_) +
                    " after its object was reused");
  }
  const auto count = static_cast<std::size_t>(phwc4_element_count(graph_.tensor(t).shape));
  return {buffers_[b].data(), count};
}

const std::vector<float>& ExecutionContext::constant(TensorId t) const {
  auto it = graph_.constants.find(t);
  if (it == graph_.constants.end()) {
    throw Error(ErrorCode::kInvalidGraph, "weight tensor " + tid(t) + " has no data");
  }
  return it->second;
}

void ExecutionContext::check_pads() const {
  for (const auto& [t, binding] : bindings_) {
    if (owner_[binding.buffer] != t) continue;
    const TensorShape& shape = graph_.tensor(t).shape;
    const auto count = static_cast<std::size_t>(phwc4_element_count(shape));
    if (!phwc4_pads_are_zero(shape, {buffers_[binding.buffer].data(), count})) {
      throw Error(ErrorCode::kCorruptBuffer,
                  "tensor " + tid(t) + " has a non-zero padding lane after step " +
                      std::to_string(step_));
    }
  }
}

// --- kernels ------------------------------------------------------------------

namespace {

const TensorShape& shape_of(const ExecutionContext& ctx, TensorId t) {
  return ctx.graph().tensor(t).shape;
}

void expect_shape(const ExecutionContext& ctx, const OpNode& node) {
  if (node.kind == OpKind::kReshape || node.kind == OpKind::kCustom) return;
  std::string why;
  auto inferred = infer_output_shape(ctx.graph(), node, &why);
  if (!inferred || node.outputs.size() != 1 || *inferred != shape_of(ctx, node.outputs[0])) {
    throw Error(ErrorCode::kInvalidGraph,
                "shape mismatch at op " + std::to_string(to_int(node.id)) +
                    (why.empty() ? "" : ": " + why));
  }
}

// Cross-correlation with zero padding; accumulation order (kh, kw, c).
void conv2d(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& is = shape_of(ctx, node.inputs[0]);
  const TensorShape& ks = shape_of(ctx, node.inputs[1]);
  const TensorShape& os = shape_of(ctx, node.outputs[0]);
  const auto in = ctx.read(node.inputs[0]);
  const std::vector<float>& weights = ctx.constant(node.inputs[1]);
  const std::vector<float>* bias =
      node.inputs.size() > 2 ? &ctx.constant(node.inputs[2]) : nullptr;
  const auto out = ctx.write(node.outputs[0]);
  const auto [sh, sw] = node.attrs.stride;
  const Padding& pad = node.attrs.padding;
  const bool fuse_relu = node.attrs.fused_activation == Activation::kRelu;

  for (int b = 0; b < os.b; ++b) {
    for (int oh = 0; oh < os.h; ++oh) {
      for (int ow = 0; ow < os.w; ++ow) {
        for (int oc = 0; oc < os.c; ++oc) {
          float acc = 0.0f;
          const float* wk = weights.data() + std::size_t(oc) * ks.h * ks.w * ks.c;
          for (int kh = 0; kh < ks.h; ++kh) {
            const int ih = oh * sh - pad.top + kh;
            for (int kw = 0; kw < ks.w; ++kw) {
              const int iw = ow * sw - pad.left + kw;
              const bool inside = ih >= 0 && ih < is.h && iw >= 0 && iw < is.w;
              for (int ic = 0; ic < ks.c; ++ic) {
                const float v = inside ? in[phwc4_offset(is, b, ih, iw, ic)] : 0.0f;
                acc += v * *wk++;
              }
            }
          }
          if (bias) acc += (*bias)[oc];
          if (fuse_relu) acc = relu(acc);
          out[phwc4_offset(os, b, oh, ow, oc)] = acc;
        }
      }
    }
  }
}

void depthwise_conv(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& is = shape_of(ctx, node.inputs[0]);
  const TensorShape& ks = shape_of(ctx, node.inputs[1]);
  const TensorShape& os = shape_of(ctx, node.outputs[0]);
  const auto in = ctx.read(node.inputs[0]);
  const std::vector<float>& weights = ctx.constant(node.inputs[1]);
  const std::vector<float>* bias =
      node.inputs.size() > 2 ? &ctx.constant(node.inputs[2]) : nullptr;
  const auto out = ctx.write(node.outputs[0]);
  const auto [sh, sw] = node.attrs.stride;
  const Padding& pad = node.attrs.padding;
  const bool fuse_relu = node.attrs.fused_activation == Activation::kRelu;

  for (int b = 0; b < os.b; ++b) {
    for (int oh = 0; oh < os.h; ++oh) {
      for (int ow = 0; ow < os.w; ++ow) {
        for (int c = 0; c < os.c; ++c) {
          float acc = 0.0f;
          for (int kh = 0; kh < ks.h; ++kh) {
            const int ih = oh * sh - pad.top + kh;
            for (int kw = 0; kw < ks.w; ++kw) {
              const int iw = ow * sw - pad.left + kw;
              const bool inside = ih >= 0 && ih < is.h && iw >= 0 && iw < is.w;
              const float v = inside ? in[phwc4_offset(is, b, ih, iw, c)] : 0.0f;
              acc += v * weights[(std::size_t(kh) * ks.w + kw) * ks.c + c];
            }
          }
          if (bias) acc += (*bias)[c];
          if (fuse_relu) acc = relu(acc);
          out[phwc4_offset(os, b, oh, ow, c)] = acc;
        }
      }
    }
  }
}

// Left-to-right sum; [1,1,1,C] operands broadcast over B, H and W.
void add(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& os = shape_of(ctx, node.outputs[0]);
  std::vector<std::span<const float>> ins;
  std::vector<TensorShape> shapes;
  for (TensorId t : node.inputs) {
    ins.push_back(ctx.read(t));
    shapes.push_back(shape_of(ctx, t));
  }
  const auto out = ctx.write(node.outputs[0]);
  for (int b = 0; b < os.b; ++b) {
    for (int h = 0; h < os.h; ++h) {
      for (int w = 0; w < os.w; ++w) {
        for (int c = 0; c < os.c; ++c) {
          float acc = 0.0f;
          for (std::size_t k = 0; k < ins.size(); ++k) {
            const TensorShape& s = shapes[k];
            const bool bc = s.b == 1 && s.h == 1 && s.w == 1;
            const float v = bc ? ins[k][phwc4_offset(s, 0, 0, 0, c)]
                               : ins[k][phwc4_offset(s, b, h, w, c)];
            acc = k == 0 ? v : acc + v;
          }
          out[phwc4_offset(os, b, h, w, c)] = acc;
        }
      }
    }
  }
}

void concat(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& os = shape_of(ctx, node.outputs[0]);
  std::vector<std::span<const float>> ins;
  for (TensorId t : node.inputs) ins.push_back(ctx.read(t));
  const auto out = ctx.write(node.outputs[0]);
  int base = 0;
  for (std::size_t k = 0; k < ins.size(); ++k) {
    const TensorShape& s = shape_of(ctx, node.inputs[k]);
    for (int b = 0; b < s.b; ++b) {
      for (int h = 0; h < s.h; ++h) {
        for (int w = 0; w < s.w; ++w) {
          for (int c = 0; c < s.c; ++c) {
            out[phwc4_offset(os, b, h, w, base + c)] = ins[k][phwc4_offset(s, b, h, w, c)];
          }
        }
      }
    }
    base += s.c;
  }
}

template <typename Fn>
void for_each_cell(const TensorShape& s, Fn&& fn) {
  for (int b = 0; b < s.b; ++b)
    for (int h = 0; h < s.h; ++h)
      for (int w = 0; w < s.w; ++w)
        for (int c = 0; c < s.c; ++c) fn(b, h, w, c);
}

void relu_op(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& s = shape_of(ctx, node.inputs[0]);
  const auto in = ctx.read(node.inputs[0]);
  const auto out = ctx.write(node.outputs[0]);
  for_each_cell(s, [&](int b, int h, int w, int c) {
    const auto i = phwc4_offset(s, b, h, w, c);
    out[i] = relu(in[i]);
  });
}

void pad_op(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& is = shape_of(ctx, node.inputs[0]);
  const TensorShape& os = shape_of(ctx, node.outputs[0]);
  const auto in = ctx.read(node.inputs[0]);
  const auto out = ctx.write(node.outputs[0]);
  const Padding& p = node.attrs.padding;
  for_each_cell(is, [&](int b, int h, int w, int c) {
    out[phwc4_offset(os, b, h + p.top, w + p.left, c)] = in[phwc4_offset(is, b, h, w, c)];
  });
}

void resize_op(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& is = shape_of(ctx, node.inputs[0]);
  const TensorShape& os = shape_of(ctx, node.outputs[0]);
  const int scale = node.attrs.resize_scale;
  const auto in = ctx.read(node.inputs[0]);
  const auto out = ctx.write(node.outputs[0]);
  for_each_cell(os, [&](int b, int h, int w, int c) {
    out[phwc4_offset(os, b, h, w, c)] = in[phwc4_offset(is, b, h / scale, w / scale, c)];
  });
}

// Logical only: the dense element order is kept, so repack.
void reshape_op(const OpNode& node, ExecutionContext& ctx) {
  const TensorShape& is = shape_of(ctx, node.inputs[0]);
  const TensorShape& os = shape_of(ctx, node.outputs[0]);
  if (is.element_count() != os.element_count()) {
    throw Error(ErrorCode::kInvalidGraph, "RESHAPE changes the element count");
  }
  DenseTensor dense = phwc4_unpack_from(is, ctx.read(node.inputs[0]));
  dense.shape = os;
  phwc4_pack_into(dense, ctx.write(node.outputs[0]));
}

}  // namespace

void run_op(const OpNode& node, ExecutionContext& ctx) {
  expect_shape(ctx, node);
  switch (node.kind) {
    case OpKind::kConv2D: conv2d(node, ctx); break;
    case OpKind::kDepthwiseConv: depthwise_conv(node, ctx); break;
    case OpKind::kAdd: add(node, ctx); break;
    case OpKind::kConcat: concat(node, ctx); break;
    case OpKind::kRelu: relu_op(node, ctx); break;
    case OpKind::kPad: pad_op(node, ctx); break;
    case OpKind::kResize: resize_op(node, ctx); break;
    case OpKind::kReshape: reshape_op(node, ctx); break;
    case OpKind::kCustom:
      throw Error(ErrorCode::kUnsupported,
                  "CUSTOM op " + std::to_string(to_int(node.id)) +
                      " cannot run in the reference executor");
  }
}

TensorMap run_graph(const GraphModel& g, const MemoryPlan& plan, const TensorMap& inputs,
                    const ExecutionOptions& options) {
  if (auto v = validate_graph(g); !v.empty()) {
    throw Error(ErrorCode::kInvalidGraph, "invalid graph: " + v.front().to_string() +
                                              (v.front().detail.empty() ? "" : " " + v.front().detail));
  }
  if (auto v = verify_plan(g, plan); !v.empty()) {
    throw Error(ErrorCode::kPlanViolation, "invalid plan: " + v.front().to_string());
  }
  ExecutionContext ctx(g, plan, options);

  ctx.set_step(-1);
  for (const auto& [id, spec] : g.tensors) {
    if (spec.role != TensorRole::kGraphInput) continue;
    auto it = inputs.find(id);
    if (it == inputs.end()) {
      throw Error(ErrorCode::kInvalidArgument, "missing graph input " + tid(id));
    }
    if (it->second.shape != spec.shape ||
        static_cast<std::int64_t>(it->second.data.size()) != spec.shape.element_count()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "input " + tid(id) + " does not match shape " + to_string(spec.shape));
    }
    phwc4_pack_into(it->second, ctx.write(id));
  }

  const std::vector<OpId> order = execution_order(g);
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    ctx.set_step(i);
    run_op(g.op(order[i]), ctx);
    if (options.check_pads) ctx.check_pads();
  }

  TensorMap outputs;
  for (const auto& [id, spec] : g.tensors) {
    if (spec.role != TensorRole::kGraphOutput) continue;
    outputs.emplace(id, phwc4_unpack_from(spec.shape, ctx.read(id)));
  }
  return outputs;
}

nlohmann::json tensors_to_json(const TensorMap& tensors) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, t] : tensors) {
    arr.push_back({{"id", to_int(id)}, {"shape", shape_to_json(t.shape)}, {"data", t.data}});
  }
  return {{"tensors", std::move(arr)}};
}

TensorMap tensors_from_json(const nlohmann::json& j) {
  try {
    TensorMap out;
    for (const auto& jt : j.at("tensors")) {
      DenseTensor t{shape_from_json(jt.at("shape")), jt.at("data").get<std::vector<float>>()};
      if (static_cast<std::int64_t>(t.data.size()) != t.shape.element_count()) {
        throw Error(ErrorCode::kInvalidArgument, "tensor data length does not match its shape");
      }
      out.emplace(TensorId{jt.at("id").get<int>()}, std::move(t));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace gpuplan
