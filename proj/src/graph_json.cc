#include "gpuplan/graph_json.h"

#include <fstream>

#include "gpuplan/error.h"

namespace gpuplan {

using nlohmann::json;

std::string_view role_name(TensorRole role) {
  switch (role) {
    case TensorRole::kGraphInput: return "graph_input";
    case TensorRole::kGraphOutput: return "graph_output";
    case TensorRole::kIntermediate: return "intermediate";
    case TensorRole::kWeight: return "weight";
  }
  return "intermediate";
}

TensorRole parse_role(std::string_view name) {
  if (name == "graph_input") return TensorRole::kGraphInput;
  if (name == "graph_output") return TensorRole::kGraphOutput;
  if (name == "intermediate") return TensorRole::kIntermediate;
  if (name == "weight") return TensorRole::kWeight;
  throw Error(ErrorCode::kParse, "unknown tensor role '" + std::string(name) + "'");
}

json shape_to_json(const TensorShape& s) { return json::array({s.b, s.h, s.w, s.c}); }

TensorShape shape_from_json(const json& j) {
  if (!j.is_array() || (j.size() != 4 && j.size() != 3)) {
    throw Error(ErrorCode::kParse, "shape must be [b,h,w,c] or [h,w,c]");
  }
  std::vector<int> d = j.get<std::vector<int>>();
  if (d.size() == 3) d.insert(d.begin(), 1);
  return {d[0], d[1], d[2], d[3]};
}

namespace {

json padding_to_json(const Padding& p) {
  return json::array({p.top, p.bottom, p.left, p.right});
}

Padding padding_from_json(const json& j) {
  if (j.is_number_integer()) {
    const int v = j.get<int>();
    return {v, v, v, v};
  }
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::kParse, "padding must be an integer or [top,bottom,left,right]");
  }
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json attrs_to_json(const OpNode& op) {
  json a = json::object();
  const OpAttrs& at = op.attrs;
  switch (op.kind) {
    case OpKind::kConv2D:
    case OpKind::kDepthwiseConv:
      a["stride"] = json::array({at.stride[0], at.stride[1]});
      a["padding"] = padding_to_json(at.padding);
      a["fused_activation"] = at.fused_activation == Activation::kRelu ? "RELU" : "NONE";
      break;
    case OpKind::kPad:
      a["padding"] = padding_to_json(at.padding);
      break;
    case OpKind::kResize:
      a["scale"] = at.resize_scale;
      break;
    case OpKind::kCustom:
      a["supported"] = at.supported;
      if (!at.custom_name.empty()) a["name"] = at.custom_name;
      break;
    default:
      break;
  }
  return a;
}

OpAttrs attrs_from_json(OpKind kind, const json& a) {
  OpAttrs at;
  if (a.is_null()) {
    if (kind == OpKind::kCustom) at.supported = false;
    return at;
  }
  if (!a.is_object()) throw Error(ErrorCode::kParse, "attrs must be an object");
  if (a.contains("stride")) {
    const json& s = a["stride"];
    if (s.is_number_integer()) {
      at.stride = {s.get<int>(), s.get<int>()};
    } else {
      at.stride = {s.at(0).get<int>(), s.at(1).get<int>()};
    }
  }
  if (a.contains("padding")) at.padding = padding_from_json(a["padding"]);
  if (a.contains("fused_activation")) {
    const std::string act = a["fused_activation"].get<std::string>();
    if (act == "RELU") {
      at.fused_activation = Activation::kRelu;
    } else if (act != "NONE") {
      throw Error(ErrorCode::kParse, "unknown fused_activation '" + act + "'");
    }
  }
  if (a.contains("scale")) at.resize_scale = a["scale"].get<int>();
  if (kind == OpKind::kCustom) {
    at.supported = a.value("supported", false);
    at.custom_name = a.value("name", std::string{});
  }
  return at;
}

}  // namespace

json graph_to_json(const GraphModel& g) {
  json tensors = json::array();
  for (const auto& [id, t] : g.tensors) {
    json jt = {{"id", to_int(id)},
               {"shape", shape_to_json(t.shape)},
               {"role", role_name(t.role)}};
    if (t.element_bytes != kDefaultElementBytes) jt["element_bytes"] = t.element_bytes;
    if (auto it = g.constants.find(id); it != g.constants.end()) jt["data"] = it->second;
    tensors.push_back(std::move(jt));
  }
  json ops = json::array();
  for (const auto& [id, op] : g.ops) {
    json ins = json::array();
    for (TensorId t : op.inputs) ins.push_back(to_int(t));
    json outs = json::array();
    for (TensorId t : op.outputs) outs.push_back(to_int(t));
    ops.push_back({{"id", to_int(id)},
                   {"kind", op_kind_name(op.kind)},
                   {"inputs", std::move(ins)},
                   {"outputs", std::move(outs)},
                   {"attrs", attrs_to_json(op)}});
  }
  json j = {{"tensors", std::move(tensors)}, {"ops", std::move(ops)}};
  if (!g.execution_order.empty()) {
    json order = json::array();
    for (OpId id : g.execution_order) order.push_back(to_int(id));
    j["execution_order"] = std::move(order);
  }
  return j;
}

GraphModel graph_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("tensors") || !j.contains("ops")) {
      throw Error(ErrorCode::kParse, "graph needs 'tensors' and 'ops' arrays");
    }
    GraphModel g;
    for (const json& jt : j.at("tensors")) {
      TensorSpec t;
      t.id = TensorId{jt.at("id").get<int>()};
      t.shape = shape_from_json(jt.at("shape"));
      t.role = parse_role(jt.at("role").get<std::string>());
      t.element_bytes = jt.value("element_bytes", kDefaultElementBytes);
      if (!g.tensors.emplace(t.id, t).second) {
        throw Error(ErrorCode::kInvalidGraph,
                    "duplicate tensor id " + std::to_string(to_int(t.id)));
      }
      if (jt.contains("data")) {
        auto data = jt["data"].get<std::vector<float>>();
        if (static_cast<std::int64_t>(data.size()) != t.shape.element_count()) {
          throw Error(ErrorCode::kInvalidGraph,
                      "tensor " + std::to_string(to_int(t.id)) +
                          " data length does not match its shape");
        }
        g.constants.emplace(t.id, std::move(data));
      }
    }
    for (const json& jo : j.at("ops")) {
      OpNode op;
      op.id = OpId{jo.at("id").get<int>()};
      const std::string kind = jo.at("kind").get<std::string>();
      op.kind = parse_op_kind(kind);
      for (int t : jo.at("inputs").get<std::vector<int>>()) op.inputs.push_back(TensorId{t});
      for (int t : jo.at("outputs").get<std::vector<int>>()) op.outputs.push_back(TensorId{t});
      op.attrs = attrs_from_json(op.kind, jo.contains("attrs") ? jo["attrs"] : json());
      if (op.kind == OpKind::kCustom && kind != "CUSTOM") {
        op.attrs.custom_name = kind;
        op.attrs.supported = false;
      }
      if (!g.ops.emplace(op.id, op).second) {
        throw Error(ErrorCode::kInvalidGraph,
                    "duplicate op id " + std::to_string(to_int(op.id)));
      }
    }
    if (j.contains("execution_order")) {
      for (int id : j["execution_order"].get<std::vector<int>>()) {
        g.execution_order.push_back(OpId{id});
      }
    }
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

GraphModel load_graph(const std::string& path) {
  return graph_from_json(read_json_file(path));
}

}  // namespace gpuplan
