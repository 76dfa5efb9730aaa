#ifndef GPUPLAN_GRAPH_JSON_H_
#define GPUPLAN_GRAPH_JSON_H_

#include <string>

#include "gpuplan/graph.h"
#include "json.hpp"

namespace gpuplan {

// Graph interchange format:
//   {"tensors": [{"id", "shape": [b,h,w,c], "role", "element_bytes"?, "data"?}],
//    "ops": [{"id", "kind", "inputs", "outputs", "attrs"}],
//    "execution_order"?: [op ids]}
// role is one of graph_input, graph_output, intermediate, weight. Unknown
// kinds parse as CUSTOM with supported=false. A 3-element shape is read as
// [h,w,c] with b=1.
nlohmann::json graph_to_json(const GraphModel& g);
GraphModel graph_from_json(const nlohmann::json& j);

GraphModel load_graph(const std::string& path);

std::string_view role_name(TensorRole role);
TensorRole parse_role(std::string_view name);

nlohmann::json shape_to_json(const TensorShape& s);
TensorShape shape_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);

}  // namespace gpuplan

#endif  // GPUPLAN_GRAPH_JSON_H_
