#include "gpuplan/cli.h"

#include <fstream>
#include <functional>
#include <sstream>

#include "CLI11.hpp"
#include "gpuplan/bench.h"
#include "gpuplan/cache_sim.h"
#include "gpuplan/dispatch.h"
#include "gpuplan/error.h"
#include "gpuplan/executor.h"
#include "gpuplan/graph_json.h"
#include "gpuplan/layout.h"
#include "gpuplan/memplan.h"
#include "gpuplan/passes.h"
#include "gpuplan/work_group.h"

namespace gpuplan {

namespace {

using json = nlohmann::json;
using Action = std::function<json()>;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "failed writing " + path);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  for (std::string part; std::getline(in, part, sep);) parts.push_back(part);
  return parts;
}

std::vector<int> parse_ints(const std::string& s, std::size_t count, const char* what) {
  std::vector<int> values;
  for (const std::string& p : split(s, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stoi(p, &used));
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "expected " + std::to_string(count) + " comma-separated integers");
    }
  }
  if (values.size() != count) {
    throw CLI::ValidationError(what, "expected " + std::to_string(count) + " comma-separated integers");
  }
  return values;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoull(s);
      return {v, v};
    }
    return {std::stoull(s.substr(0, dots)), std::stoull(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--seeds", "expected a..b");
  }
}

json inspect(const std::string& path) {
  const GraphModel g = load_graph(path);
  if (auto v = validate_graph(g); !v.empty()) {
    std::string detail;
    for (const GraphViolation& x : v) detail += (detail.empty() ? "" : "; ") + x.to_string();
    throw Error(ErrorCode::kInvalidGraph, detail);
  }
  json order = json::array();
  for (OpId id : execution_order(g)) order.push_back(to_int(id));
  return {{"ops", g.ops.size()},
          {"tensors", g.tensors.size()},
          {"intermediates", intermediate_tensors(g).size()},
          {"peak_live_bytes", peak_live_bytes(g)},
          {"execution_order", std::move(order)}};
}

GraphModel load_valid_graph(const std::string& path) {
  GraphModel g = load_graph(path);
  if (auto v = validate_graph(g); !v.empty()) {
    throw Error(ErrorCode::kInvalidGraph, v.front().to_string());
  }
  return g;
}

}  // namespace

int dispatch_command(const std::vector<std::string>& args, std::ostream& out,
                     std::ostream& err) {
  CLI::App app{"Planning and simulation toolkit for GPU-style inference", "gpuplan"};
  app.set_version_flag("--version", std::string("gpuplan ") + kVersion);
  app.require_subcommand(1);
  bool pretty = false;
  app.add_flag("--pretty", pretty, "Indent JSON output");

  Action action;
  std::string out_path;  // shared by subcommands that take --out

  // inspect
  std::string graph_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Validate a graph and summarize it");
  inspect_cmd->add_option("graph", graph_path, "Graph JSON")->required();
  inspect_cmd->callback([&] { action = [&] { return inspect(graph_path); }; });

  // optimize
  std::string pass_list;
  bool emit_log = false;
  auto* optimize_cmd = app.add_subcommand("optimize", "Run graph rewrite passes");
  optimize_cmd->add_option("graph", graph_path, "Graph JSON")->required();
  optimize_cmd->add_option("--passes", pass_list,
                           "Comma-separated passes (default: remove_identity_ops,merge_pad,"
                           "fuse_elementwise)");
  optimize_cmd->add_flag("--log", emit_log, "Emit {graph, log} with the rewrite log");
  optimize_cmd->add_option("--out", out_path, "Write the result here instead of stdout");
  optimize_cmd->callback([&] {
    action = [&] {
      const GraphModel g = load_valid_graph(graph_path);
      const PassResult r = pass_list.empty() ? optimize(g) : run_passes(g, split(pass_list, ','));
      json doc = graph_to_json(r.graph);
      if (emit_log) doc = {{"graph", std::move(doc)}, {"log", log_to_json(r.log)}};
      return doc;
    };
  });

  // partition
  auto* partition_cmd = app.add_subcommand("partition", "Split a graph into delegate segments");
  partition_cmd->add_option("graph", graph_path, "Graph JSON")->required();
  partition_cmd->callback([&] {
    action = [&] { return partition_to_json(partition_delegate(load_valid_graph(graph_path))); };
  });

  // pack
  std::string tensor_path;
  std::string pack_shape;
  bool dims_only = false;
  auto* pack_cmd = app.add_subcommand("pack", "Convert a dense HWC tensor to PHWC4");
  pack_cmd->add_option("tensor", tensor_path, "Tensor JSON {shape, data}");
  pack_cmd->add_option("--shape", pack_shape, "H,W,C (with --dims-only, instead of a file)");
  pack_cmd->add_flag("--dims-only", dims_only, "Print only the (rows, cols) 2D view");
  pack_cmd->callback([&] {
    if (tensor_path.empty() == pack_shape.empty()) {
      throw CLI::ValidationError("pack", "give either a tensor file or --shape");
    }
    if (!pack_shape.empty() && !dims_only) {
      throw CLI::ValidationError("--shape", "only valid with --dims-only");
    }
    action = [&] {
      DenseTensor t;
      if (!pack_shape.empty()) {
        const auto hwc = parse_ints(pack_shape, 3, "--shape");
        t.shape = {1, hwc[0], hwc[1], hwc[2]};
        if (!t.shape.is_valid()) throw Error(ErrorCode::kInvalidArgument, "dims must be >= 1");
      } else {
        const json j = read_json_file(tensor_path);
        try {
          t = {shape_from_json(j.at("shape")), j.at("data").get<std::vector<float>>()};
        } catch (const json::exception& e) {
          throw Error(ErrorCode::kParse, e.what());
        }
        if (static_cast<std::int64_t>(t.data.size()) != t.shape.element_count()) {
          throw Error(ErrorCode::kInvalidArgument, "data length does not match shape");
        }
      }
      const Phwc4Dims d = phwc4_dims(t.shape);
      if (dims_only) return json{{"rows", d.rows}, {"cols", d.cols}};
      const Phwc4Buffer buf = phwc4_pack(t);
      return json{{"shape", shape_to_json(buf.shape)},
                  {"slices", buf.slices()},
                  {"rows", d.rows},
                  {"cols", d.cols},
                  {"data", buf.data}};
    };
  });

  // plan-mem
  std::string strategy = "greedy";
  bool compare = false;
  int reuse_window = 0;
  auto* plan_cmd = app.add_subcommand("plan-mem", "Plan shared objects for intermediates");
  plan_cmd->add_option("graph", graph_path, "Graph JSON")->required();
  plan_cmd->add_option("--strategy", strategy, "naive|greedy|mincostflow|bruteforce")
      ->check(CLI::IsMember({"naive", "greedy", "mincostflow", "mcfp", "bruteforce"}));
  plan_cmd->add_flag("--compare", compare, "Run naive, greedy and mincostflow side by side");
  plan_cmd->add_option("--optimize-edges", reuse_window,
                       "Keep at most N reuse edges per tensor in the flow network")
      ->check(CLI::PositiveNumber);
  plan_cmd->callback([&] {
    action = [&] {
      const GraphModel g = load_valid_graph(graph_path);
      if (compare) {
        json report = comparison_to_json(compare_strategies(g, graph_path));
        if (usage_records(g).size() <= kBruteForceLimit) {
          report["optimal"] = brute_force_plan(g).total_bytes;
        }
        return report;
      }
      const Strategy s = *parse_strategy(strategy);
      if (s == Strategy::kMinCostFlow && reuse_window > 0) {
        FlowNetworkOptions options;
        options.reuse_window = reuse_window;
        return plan_to_json(plan_mincostflow(g, options));
      }
      return plan_to_json(plan_memory(g, s));
    };
  });

  // tune-wg
  std::string cost = "synthetic";
  std::string csv_path;
  int trials = 8;
  std::uint64_t seed = 1;
  double noise = 0.1;
  bool exhaustive = false;
  std::string preset_gpu;
  std::string op_kind = "conv_2d";
  auto* tune_cmd = app.add_subcommand("tune-wg", "Choose a work group size");
  tune_cmd->add_option("--cost", cost, "synthetic|csv")
      ->check(CLI::IsMember({"synthetic", "csv"}));
  tune_cmd->add_option("--csv", csv_path, "Measurements as x,y,z,latency_ms rows");
  tune_cmd->add_option("--trials", trials, "Samples averaged per lattice point")
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--seed", seed, "Seed of the synthetic noise");
  tune_cmd->add_option("--noise", noise, "Synthetic multiplicative noise amplitude")
      ->check(CLI::Range(0.0, 0.99));
  tune_cmd->add_flag("--exhaustive", exhaustive, "Measure all 27 lattice points");
  tune_cmd->add_option("--preset", preset_gpu, "Look up a known GPU (e.g. \"Adreno 630\")");
  tune_cmd->add_option("--op", op_kind, "conv_2d|depthwise_conv")
      ->check(CLI::IsMember({"conv_2d", "depthwise_conv"}));
  tune_cmd->callback([&] {
    if (cost == "csv" && csv_path.empty()) {
      throw CLI::ValidationError("--csv", "required with --cost csv");
    }
    action = [&] {
      const ConvKind kind =
          op_kind == "conv_2d" ? ConvKind::kConv2D : ConvKind::kDepthwiseConv;
      auto wg_json = [](const WorkGroupConfig& wg) {
        return json{{"x", wg.x}, {"y", wg.y}, {"z", wg.z}};
      };
      if (!preset_gpu.empty()) {
        const WorkGroupConfig wg = preset_work_group(preset_gpu, kind);
        return json{{"source", "preset"}, {"gpu", preset_gpu}, {"op", op_kind},
                    {"work_group", wg_json(wg)}};
      }
      LatencyMeasure measure;
      if (cost == "csv") {
        std::ifstream f(csv_path);
        if (!f) throw Error(ErrorCode::kIo, "cannot open " + csv_path);
        measure = CsvMeasure::parse(f);
      } else {
        measure = NoisyMeasure(synthetic_latency_ms, noise, seed);
      }
      ConvConfig cfg;
      cfg.kind = kind;
      const TuningResult r = exhaustive ? tune_work_group_exhaustive(measure, cfg, trials)
                                        : tune_work_group(measure, cfg, trials);
      return json{{"source", cost},
                  {"search", exhaustive ? "exhaustive" : "coordinate_descent"},
                  {"trials", trials},
                  {"work_group", wg_json(r.best)},
                  {"estimate_ms", r.estimate_ms},
                  {"points_measured", r.points_measured}};
    };
  });

  // simulate-cache
  std::string layout = "phwc4";
  std::string shape = "8,8,8";
  std::string wg_text = "4,4,4";
  CacheModel model;
  int out_channels = 0;
  int stride = 1;
  auto* cache_cmd = app.add_subcommand("simulate-cache",
                                       "Replay a 1x1 conv's first loads through an LRU cache");
  cache_cmd->add_option("--layout", layout, "phwc4|hwc")->check(CLI::IsMember({"phwc4", "hwc"}));
  cache_cmd->add_option("--line-bytes", model.line_bytes, "Cache line size")
      ->check(CLI::PositiveNumber);
  cache_cmd->add_option("--capacity-lines", model.capacity_lines, "Lines held (0 = unbounded)")
      ->check(CLI::NonNegativeNumber);
  cache_cmd->add_option("--load-bytes", model.load_bytes, "Bytes per thread load")
      ->check(CLI::PositiveNumber);
  cache_cmd->add_option("--shape", shape, "Input H,W,C");
  cache_cmd->add_option("--out-channels", out_channels, "Output channels (default: C)")
      ->check(CLI::PositiveNumber);
  cache_cmd->add_option("--stride", stride, "Convolution stride")->check(CLI::PositiveNumber);
  cache_cmd->add_option("--wg", wg_text, "Work group x,y,z");
  cache_cmd->callback([&] {
    const auto hwc = parse_ints(shape, 3, "--shape");
    const auto wg = parse_ints(wg_text, 3, "--wg");
    action = [&, hwc, wg] {
      ConvConfig cfg;
      cfg.kernel = 1;
      cfg.stride = stride;
      cfg.in_shape = {1, hwc[0], hwc[1], hwc[2]};
      cfg.out_shape = {1, (hwc[0] - 1) / stride + 1, (hwc[1] - 1) / stride + 1,
                       out_channels > 0 ? out_channels : hwc[2]};
      if (!cfg.in_shape.is_valid()) throw Error(ErrorCode::kInvalidArgument, "dims must be >= 1");
      const WorkGroupConfig group{wg[0], wg[1], wg[2]};
      if (group.x < 1 || group.y < 1 || group.z < 1) {
        throw Error(ErrorCode::kInvalidArgument, "work group dims must be >= 1");
      }
      const MemoryLayout l = layout == "phwc4" ? MemoryLayout::kPhwc4 : MemoryLayout::kHwc;
      json r = report_to_json(simulate_cache(l, cfg, model, group));
      r["layout"] = layout_name(l);
      return r;
    };
  });

  // run
  std::string inputs_path;
  std::string plan_name = "greedy";
  bool check_pads = false;
  auto* run_cmd = app.add_subcommand("run", "Execute a graph with the reference executor");
  run_cmd->add_option("--graph", graph_path, "Graph JSON")->required();
  run_cmd->add_option("--inputs", inputs_path, "Input tensors JSON")->required();
  run_cmd->add_option("--plan", plan_name, "naive|greedy|mincostflow|bruteforce")
      ->check(CLI::IsMember({"naive", "greedy", "mincostflow", "mcfp", "bruteforce"}));
  run_cmd->add_flag("--check-pads", check_pads, "Assert zero padding lanes after every op");
  run_cmd->callback([&] {
    action = [&] {
      const GraphModel g = load_graph(graph_path);
      const TensorMap inputs = tensors_from_json(read_json_file(inputs_path));
      ExecutionOptions options;
      options.check_pads = check_pads;
      const MemoryPlan plan = plan_memory(g, *parse_strategy(plan_name));
      return tensors_to_json(run_graph(g, plan, inputs, options));
    };
  });

  // bench
  std::string suite = "random";
  std::string seeds = "1..100";
  auto* bench_cmd = app.add_subcommand("bench", "Compare planners over a graph suite");
  bench_cmd->add_option("--suite", suite, "random|mobilenet")
      ->check(CLI::IsMember({"random", "mobilenet"}));
  bench_cmd->add_option("--seeds", seeds, "Seed range a..b for the random suite");
  bench_cmd->add_option("--out", out_path, "Write the report here instead of stdout");
  bench_cmd->callback([&] {
    const auto [first, last] = parse_seed_range(seeds);
    if (last < first) throw CLI::ValidationError("--seeds", "empty range");
    action = [&, first, last] {
      return run_bench(suite == "mobilenet" ? BenchSuite::kMobilenet : BenchSuite::kRandom,
                       first, last);
    };
  });

  std::vector<const char*> argv{"gpuplan"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e, out, err);
    return status == 0 ? kExitOk : kExitUsage;
  }

  try {
    const json result = action();
    const std::string text = result.dump(pretty ? 2 : -1) + "\n";
    if (out_path.empty()) {
      out << text;
    } else {
      write_file(out_path, text);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << json{{"error", error_code_name(e.code())}, {"detail", e.what()}}.dump() << "\n";
  } catch (const json::exception& e) {
    err << json{{"error", error_code_name(ErrorCode::kParse)}, {"detail", e.what()}}.dump()
        << "\n";
  }
  return kExitDomainError;
}

}  // namespace gpuplan
