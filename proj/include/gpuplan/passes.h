#ifndef GPUPLAN_PASSES_H_
#define GPUPLAN_PASSES_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gpuplan/graph.h"
#include "json.hpp"

namespace gpuplan {

inline constexpr std::string_view kRemoveIdentityOps = "remove_identity_ops";
inline constexpr std::string_view kMergePad = "merge_pad";
inline constexpr std::string_view kFuseElementwise = "fuse_elementwise";

struct RewriteEntry {
  std::string pass_name;
  std::vector<OpId> removed_op_ids;
  std::optional<OpId> fused_into_op_id;

  friend bool operator==(const RewriteEntry&, const RewriteEntry&) = default;
};

struct RewriteLog {
  std::vector<RewriteEntry> entries;

  void append(const RewriteLog& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  }
};

nlohmann::json log_to_json(const RewriteLog& log);
RewriteLog log_from_json(const nlohmann::json& j);

struct PassResult {
  GraphModel graph;
  RewriteLog log;
};

// Each pass rewrites to a fixpoint (so applying it twice equals applying it
// once) and returns a graph with a recomputed execution order. Passes never
// reorder arithmetic, so outputs stay bit-identical.

// Drops RESIZE with scale 1 and single-input ADD/CONCAT. Consumers are
// rewired to the op's input. When the output is a graph output, the input's
// producer writes the output tensor directly instead; identities between a
// graph input/weight and a graph output are kept.
PassResult remove_identity_ops(const GraphModel& g);

// Folds a PAD whose only consumer is the data input of a CONV_2D or
// DEPTHWISE_CONV into that op's padding.
PassResult merge_pad(const GraphModel& g);

// Folds RELU, or an ADD of a [1,1,1,C] weight bias, into the producing
// CONV_2D / DEPTHWISE_CONV when that op's output has no other consumer. Bias
// folds only into ops without a bias or activation; RELU only into ops
// without an activation.
PassResult fuse_elementwise(const GraphModel& g);

// Fixed order: remove_identity_ops, merge_pad, fuse_elementwise.
PassResult optimize(const GraphModel& g);

// Runs the named passes in the given order. Throws
// ErrorCode::kInvalidArgument for unknown names.
PassResult run_passes(const GraphModel& g, const std::vector<std::string>& names);

// Reapplies logged rewrites one by one; replay(original, log) reproduces
// the optimized graph. Throws ErrorCode::kInvalidArgument when an entry no
// longer applies.
GraphModel replay_log(const GraphModel& g, const RewriteLog& log);

enum class Backend { kGpuDelegate, kCpuFallback };

struct Segment {
  Backend backend = Backend::kGpuDelegate;
  std::vector<OpId> op_ids;  // in execution order

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Partition {
  std::vector<Segment> segments;

  int delegate_count() const;
};

// Segments are the weakly connected components of supported ops (linked by
// producer/consumer edges between two supported ops), and likewise for
// unsupported ops. Segments are ordered by their first op's execution index.
Partition partition_delegate(const GraphModel& g);

nlohmann::json partition_to_json(const Partition& p);

}  // namespace gpuplan

#endif  // GPUPLAN_PASSES_H_
