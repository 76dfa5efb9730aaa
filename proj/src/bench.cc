#include "gpuplan/bench.h"

#include <algorithm>
#include <random>

#include "gpuplan/error.h"

namespace gpuplan {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [lo, hi]; the modulo bias is irrelevant at these ranges.
  int uniform(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  // Multiples of 2^-23 in [-1, 1), exact in float.
  float value() {
    return static_cast<float>(static_cast<int>(engine_() >> 40) - (1 << 23)) * 0x1.0p-23f;
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

 private:
  std::mt19937_64 engine_;
};

class Builder {
 public:
  explicit Builder(Rng& rng) : rng_(rng) {}

  TensorId tensor(const TensorShape& shape, TensorRole role) {
    const TensorId id{next_tensor_++};
    g_.tensors[id] = TensorSpec{id, shape, role};
    return id;
  }

  TensorId weight(const TensorShape& shape, bool with_data) {
    const TensorId id = tensor(shape, TensorRole::kWeight);
    if (with_data) {
      std::vector<float> data(static_cast<std::size_t>(shape.element_count()));
      for (float& v : data) v = rng_.value();
      g_.constants[id] = std::move(data);
    }
    return id;
  }

  OpId op(OpKind kind, std::vector<TensorId> inputs, std::vector<TensorId> outputs,
          OpAttrs attrs = {}) {
    const OpId id{next_op_++};
    g_.ops[id] = OpNode{id, kind, std::move(inputs), std::move(outputs), std::move(attrs)};
    return id;
  }

  const TensorShape& shape(TensorId t) const { return g_.tensor(t).shape; }
  GraphModel& graph() { return g_; }

 private:
  Rng& rng_;
  GraphModel g_;
  int next_tensor_ = 0;
  int next_op_ = 0;
};

int conv_extent(int in, int kernel, int stride, int pad_lo, int pad_hi) {
  return (in + pad_lo + pad_hi - kernel) / stride + 1;
}

}  // namespace

GraphModel generate_random_dag(const GraphGenerator& gen) {
  if (gen.min_ops < 1 || gen.max_ops < gen.min_ops || gen.max_spatial < 1 ||
      gen.max_channels < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bad generator ranges");
  }
  Rng rng(gen.seed);
  Builder b(rng);

  auto random_shape = [&] {
    return TensorShape{rng.chance(0.1) ? 2 : 1, rng.uniform(1, gen.max_spatial),
                       rng.uniform(1, gen.max_spatial), rng.uniform(1, gen.max_channels)};
  };

  std::vector<TensorId> available;
  std::map<TensorId, int> uses;
  const int graph_inputs = rng.uniform(1, 2);
  for (int i = 0; i < graph_inputs; ++i) {
    available.push_back(b.tensor(random_shape(), TensorRole::kGraphInput));
  }

  auto pick_source = [&]() -> TensorId {
    std::vector<TensorId> fresh;
    for (TensorId t : available) {
      if (uses[t] == 0) fresh.push_back(t);
    }
    if (fresh.empty() || rng.chance(gen.fan_out_prob)) return rng.pick(available);
    // Favour the newest tensor so conv->relu style chains are common.
    return rng.chance(0.5) ? fresh.back() : rng.pick(fresh);
  };
  auto partners = [&](TensorId src, auto&& same) {
    std::vector<TensorId> out;
    for (TensorId t : available) {
      if (t != src && same(b.shape(t), b.shape(src))) out.push_back(t);
    }
    return out;
  };

  const int op_count = rng.uniform(gen.min_ops, gen.max_ops);
  for (int i = 0; i < op_count; ++i) {
    const TensorId src = pick_source();
    const TensorShape s = b.shape(src);
    std::vector<TensorId> inputs{src};
    TensorShape out = s;
    OpKind kind;
    OpAttrs attrs;

    const int roll = rng.uniform(0, 99);
    if (rng.chance(gen.custom_prob)) {
      kind = OpKind::kCustom;
      attrs.supported = false;
      attrs.custom_name = "custom_op";
    } else if (roll < 30) {
      kind = roll < 20 ? OpKind::kConv2D : OpKind::kDepthwiseConv;
      int k = rng.chance(0.5) ? 1 : 3;
      const int stride = rng.chance(0.25) ? 2 : 1;
      if (k == 3 && (rng.chance(0.5) || s.h < 3 || s.w < 3)) attrs.padding = {1, 1, 1, 1};
      attrs.stride = {stride, stride};
      if (rng.chance(0.2)) attrs.fused_activation = Activation::kRelu;
      out.h = conv_extent(s.h, k, stride, attrs.padding.top, attrs.padding.bottom);
      out.w = conv_extent(s.w, k, stride, attrs.padding.left, attrs.padding.right);
      if (kind == OpKind::kConv2D) {
        out.c = rng.uniform(1, gen.max_channels);
        inputs.push_back(b.weight({out.c, k, k, s.c}, true));
      } else {
        inputs.push_back(b.weight({1, k, k, s.c}, true));
      }
      if (rng.chance(0.3)) inputs.push_back(b.weight({1, 1, 1, out.c}, true));
    } else if (roll < 42) {
      kind = OpKind::kRelu;
    } else if (roll < 56) {
      kind = OpKind::kAdd;
      auto same = partners(src, [](const TensorShape& a, const TensorShape& c) { return a == c; });
      if (!same.empty() && rng.chance(0.6)) {
        inputs.push_back(rng.pick(same));
        if (rng.chance(0.15)) inputs.push_back(rng.pick(same));
      } else {
        const TensorId bias = b.weight({1, 1, 1, s.c}, true);
        if (rng.chance(0.5)) {
          inputs.push_back(bias);
        } else {
          inputs.insert(inputs.begin(), bias);
        }
      }
    } else if (roll < 64) {
      kind = OpKind::kConcat;
      auto same = partners(src, [](const TensorShape& a, const TensorShape& c) {
        return a.b == c.b && a.h == c.h && a.w == c.w;
      });
      if (!same.empty() && rng.chance(0.7)) {
        const TensorId other = rng.pick(same);
        inputs.push_back(other);
        out.c += b.shape(other).c;
      }
    } else if (roll < 74 && s.h <= gen.max_spatial + 2 && s.w <= gen.max_spatial + 2) {
      kind = OpKind::kPad;
      do {
        attrs.padding = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1),
                         rng.uniform(0, 1)};
      } while (attrs.padding.is_zero());
      out.h += attrs.padding.top + attrs.padding.bottom;
      out.w += attrs.padding.left + attrs.padding.right;
    } else if (roll < 82) {
      kind = OpKind::kResize;
      attrs.resize_scale = s.h <= gen.max_spatial / 2 && s.w <= gen.max_spatial / 2 &&
                                   rng.chance(0.5)
                               ? 2
                               : 1;
      out.h *= attrs.resize_scale;
      out.w *= attrs.resize_scale;
    } else if (roll < 88) {
      kind = OpKind::kReshape;
      out = rng.chance(0.5) ? TensorShape{s.b, s.w, s.h, s.c} : TensorShape{s.b, 1, s.h * s.w, s.c};
    } else {
      // Single-input ADD / CONCAT identities.
      kind = rng.chance(0.5) ? OpKind::kAdd : OpKind::kConcat;
    }

    const TensorId result = b.tensor(out, TensorRole::kIntermediate);
    b.op(kind, inputs, {result}, attrs);
    for (TensorId t : inputs) {
      if (b.graph().tensor(t).role != TensorRole::kWeight) ++uses[t];
    }
    available.push_back(result);
  }

  GraphModel& g = b.graph();
  const TensorId last = available.back();
  for (TensorId t : available) {
    TensorSpec& spec = g.tensors[t];
    if (spec.role != TensorRole::kIntermediate || uses[t] > 0) continue;
    if (t == last || !rng.chance(gen.dead_end_prob)) spec.role = TensorRole::kGraphOutput;
  }
  g.execution_order = topo_sort(g);
  return std::move(g);
}

std::map<TensorId, DenseTensor> random_inputs(const GraphModel& g, std::uint64_t seed) {
  Rng rng(seed);
  std::map<TensorId, DenseTensor> out;
  for (const auto& [id, spec] : g.tensors) {
    if (spec.role != TensorRole::kGraphInput) continue;
    DenseTensor t = DenseTensor::zeros(spec.shape);
    for (float& v : t.data) v = rng.value();
    out.emplace(id, std::move(t));
  }
  return out;
}

std::vector<TensorUsage> random_usage_records(int count, std::uint64_t seed, int max_span) {
  Rng rng(seed);
  std::vector<TensorUsage> records;
  records.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::int64_t size = 4 * std::int64_t{rng.uniform(1, 1024)};
    records.push_back({TensorId{i}, size, i, i + rng.uniform(0, max_span)});
  }
  return records;
}

GraphModel mobilenet_like() {
  Rng unused(0);
  Builder b(unused);

  // SAME padding as TFLite computes it; the extra row/column goes last.
  auto same_padding = [](int in, int kernel, int stride) {
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    return std::pair{total / 2, total - total / 2};
  };
  TensorId x = b.tensor({1, 224, 224, 3}, TensorRole::kGraphInput);

  auto conv = [&](OpKind kind, int kernel, int stride, int out_c, bool same, bool relu,
                  TensorRole role = TensorRole::kIntermediate) {
    const TensorShape s = b.shape(x);
    OpAttrs attrs;
    attrs.stride = {stride, stride};
    if (same) {
      const auto [top, bottom] = same_padding(s.h, kernel, stride);
      const auto [left, right] = same_padding(s.w, kernel, stride);
      attrs.padding = {top, bottom, left, right};
    }
    if (relu) attrs.fused_activation = Activation::kRelu;
    const int c = kind == OpKind::kConv2D ? out_c : s.c;
    const TensorId w = kind == OpKind::kConv2D ? b.weight({c, kernel, kernel, s.c}, false)
                                               : b.weight({1, kernel, kernel, s.c}, false);
    const TensorId bias = b.weight({1, 1, 1, c}, false);
    const TensorShape out{
        1, conv_extent(s.h, kernel, stride, attrs.padding.top, attrs.padding.bottom),
        conv_extent(s.w, kernel, stride, attrs.padding.left, attrs.padding.right), c};
    const TensorId y = b.tensor(out, role);
    b.op(kind, {x, w, bias}, {y}, attrs);
    x = y;
  };

  conv(OpKind::kConv2D, 3, 2, 32, true, true);
  const std::pair<int, int> blocks[] = {{64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1},
                                        {512, 2}, {512, 1}, {512, 1}, {512, 1}, {512, 1},
                                        {512, 1}, {1024, 2}, {1024, 1}};
  for (const auto& [channels, stride] : blocks) {
    conv(OpKind::kDepthwiseConv, 3, stride, 0, true, true);
    conv(OpKind::kConv2D, 1, 1, channels, true, true);
  }
  // 7x7 valid depthwise reduction standing in for global average pooling.
  conv(OpKind::kDepthwiseConv, 7, 1, 0, false, false);
  conv(OpKind::kConv2D, 1, 1, 1001, false, false, TensorRole::kGraphOutput);

  GraphModel& g = b.graph();
  g.execution_order = topo_sort(g);
  return std::move(g);
}

StrategyComparison compare_strategies(const GraphModel& g, std::string graph_id) {
  StrategyComparison c;
  c.graph_id = std::move(graph_id);
  c.naive = plan_naive(g).total_bytes;
  c.greedy = plan_greedy(g).total_bytes;
  c.mcfp = plan_mincostflow(g).total_bytes;
  c.lower_bound = peak_live_bytes(g);
  c.winner = c.greedy < c.mcfp ? "greedy" : c.mcfp < c.greedy ? "mcfp" : "tie";
  return c;
}

nlohmann::json comparison_to_json(const StrategyComparison& c) {
  return {{"graph_id", c.graph_id}, {"naive", c.naive},
          {"greedy", c.greedy},     {"mcfp", c.mcfp},
          {"lower_bound", c.lower_bound}, {"winner", c.winner}};
}

nlohmann::json run_bench(BenchSuite suite, std::uint64_t first_seed, std::uint64_t last_seed) {
  if (last_seed < first_seed) {
    throw Error(ErrorCode::kInvalidArgument, "seed range is empty");
  }
  std::vector<StrategyComparison> reports;
  if (suite == BenchSuite::kMobilenet) {
    reports.push_back(compare_strategies(mobilenet_like(), "mobilenet_like"));
  } else {
    for (std::uint64_t seed = first_seed;; ++seed) {
      GraphGenerator gen;
      gen.seed = seed;
      reports.push_back(compare_strategies(generate_random_dag(gen), "random-" + std::to_string(seed)));
      if (seed == last_seed) break;
    }
  }

  nlohmann::json out;
  out["suite"] = suite == BenchSuite::kMobilenet ? "mobilenet" : "random";
  int greedy_wins = 0, mcfp_wins = 0, ties = 0, ordered = 0;
  for (const StrategyComparison& c : reports) {
    out["reports"].push_back(comparison_to_json(c));
    greedy_wins += c.winner == "greedy";
    mcfp_wins += c.winner == "mcfp";
    ties += c.winner == "tie";
    ordered += c.lower_bound <= std::min(c.greedy, c.mcfp) && std::max(c.greedy, c.mcfp) <= c.naive;
  }
  out["summary"] = {{"graphs", reports.size()},
                    {"greedy_wins", greedy_wins},
                    {"mcfp_wins", mcfp_wins},
                    {"ties", ties},
                    {"ordering_holds", ordered}};
  if (suite == BenchSuite::kMobilenet) {
    constexpr double kMiB = 1024.0 * 1024.0;
    const StrategyComparison& c = reports.front();
    const ReferenceFootprint ref;
    out["totals_mb"] = {{"naive", c.naive / kMiB}, {"greedy", c.greedy / kMiB},
                        {"mcfp", c.mcfp / kMiB}};
    out["published_reference_mb"] = {
        {"naive", ref.naive_mb}, {"greedy", ref.greedy_mb}, {"mcfp", ref.mcfp_mb},
        {"note", "published MobileNet v1 totals, for context only; not reproduced"}};
  }
  return out;
}

}  // namespace gpuplan
