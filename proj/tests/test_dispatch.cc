#include <gtest/gtest.h>

#include <map>
#include <set>

#include "gpuplan/cache_sim.h"
#include "gpuplan/dispatch.h"
#include "gpuplan/error.h"
#include "gpuplan/layout.h"
#include "gpuplan/work_group.h"
#include "oracles.h"

namespace {

using namespace gpuplan;

TEST(ComputeGrid, PadsEachAxisToTheWorkGroup) {
  const DispatchGrid g = compute_grid({1, 10, 10, 6}, {4, 4, 4});
  EXPECT_EQ(g.X, 12);
  EXPECT_EQ(g.Y, 12);
  EXPECT_EQ(g.Z, 8);
}

TEST(ComputeGrid, StubThreadsMatchDirectCount) {
  const TensorShape s{1, 10, 10, 6};
  const DispatchGrid g = compute_grid(s, {4, 4, 4});
  std::int64_t stubs = 0;
  for (int z = 0; z < g.Z; ++z)
    for (int y = 0; y < g.Y; ++y)
      for (int x = 0; x < g.X; ++x) stubs += x >= s.w || y >= s.h || z >= s.c;
  EXPECT_EQ(stubs, 552);
  EXPECT_EQ(stub_threads(s, g), stubs);
}

TEST(ComputeGrid, AlignedShapeHasNoStubs) {
  const TensorShape s{1, 4, 4, 4};
  const DispatchGrid g = compute_grid(s, {4, 4, 4});
  EXPECT_EQ(g, (DispatchGrid{4, 4, 4, {4, 4, 4}}));
  EXPECT_EQ(stub_threads(s, g), 0);
}

TEST(ComputeGrid, CoversShapeAndIsTightExactlyWhenAligned) {
  for (int h = 1; h <= 12; ++h)
    for (int w = 1; w <= 12; ++w)
      for (int c = 1; c <= 12; ++c)
        for (int wx : {2, 4, 8})
          for (int wz : {2, 4, 8}) {
            const TensorShape s{1, h, w, c};
            const DispatchGrid g = compute_grid(s, {wx, 4, wz});
            ASSERT_GE(g.thread_count(), useful_threads(s));
            EXPECT_EQ(g.X % wx, 0);
            EXPECT_EQ(g.Z % wz, 0);
            const bool aligned = w % wx == 0 && h % 4 == 0 && c % wz == 0;
            EXPECT_EQ(g.thread_count() == useful_threads(s), aligned);
          }
}

TEST(ThreadOrder, TwoThreadGrid) {
  const auto order = thread_order(DispatchGrid{2, 1, 1, {2, 1, 1}});
  ASSERT_EQ(order.size(), 2u);
  EXPECT_EQ(order[0], (ThreadId{0, 0, 0, 0}));
  EXPECT_EQ(order[1], (ThreadId{1, 0, 0, 0}));
}

TEST(ThreadOrder, SingleGroupIsLexicographicInCHW) {
  const auto order = thread_order(DispatchGrid{4, 4, 4, {4, 4, 4}});
  ASSERT_EQ(order.size(), 64u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(order[i], (ThreadId{i, 0, 0, 0}));
  EXPECT_EQ(order[4], (ThreadId{0, 1, 0, 0}));
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto key = [](const ThreadId& t) { return std::tuple(t.z, t.y, t.x); };
    EXPECT_LT(key(order[i - 1]), key(order[i]));
  }
}

TEST(ThreadOrder, GroupsRunOneAfterAnother) {
  const auto order = thread_order(DispatchGrid{8, 4, 4, {4, 4, 4}});
  ASSERT_EQ(order.size(), 128u);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(order[i].group, 0);
    EXPECT_LT(order[i].x, 4);
    EXPECT_EQ(order[i + 64].group, 1);
    EXPECT_GE(order[i + 64].x, 4);
  }
}

TEST(ThreadOrder, EveryCoordinateExactlyOnce) {
  for (int X : {2, 4, 8, 16})
    for (int Y : {2, 4, 8, 16})
      for (int Z : {2, 8, 16}) {
        const DispatchGrid g{X, Y, Z, {2, 2, 2}};
        std::set<std::tuple<int, int, int>> seen;
        std::int64_t last_group = -1;
        for (const ThreadId& t : thread_order(g)) {
          ASSERT_TRUE(seen.insert({t.x, t.y, t.z}).second);
          ASSERT_GE(t.group, last_group);
          // The group id follows from the coordinates with W fastest.
          const std::int64_t expect =
              (std::int64_t{t.z / 2} * (Y / 2) + t.y / 2) * (X / 2) + t.x / 2;
          ASSERT_EQ(t.group, expect);
          last_group = t.group;
        }
        EXPECT_EQ(static_cast<std::int64_t>(seen.size()), g.thread_count());
      }
}

TEST(CacheSim, FourNeighbouringLoadsShareOneLine) {
  const std::vector<MemoryRequest> trace{{0, 16}, {16, 16}, {32, 16}, {48, 16}};
  const CacheReport r = simulate_trace(trace, CacheModel{});
  EXPECT_EQ(r.misses, 1);
  EXPECT_EQ(r.hits, 3);
  EXPECT_EQ(r.bytes_fetched, 64);
}

TEST(CacheSim, SingleColdLoad) {
  const std::vector<MemoryRequest> trace{{128, 16}};
  const CacheReport r = simulate_trace(trace, CacheModel{});
  EXPECT_EQ(r.misses, 1);
  EXPECT_EQ(r.hits, 0);
  EXPECT_DOUBLE_EQ(r.miss_rate, 1.0);
}

TEST(CacheSim, StraddlingLoadTouchesTwoLines) {
  const std::vector<MemoryRequest> trace{{56, 16}};
  EXPECT_EQ(simulate_trace(trace, CacheModel{}).misses, 2);
}

TEST(CacheSim, LruEvictsLeastRecentlyUsed) {
  CacheModel m;
  m.capacity_lines = 2;
  // Lines 0, 1, 0, 2, 1, 0: line 2 evicts 1, then 1 evicts 0.
  const std::vector<MemoryRequest> trace{{0, 4}, {64, 4}, {0, 4}, {128, 4}, {64, 4}, {0, 4}};
  const CacheReport r = simulate_trace(trace, m);
  EXPECT_EQ(r.hits, 1);
  EXPECT_EQ(r.misses, 5);
}

TEST(CacheSim, MatchesListOracleOnRandomTraces) {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> addr(0, 4000), bytes(1, 80);
  for (int trial = 0; trial < 100; ++trial) {
    CacheModel m;
    m.capacity_lines = trial % 5 == 0 ? 0 : trial % 9 + 1;
    std::vector<MemoryRequest> trace;
    std::vector<std::pair<std::int64_t, int>> raw;
    for (int i = 0; i < 300; ++i) {
      trace.push_back({addr(rng), bytes(rng)});
      raw.push_back({trace.back().address, trace.back().bytes});
    }
    const CacheReport r = simulate_trace(trace, m);
    const auto o = oracle::simple_lru(raw, m.line_bytes, static_cast<std::size_t>(m.capacity_lines));
    EXPECT_EQ(r.hits, o.hits);
    EXPECT_EQ(r.misses, o.misses);
    EXPECT_EQ(r.bytes_fetched, r.misses * m.line_bytes);
    EXPECT_DOUBLE_EQ(r.miss_rate, static_cast<double>(r.misses) / (r.hits + r.misses));
  }
}

TEST(CacheSim, SecondPassOverUnboundedCacheAllHits) {
  ConvConfig cfg;
  cfg.in_shape = {1, 8, 8, 7};
  cfg.out_shape = {1, 8, 8, 7};
  const auto order = thread_order(slice_grid(cfg.out_shape, {4, 4, 4}));
  for (MemoryLayout layout : {MemoryLayout::kPhwc4, MemoryLayout::kHwc}) {
    const auto trace = conv1x1_first_loads(layout, cfg, order, 16);
    CacheSimulator sim(CacheModel{});
    sim.run(trace);
    sim.reset_counters();
    sim.run(trace);
    EXPECT_EQ(sim.report().misses, 0);
    EXPECT_GT(sim.report().hits, 0);
  }
}

TEST(CacheSim, AlignedPhwc4TraceMissesOncePerLine) {
  for (int c_in : {4, 8, 12, 16})
    for (int h : {1, 3, 8})
      for (int w : {4, 8, 12}) {
        ConvConfig cfg;
        cfg.in_shape = {1, h, w, c_in};
        cfg.out_shape = {1, h, w, 4};
        const CacheReport r = simulate_cache(MemoryLayout::kPhwc4, cfg, CacheModel{});
        EXPECT_DOUBLE_EQ(r.miss_rate, 0.25) << h << "x" << w << "x" << c_in;
      }
}

TEST(CacheSim, ExtraOutputSlicesRereadTheSameLines) {
  ConvConfig cfg;
  cfg.in_shape = {1, 8, 8, 8};
  cfg.out_shape = {1, 8, 8, 8};
  const CacheReport r = simulate_cache(MemoryLayout::kPhwc4, cfg, CacheModel{});
  EXPECT_EQ(r.misses, 16);
  EXPECT_EQ(r.hits + r.misses, 128);
}

TEST(CacheSim, LayoutTracesMatchHandAddresses) {
  // One 16-byte load per output cell at channel 0 of the input cell; a
  // single output slice so every thread is one cell.
  for (int c : {3, 5, 6, 7})
    for (int h = 1; h <= 8; ++h)
      for (int w = 1; w <= 8; ++w) {
        ConvConfig cfg;
        cfg.in_shape = {1, h, w, c};
        cfg.out_shape = {1, h, w, 4};
        std::vector<std::pair<std::int64_t, int>> phwc4, hwc;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            phwc4.push_back({(std::int64_t{y} * w + x) * 16, 16});
            hwc.push_back({(std::int64_t{y} * w + x) * c * 4, 16});
          }
        const auto p = simulate_cache(MemoryLayout::kPhwc4, cfg, CacheModel{});
        const auto q = simulate_cache(MemoryLayout::kHwc, cfg, CacheModel{});
        const auto po = oracle::simple_lru(phwc4, 64, 0);
        const auto qo = oracle::simple_lru(hwc, 64, 0);
        EXPECT_EQ(p.misses, po.misses);
        EXPECT_EQ(p.hits, po.hits);
        EXPECT_EQ(q.misses, qo.misses);
        EXPECT_EQ(q.hits, qo.hits);
      }
}

TEST(CacheSim, RejectsLargerKernels) {
  ConvConfig cfg;
  cfg.kernel = 3;
  EXPECT_THROW(simulate_cache(MemoryLayout::kPhwc4, cfg, CacheModel{}), Error);
}

TEST(CacheSim, RejectsLineNotMultipleOfLoad) {
  CacheModel m;
  m.line_bytes = 40;
  EXPECT_THROW(CacheSimulator{m}, Error);
}

double bowl_cost(const WorkGroupConfig& wg, const ConvConfig&) { return separable_bowl(wg); }

WorkGroupConfig exhaustive_argmin(const std::function<double(const WorkGroupConfig&)>& f) {
  WorkGroupConfig best{8, 8, 8};
  double best_cost = 1e300;
  for (int x : {2, 4, 8})
    for (int y : {2, 4, 8})
      for (int z : {2, 4, 8}) {
        const WorkGroupConfig wg{x, y, z};
        const double c = f(wg);
        if (c < best_cost || (c == best_cost && wg < best)) {
          best = wg;
          best_cost = c;
        }
      }
  return best;
}

TEST(WorkGroupTuner, SeparableBowlFindsItsMinimum) {
  const WorkGroupConfig wg = select_work_group(bowl_cost, ConvConfig{}, 1);
  EXPECT_EQ(wg, (WorkGroupConfig{4, 8, 4}));
  EXPECT_EQ(wg, exhaustive_argmin(separable_bowl));
}

TEST(WorkGroupTuner, ConstantCostTiesToSmallest) {
  auto flat = [](const WorkGroupConfig&, const ConvConfig&) { return 3.0; };
  EXPECT_EQ(select_work_group(flat, ConvConfig{}, 2), (WorkGroupConfig{2, 2, 2}));
  EXPECT_EQ(tune_work_group_exhaustive(flat, ConvConfig{}, 1).best, (WorkGroupConfig{2, 2, 2}));
}

TEST(WorkGroupTuner, UnimodalFunctionsMatchExhaustion) {
  // Separable convex costs with random centres and weights.
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> centre(1.0, 9.0), weight(0.1, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double cx = centre(rng), cy = centre(rng), cz = centre(rng);
    const double ax = weight(rng), ay = weight(rng), az = weight(rng);
    auto f = [=](const WorkGroupConfig& wg) {
      return ax * (wg.x - cx) * (wg.x - cx) + ay * (wg.y - cy) * (wg.y - cy) +
             az * (wg.z - cz) * (wg.z - cz);
    };
    auto measure = [&](const WorkGroupConfig& wg, const ConvConfig&) { return f(wg); };
    EXPECT_EQ(select_work_group(measure, ConvConfig{}, 1), exhaustive_argmin(f));
  }
}

TEST(WorkGroupTuner, MeanOfTrialsAndCaching) {
  int calls = 0;
  auto counting = [&](const WorkGroupConfig& wg, const ConvConfig&) {
    ++calls;
    return separable_bowl(wg);
  };
  const TuningResult r = tune_work_group(counting, ConvConfig{}, 3);
  EXPECT_EQ(calls, 3 * r.points_measured);
  EXPECT_LE(r.points_measured, 27);
  EXPECT_THROW(tune_work_group(counting, ConvConfig{}, 0), Error);
}

TEST(WorkGroupTuner, NoisyBowlWithinTenPercent) {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    NoisyMeasure noisy(synthetic_latency_ms, 0.10, seed);
    const WorkGroupConfig wg = select_work_group(noisy, ConvConfig{}, 8);
    good += synthetic_latency_ms(wg) <= 1.1 * synthetic_latency_ms({4, 8, 4});
  }
  EXPECT_GE(good, 95);
}

TEST(WorkGroupTuner, MeasureErrorsPropagate) {
  auto failing = [](const WorkGroupConfig&, const ConvConfig&) -> double {
    throw std::runtime_error("device lost");
  };
  EXPECT_THROW(select_work_group(failing, ConvConfig{}, 1), std::runtime_error);
}

TEST(WorkGroupTuner, CsvMeasureReplaysRows) {
  std::stringstream csv;
  csv << "x,y,z,latency_ms\n";
  for (int x : {2, 4, 8})
    for (int y : {2, 4, 8})
      for (int z : {2, 4, 8}) {
        const double base = synthetic_latency_ms({x, y, z});
        csv << x << "," << y << "," << z << "," << base << "\n";
        csv << x << "," << y << "," << z << "," << base + 0.01 << "\n";
      }
  CsvMeasure m = CsvMeasure::parse(csv);
  EXPECT_EQ(m.point_count(), 27u);
  EXPECT_EQ(select_work_group(m, ConvConfig{}, 2), (WorkGroupConfig{4, 8, 4}));
}

TEST(WorkGroupTuner, CsvMissingPointFails) {
  std::stringstream csv("2,2,2,1.0\n");
  CsvMeasure m = CsvMeasure::parse(csv);
  EXPECT_THROW(select_work_group(m, ConvConfig{}, 1), Error);
}

TEST(Presets, KnownAdrenoEntries) {
  EXPECT_EQ(preset_work_group("Adreno 630", ConvKind::kConv2D), (WorkGroupConfig{4, 8, 4}));
  EXPECT_EQ(preset_work_group("Adreno 630", ConvKind::kDepthwiseConv), (WorkGroupConfig{4, 4, 8}));
  EXPECT_EQ(preset_work_group("Adreno 540", ConvKind::kConv2D), (WorkGroupConfig{8, 2, 2}));
  EXPECT_EQ(preset_work_group("adreno540", ConvKind::kDepthwiseConv), (WorkGroupConfig{8, 8, 2}));
  EXPECT_EQ(preset_work_group("510", ConvKind::kConv2D), (WorkGroupConfig{8, 4, 4}));
  EXPECT_EQ(preset_work_group("Adreno 509", ConvKind::kDepthwiseConv), (WorkGroupConfig{8, 4, 2}));
  EXPECT_EQ(preset_work_group("Adreno 430", ConvKind::kConv2D), (WorkGroupConfig{8, 4, 8}));
}

TEST(Presets, UnknownModelPointsToTuner) {
  try {
    preset_work_group("Adreno 999", ConvKind::kConv2D);
    FAIL() << "expected unknown model";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownModel);
    EXPECT_NE(std::string(e.what()).find("select_work_group"), std::string::npos);
  }
}

}  // namespace
