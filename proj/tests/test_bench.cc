#include <gtest/gtest.h>

#include "gpuplan/bench.h"
#include "gpuplan/graph_json.h"
#include "test_util.h"

namespace {

using namespace gpuplan;

GraphModel dag(std::uint64_t seed, int min_ops = 1, int max_ops = 30) {
  GraphGenerator gen;
  gen.seed = seed;
  gen.min_ops = min_ops;
  gen.max_ops = max_ops;
  return generate_random_dag(gen);
}

TEST(GraphGenerator, SameSeedSameGraph) {
  for (std::uint64_t seed : {1u, 7u, 1234u})
    EXPECT_EQ(graph_to_json(dag(seed)).dump(), graph_to_json(dag(seed)).dump());
  EXPECT_NE(graph_to_json(dag(1)).dump(), graph_to_json(dag(2)).dump());
}

TEST(GraphGenerator, SingleOpGraph) {
  const GraphModel g = dag(1, 1, 1);
  EXPECT_EQ(g.ops.size(), 1u);
  EXPECT_TRUE(validate_graph(g).empty());
}

TEST(GraphGenerator, ThirtyOpsValidate) {
  const GraphModel g = dag(42, 30, 30);
  EXPECT_EQ(g.ops.size(), 30u);
  EXPECT_TRUE(validate_graph(g).empty());
}

TEST(GraphGenerator, ManySeedsValidateAndStayInBounds) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const GraphModel g = dag(seed);
    ASSERT_TRUE(validate_graph(g).empty()) << "seed " << seed;
    EXPECT_LE(intermediate_tensors(g).size(), 30u);
    EXPECT_EQ(g.execution_order, topo_sort(g));
    bool has_output = false;
    for (const auto& [id, t] : g.tensors) has_output |= t.role == TensorRole::kGraphOutput;
    EXPECT_TRUE(has_output);
  }
}

TEST(GraphGenerator, RandomInputsCoverEveryGraphInput) {
  const GraphModel g = dag(3);
  const auto inputs = random_inputs(g, 3);
  for (const auto& [id, t] : g.tensors) {
    if (t.role != TensorRole::kGraphInput) continue;
    ASSERT_TRUE(inputs.count(id));
    EXPECT_EQ(inputs.at(id).shape, t.shape);
    for (float v : inputs.at(id).data) {
      EXPECT_GE(v, -1.0f);
      EXPECT_LT(v, 1.0f);
    }
  }
}

TEST(UsageRecords, RandomRecordsAreWellFormed) {
  const auto records = random_usage_records(1000, 5, 16);
  ASSERT_EQ(records.size(), 1000u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].first_use, static_cast<int>(i));
    EXPECT_GE(records[i].last_use, records[i].first_use);
    EXPECT_LE(records[i].last_use - records[i].first_use, 16);
    EXPECT_GT(records[i].size, 0);
  }
}

TEST(Mobilenet, ShapeAndFootprintDirection) {
  const GraphModel g = mobilenet_like();
  ASSERT_TRUE(validate_graph(g).empty());
  EXPECT_GE(intermediate_tensors(g).size(), 27u);
  const StrategyComparison c = compare_strategies(g, "mobilenet");
  EXPECT_LT(c.greedy * 2, c.naive);
  EXPECT_LT(c.mcfp, c.naive);
  EXPECT_LE(c.lower_bound, std::min(c.greedy, c.mcfp));
}

TEST(CompareStrategies, ChainTotals) {
  const StrategyComparison c = compare_strategies(testutil::chain({10, 20, 15}), "chain");
  EXPECT_EQ(c.naive, 45);
  EXPECT_EQ(c.greedy, 35);
  EXPECT_EQ(c.mcfp, 35);
  EXPECT_EQ(c.lower_bound, 35);
  EXPECT_EQ(c.winner, "tie");
  const auto j = comparison_to_json(c);
  EXPECT_EQ(j.at("graph_id"), "chain");
  EXPECT_EQ(j.at("naive"), 45);
}

TEST(CompareStrategies, GraphWithoutIntermediates) {
  testutil::GraphBuilder b;
  const TensorId in = b.sized(4, TensorRole::kGraphInput);
  b.node({in}, {b.sized(4, TensorRole::kGraphOutput)});
  const StrategyComparison c = compare_strategies(b.build(), "empty");
  EXPECT_EQ(c.naive, 0);
  EXPECT_EQ(c.greedy, 0);
  EXPECT_EQ(c.mcfp, 0);
  EXPECT_EQ(c.winner, "tie");
}

TEST(RunBench, RandomSuiteSummaryIsConsistent) {
  const auto report = run_bench(BenchSuite::kRandom, 1, 200);
  EXPECT_EQ(report.at("suite"), "random");
  const auto& reports = report.at("reports");
  ASSERT_EQ(reports.size(), 200u);
  int greedy = 0, mcfp = 0, ties = 0;
  for (const auto& r : reports) {
    EXPECT_LE(r.at("lower_bound").get<std::int64_t>(),
              std::min(r.at("greedy").get<std::int64_t>(), r.at("mcfp").get<std::int64_t>()));
    const std::string w = r.at("winner");
    greedy += w == "greedy";
    mcfp += w == "mcfp";
    ties += w == "tie";
  }
  const auto& s = report.at("summary");
  EXPECT_EQ(s.at("graphs"), 200);
  EXPECT_EQ(s.at("greedy_wins"), greedy);
  EXPECT_EQ(s.at("mcfp_wins"), mcfp);
  EXPECT_EQ(s.at("ties"), ties);
  EXPECT_EQ(s.at("ordering_holds"), 200);
  EXPECT_EQ(report.dump(), run_bench(BenchSuite::kRandom, 1, 200).dump());
}

TEST(RunBench, MobilenetSuiteCarriesReference) {
  const auto report = run_bench(BenchSuite::kMobilenet, 1, 1);
  EXPECT_EQ(report.at("suite"), "mobilenet");
  EXPECT_DOUBLE_EQ(report.at("published_reference_mb").at("naive").get<double>(), 9.6);
  EXPECT_DOUBLE_EQ(report.at("published_reference_mb").at("greedy").get<double>(), 2.3);
  EXPECT_DOUBLE_EQ(report.at("published_reference_mb").at("mcfp").get<double>(), 2.7);
  EXPECT_TRUE(report.contains("totals_mb"));
}

}  // namespace
