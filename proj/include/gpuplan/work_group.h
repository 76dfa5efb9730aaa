#ifndef GPUPLAN_WORK_GROUP_H_
#define GPUPLAN_WORK_GROUP_H_

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <random>
#include <string_view>
#include <vector>

#include "gpuplan/dispatch.h"

namespace gpuplan {

// One latency sample T(W, C) in milliseconds. Exceptions propagate out of
// the tuner unchanged.
using LatencyMeasure = std::function<double(const WorkGroupConfig&, const ConvConfig&)>;

struct TuningResult {
  WorkGroupConfig best;
  double estimate_ms = 0.0;
  // Distinct lattice points measured (each with `trials` samples).
  int points_measured = 0;
};

// Multi-start coordinate descent over {2,4,8}^3 from the 8 lattice corners.
// Each point's latency is the mean of `trials` samples, measured once and
// cached. A sweep along each axis moves to the best value on that axis when
// it is strictly better; the best converged point wins, ties going to the
// lexicographically smallest (x,y,z).
TuningResult tune_work_group(const LatencyMeasure& measure, const ConvConfig& cfg,
                             int trials);

// Mean-of-trials estimate at all 27 points; same tie-break.
TuningResult tune_work_group_exhaustive(const LatencyMeasure& measure,
                                        const ConvConfig& cfg, int trials);

WorkGroupConfig select_work_group(const LatencyMeasure& measure, const ConvConfig& cfg,
                                  int trials);

// Known-good work groups for Adreno GPUs. Accepts "630", "Adreno 630",
// "adreno630" and so on; 500-series parts other than 509/510 and all
// 400-series parts map to the shared 50X/4XX entry. Throws
// ErrorCode::kUnknownModel otherwise.
WorkGroupConfig preset_work_group(std::string_view gpu_model, ConvKind kind);

// (x-4)^2 + (y-8)^2 + (z-4)^2, minimised at (4,8,4).
double separable_bowl(const WorkGroupConfig& wg);

// Synthetic latency 1 ms + 0.1 ms per bowl unit: the optimum costs 1.0 and
// every other lattice point at least 1.4.
double synthetic_latency_ms(const WorkGroupConfig& wg);

// Wraps a base cost with multiplicative uniform noise in [1-amp, 1+amp],
// drawn from a seeded generator. Copies share nothing.
class NoisyMeasure {
 public:
  NoisyMeasure(std::function<double(const WorkGroupConfig&)> base, double amplitude,
               std::uint64_t seed)
      : base_(std::move(base)), amplitude_(amplitude), rng_(seed) {}

  double operator()(const WorkGroupConfig& wg, const ConvConfig&);

 private:
  std::function<double(const WorkGroupConfig&)> base_;
  double amplitude_;
  std::mt19937_64 rng_;
};

// Measurements replayed from rows of x,y,z,latency_ms (optional header).
// Repeated rows for a point are returned round-robin; a point with no rows
// throws ErrorCode::kInvalidArgument.
class CsvMeasure {
 public:
  static CsvMeasure parse(std::istream& in);

  double operator()(const WorkGroupConfig& wg, const ConvConfig&);
  std::size_t point_count() const { return samples_.size(); }

 private:
  std::map<WorkGroupConfig, std::vector<double>> samples_;
  std::map<WorkGroupConfig, std::size_t> cursor_;
};

}  // namespace gpuplan

#endif  // GPUPLAN_WORK_GROUP_H_
