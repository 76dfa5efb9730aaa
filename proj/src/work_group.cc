#include "gpuplan/work_group.h"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>

#include "gpuplan/error.h"

namespace gpuplan {

namespace {

using Lattice = std::array<int, 3>;  // indices into kLattice

WorkGroupConfig at(const Lattice& p) {
  const auto& v = WorkGroupConfig::kLattice;
  return {v[p[0]], v[p[1]], v[p[2]]};
}

class Estimator {
 public:
  Estimator(const LatencyMeasure& measure, const ConvConfig& cfg, int trials)
      : measure_(measure), cfg_(cfg), trials_(trials) {
    if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
  }

  double operator()(const WorkGroupConfig& wg) {
    if (auto it = cache_.find(wg); it != cache_.end()) return it->second;
    double sum = 0.0;
    for (int i = 0; i < trials_; ++i) sum += measure_(wg, cfg_);
    const double mean = sum / trials_;
    cache_.emplace(wg, mean);
    return mean;
  }

  int points() const { return static_cast<int>(cache_.size()); }

 private:
  const LatencyMeasure& measure_;
  const ConvConfig& cfg_;
  int trials_;
  std::map<WorkGroupConfig, double> cache_;
};

// Strictly better estimate, or equal estimate with smaller config.
bool better(double a_cost, const WorkGroupConfig& a, double b_cost,
            const WorkGroupConfig& b) {
  return a_cost < b_cost || (a_cost == b_cost && a < b);
}

Lattice descend(Lattice p, Estimator& estimate) {
  for (bool moved = true; moved;) {
    moved = false;
    for (int axis = 0; axis < 3; ++axis) {
      const double here = estimate(at(p));
      Lattice best = p;
      double best_cost = here;
      for (int v = 0; v < 3; ++v) {
        Lattice q = p;
        q[axis] = v;
        const double cost = estimate(at(q));
        if (better(cost, at(q), best_cost, at(best))) {
          best = q;
          best_cost = cost;
        }
      }
      // Only strict improvements move, so the walk terminates.
      if (best_cost < here) {
        p = best;
        moved = true;
      }
    }
  }
  return p;
}

}  // namespace

TuningResult tune_work_group(const LatencyMeasure& measure, const ConvConfig& cfg,
                             int trials) {
  Estimator estimate(measure, cfg, trials);
  bool have = false;
  TuningResult result;
  for (int cx : {0, 2}) {
    for (int cy : {0, 2}) {
      for (int cz : {0, 2}) {
        const WorkGroupConfig end = at(descend({cx, cy, cz}, estimate));
        const double cost = estimate(end);
        if (!have || better(cost, end, result.estimate_ms, result.best)) {
          result.best = end;
          result.estimate_ms = cost;
          have = true;
        }
      }
    }
  }
  result.points_measured = estimate.points();
  return result;
}

TuningResult tune_work_group_exhaustive(const LatencyMeasure& measure,
                                        const ConvConfig& cfg, int trials) {
  Estimator estimate(measure, cfg, trials);
  TuningResult result;
  bool have = false;
  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 3; ++y) {
      for (int z = 0; z < 3; ++z) {
        const WorkGroupConfig wg = at({x, y, z});
        const double cost = estimate(wg);
        if (!have || better(cost, wg, result.estimate_ms, result.best)) {
          result.best = wg;
          result.estimate_ms = cost;
          have = true;
        }
      }
    }
  }
  result.points_measured = estimate.points();
  return result;
}

WorkGroupConfig select_work_group(const LatencyMeasure& measure, const ConvConfig& cfg,
                                  int trials) {
  return tune_work_group(measure, cfg, trials).best;
}

WorkGroupConfig preset_work_group(std::string_view gpu_model, ConvKind kind) {
  std::string key;
  for (char ch : gpu_model) {
    if (!std::isspace(static_cast<unsigned char>(ch))) {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (key.starts_with("adreno")) key.erase(0, 6);

  struct Entry {
    WorkGroupConfig conv;
    WorkGroupConfig depthwise;
  };
  static const std::map<std::string, Entry> kTable = {
      {"630", {{4, 8, 4}, {4, 4, 8}}},
      {"540", {{8, 2, 2}, {8, 8, 2}}},
      {"510", {{8, 4, 4}, {8, 4, 4}}},
      {"509", {{8, 4, 8}, {8, 4, 2}}},
      {"50x/4xx", {{8, 4, 8}, {8, 4, 8}}},
  };
  auto it = kTable.find(key);
  const bool three_digits = key.size() == 3 && std::all_of(key.begin(), key.end(), ::isdigit);
  if (it == kTable.end() && three_digits &&
      ((key[0] == '5' && key[1] == '0') || key[0] == '4')) {
    it = kTable.find("50x/4xx");
  }
  if (it == kTable.end()) {
    throw Error(ErrorCode::kUnknownModel,
                "no preset for GPU '" + std::string(gpu_model) +
                    "'; tune it with select_work_group (tune-wg)");
  }
  return kind == ConvKind::kConv2D ? it->second.conv : it->second.depthwise;
}

double separable_bowl(const WorkGroupConfig& wg) {
  auto sq = [](int d) { return static_cast<double>(d) * d; };
  return sq(wg.x - 4) + sq(wg.y - 8) + sq(wg.z - 4);
}

double synthetic_latency_ms(const WorkGroupConfig& wg) {
  return 1.0 + 0.1 * separable_bowl(wg);
}

double NoisyMeasure::operator()(const WorkGroupConfig& wg, const ConvConfig&) {
  // 53 random bits mapped to [0, 1).
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return base_(wg) * (1.0 + amplitude_ * (2.0 * u - 1.0));
}

CsvMeasure CsvMeasure::parse(std::istream& in) {
  CsvMeasure m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    WorkGroupConfig wg;
    double latency;
    if (!(fields >> wg.x >> wg.y >> wg.z >> latency)) {
      if (line_no == 1) continue;  // header
      throw Error(ErrorCode::kParse, "bad CSV row " + std::to_string(line_no));
    }
    if (!wg.is_valid()) {
      throw Error(ErrorCode::kParse, "work group off the {2,4,8} lattice at row " +
                                         std::to_string(line_no));
    }
    m.samples_[wg].push_back(latency);
  }
  return m;
}

double CsvMeasure::operator()(const WorkGroupConfig& wg, const ConvConfig&) {
  auto it = samples_.find(wg);
  if (it == samples_.end()) {
    throw Error(ErrorCode::kInvalidArgument, "no measurement for work group " + to_string(wg));
  }
  std::size_t& pos = cursor_[wg];
  const double v = it->second[pos % it->second.size()];
  ++pos;
  return v;
}

}  // namespace gpuplan
