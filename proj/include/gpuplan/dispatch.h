#ifndef GPUPLAN_DISPATCH_H_
#define GPUPLAN_DISPATCH_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gpuplan/graph.h"

namespace gpuplan {

// Work-group dimensions; each component is 2, 4 or 8.
struct WorkGroupConfig {
  int x = 4;
  int y = 4;
  int z = 4;

  static constexpr std::array<int, 3> kLattice{2, 4, 8};

  bool is_valid() const;
  auto operator<=>(const WorkGroupConfig&) const = default;
};

std::string to_string(const WorkGroupConfig& wg);

// Unlike the tuning lattice, the grid accepts any positive work-group size.
struct DispatchGrid {
  int X = 0;
  int Y = 0;
  int Z = 0;
  WorkGroupConfig wg;

  std::int64_t thread_count() const { return std::int64_t{X} * Y * Z; }
  int groups_x() const { return X / wg.x; }
  int groups_y() const { return Y / wg.y; }
  int groups_z() const { return Z / wg.z; }
  std::int64_t group_count() const {
    return std::int64_t{groups_x()} * groups_y() * groups_z();
  }

  friend bool operator==(const DispatchGrid&, const DispatchGrid&) = default;
};

constexpr int align_up(int value, int multiple) {
  return (value + multiple - 1) / multiple * multiple;
}

// X over width, Y over height, Z over channels (one cell per value), each
// rounded up to the work group. Batch is not part of the grid.
DispatchGrid compute_grid(const TensorShape& out_shape, const WorkGroupConfig& wg);

std::int64_t useful_threads(const TensorShape& out_shape);
std::int64_t stub_threads(const TensorShape& out_shape, const DispatchGrid& grid);

struct ThreadId {
  int x = 0;  // w
  int y = 0;  // h
  int z = 0;  // c
  std::int64_t group = 0;

  friend bool operator==(const ThreadId&, const ThreadId&) = default;
};

// Work groups in W, then H, then C order; threads inside each group follow
// the same order.
std::vector<ThreadId> thread_order(const DispatchGrid& grid);

enum class ConvKind { kConv2D, kDepthwiseConv };

// A point of the convolution search space: kernel and stride in {1,2,3},
// shapes within (8,8,8)..(128,128,128).
struct ConvConfig {
  ConvKind kind = ConvKind::kConv2D;
  int kernel = 1;
  int stride = 1;
  TensorShape in_shape{1, 8, 8, 8};
  TensorShape out_shape{1, 8, 8, 8};

  // Bounds of the tuning search space.
  bool in_search_space() const;
};

// Grid used when each thread produces one 4-channel output slice, the way a
// PHWC4 kernel runs: Z spans ceil(C/4) slices.
DispatchGrid slice_grid(const TensorShape& out_shape, const WorkGroupConfig& wg);

}  // namespace gpuplan

#endif  // GPUPLAN_DISPATCH_H_
