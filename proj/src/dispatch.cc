#include "gpuplan/dispatch.h"

#include <algorithm>

#include "gpuplan/error.h"

namespace gpuplan {

bool WorkGroupConfig::is_valid() const {
  auto in_lattice = [](int v) {
    return std::find(kLattice.begin(), kLattice.end(), v) != kLattice.end();
  };
  return in_lattice(x) && in_lattice(y) && in_lattice(z);
}

std::string to_string(const WorkGroupConfig& wg) {
  return "(" + std::to_string(wg.x) + "," + std::to_string(wg.y) + "," +
         std::to_string(wg.z) + ")";
}

DispatchGrid compute_grid(const TensorShape& s, const WorkGroupConfig& wg) {
  if (!s.is_valid() || wg.x < 1 || wg.y < 1 || wg.z < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid needs a valid shape and positive work group");
  }
  return {align_up(s.w, wg.x), align_up(s.h, wg.y), align_up(s.c, wg.z), wg};
}

std::int64_t useful_threads(const TensorShape& s) {
  return std::int64_t{s.h} * s.w * s.c;
}

std::int64_t stub_threads(const TensorShape& s, const DispatchGrid& grid) {
  return grid.thread_count() - useful_threads(s);
}

std::vector<ThreadId> thread_order(const DispatchGrid& grid) {
  const WorkGroupConfig& wg = grid.wg;
  std::vector<ThreadId> out;
  out.reserve(static_cast<std::size_t>(grid.thread_count()));
  std::int64_t group = 0;
  for (int gz = 0; gz < grid.groups_z(); ++gz) {
    for (int gy = 0; gy < grid.groups_y(); ++gy) {
      for (int gx = 0; gx < grid.groups_x(); ++gx, ++group) {
        for (int tz = 0; tz < wg.z; ++tz) {
          for (int ty = 0; ty < wg.y; ++ty) {
            for (int tx = 0; tx < wg.x; ++tx) {
              out.push_back({gx * wg.x + tx, gy * wg.y + ty, gz * wg.z + tz, group});
            }
          }
        }
      }
    }
  }
  return out;
}

bool ConvConfig::in_search_space() const {
  auto in_range = [](const TensorShape& s) {
    auto ok = [](int d) { return d >= 8 && d <= 128; };
    return s.b == 1 && ok(s.h) && ok(s.w) && ok(s.c);
  };
  return kernel >= 1 && kernel <= 3 && stride >= 1 && stride <= 3 &&
         in_range(in_shape) && in_range(out_shape);
}

DispatchGrid slice_grid(const TensorShape& s, const WorkGroupConfig& wg) {
  TensorShape sliced = s;
  sliced.c = (s.c + 3) / 4;
  return compute_grid(sliced, wg);
}

}  // namespace gpuplan
