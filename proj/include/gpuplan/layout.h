#ifndef GPUPLAN_LAYOUT_H_
#define GPUPLAN_LAYOUT_H_

#include <cstdint>
#include <span>
#include <vector>

#include "gpuplan/graph.h"

namespace gpuplan {

// Dense row-major BHWC tensor.
struct DenseTensor {
  TensorShape shape;
  std::vector<float> data;

  static DenseTensor zeros(const TensorShape& shape) {
    return {shape, std::vector<float>(static_cast<std::size_t>(shape.element_count()), 0.0f)};
  }

  std::int64_t index(int b, int h, int w, int c) const {
    return ((std::int64_t{b} * shape.h + h) * shape.w + w) * shape.c + c;
  }
  float at(int b, int h, int w, int c) const { return data[index(b, h, w, c)]; }
  float& at(int b, int h, int w, int c) { return data[index(b, h, w, c)]; }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;
};

constexpr int slice_count(int channels) { return (channels + 3) / 4; }

// Element count of the PHWC4 representation, padding lanes included.
constexpr std::int64_t phwc4_element_count(const TensorShape& s) {
  return std::int64_t{s.b} * slice_count(s.c) * s.h * s.w * 4;
}

struct Phwc4Dims {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
};

// 2D view of the buffer: each 4-channel slice is an (H, 4W) plane and the
// planes are stacked, giving (B * H * slices, 4W).
Phwc4Dims phwc4_dims(const TensorShape& shape);

// Offset of (h, w, c) inside one batch: ((slice * H + h) * W + w) * 4 + c % 4.
// Throws ErrorCode::kOutOfRange for coordinates outside the shape.
std::int64_t phwc4_index(const TensorShape& shape, int h, int w, int c);
std::int64_t phwc4_index(const TensorShape& shape, int b, int h, int w, int c);

// Unchecked variant for inner loops; the caller guarantees bounds.
inline std::int64_t phwc4_offset(const TensorShape& s, int b, int h, int w,
                                 int c) {
  const std::int64_t slices = slice_count(s.c);
  return (((std::int64_t{b} * slices + c / 4) * s.h + h) * s.w + w) * 4 + (c & 3);
}

struct Phwc4Buffer {
  TensorShape shape;
  std::vector<float> data;

  int slices() const { return slice_count(shape.c); }
  Phwc4Dims dims() const { return phwc4_dims(shape); }

  friend bool operator==(const Phwc4Buffer&, const Phwc4Buffer&) = default;
};

Phwc4Buffer phwc4_pack(const DenseTensor& t);

// Throws ErrorCode::kCorruptBuffer when a padding lane is non-zero or the
// buffer length disagrees with its shape.
DenseTensor phwc4_unpack(const Phwc4Buffer& buf);

// Span-based forms used by the executor, which keeps buffers inside a
// shared arena. `dst` must hold phwc4_element_count(shape) floats.
void phwc4_pack_into(const DenseTensor& t, std::span<float> dst);
DenseTensor phwc4_unpack_from(const TensorShape& shape, std::span<const float> src);

// True when every padding lane in `src` is exactly +0 or -0.
bool phwc4_pads_are_zero(const TensorShape& shape, std::span<const float> src);

}  // namespace gpuplan

#endif  // GPUPLAN_LAYOUT_H_
