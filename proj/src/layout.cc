#include "gpuplan/layout.h"

#include <algorithm>
#include <string>

#include "gpuplan/error.h"

namespace gpuplan {

Phwc4Dims phwc4_dims(const TensorShape& s) {
  return {std::int64_t{s.b} * s.h * slice_count(s.c), std::int64_t{4} * s.w};
}

std::int64_t phwc4_index(const TensorShape& shape, int h, int w, int c) {
  return phwc4_index(shape, 0, h, w, c);
}

std::int64_t phwc4_index(const TensorShape& shape, int b, int h, int w, int c) {
  if (b < 0 || b >= shape.b || h < 0 || h >= shape.h || w < 0 ||
      w >= shape.w || c < 0 || c >= shape.c) {
    throw Error(ErrorCode::kOutOfRange,
                "coordinate (" + std::to_string(b) + "," + std::to_string(h) +
                    "," + std::to_string(w) + "," + std::to_string(c) +
                    ") outside " + to_string(shape));
  }
  return phwc4_offset(shape, b, h, w, c);
}

void phwc4_pack_into(const DenseTensor& t, std::span<float> dst) {
  const TensorShape& s = t.shape;
  if (static_cast<std::int64_t>(t.data.size()) != s.element_count()) {
    throw Error(ErrorCode::kInvalidArgument,
                "dense tensor length does not match " + to_string(s));
  }
  if (static_cast<std::int64_t>(dst.size()) < phwc4_element_count(s)) {
    throw Error(ErrorCode::kInvalidArgument, "destination too small for PHWC4");
  }
  std::fill_n(dst.begin(), phwc4_element_count(s), 0.0f);
  const float* src = t.data.data();
  for (int b = 0; b < s.b; ++b) {
    for (int h = 0; h < s.h; ++h) {
      for (int w = 0; w < s.w; ++w) {
        for (int c = 0; c < s.c; ++c) {
          dst[phwc4_offset(s, b, h, w, c)] = *src++;
        }
      }
    }
  }
}

Phwc4Buffer phwc4_pack(const DenseTensor& t) {
  Phwc4Buffer buf{t.shape, std::vector<float>(phwc4_element_count(t.shape))};
  phwc4_pack_into(t, buf.data);
  return buf;
}

bool phwc4_pads_are_zero(const TensorShape& s, std::span<const float> src) {
  const int tail = s.c % 4;
  if (tail == 0) return true;
  const int last_slice = slice_count(s.c) - 1;
  for (int b = 0; b < s.b; ++b) {
    for (int h = 0; h < s.h; ++h) {
      for (int w = 0; w < s.w; ++w) {
        const std::int64_t base = phwc4_offset(s, b, h, w, last_slice * 4);
        for (int lane = tail; lane < 4; ++lane) {
          if (src[base + lane] != 0.0f) return false;
        }
      }
    }
  }
  return true;
}

DenseTensor phwc4_unpack_from(const TensorShape& s, std::span<const float> src) {
  if (static_cast<std::int64_t>(src.size()) < phwc4_element_count(s)) {
    throw Error(ErrorCode::kCorruptBuffer,
                "PHWC4 buffer shorter than " + to_string(s) + " requires");
  }
  if (!phwc4_pads_are_zero(s, src)) {
    throw Error(ErrorCode::kCorruptBuffer, "non-zero PHWC4 padding lane");
  }
  DenseTensor t = DenseTensor::zeros(s);
  float* dst = t.data.data();
  for (int b = 0; b < s.b; ++b) {
    for (int h = 0; h < s.h; ++h) {
      for (int w = 0; w < s.w; ++w) {
        for (int c = 0; c < s.c; ++c) {
          *dst++ = src[phwc4_offset(s, b, h, w, c)];
        }
      }
    }
  }
  return t;
}

DenseTensor phwc4_unpack(const Phwc4Buffer& buf) {
  if (static_cast<std::int64_t>(buf.data.size()) != phwc4_element_count(buf.shape)) {
    throw Error(ErrorCode::kCorruptBuffer,
                "PHWC4 buffer length " + std::to_string(buf.data.size()) +
                    " does not match " + to_string(buf.shape));
  }
  return phwc4_unpack_from(buf.shape, buf.data);
}

}  // namespace gpuplan
