#include <algorithm>

#include "simd/kernels_internal.hpp"

namespace cwseg::simd::detail {
namespace {

double sum_scalar(const double* values, std::size_t n) {
  LaneAccumulator acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(i % kLanes, values[i]);
  return acc.finish();
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  LaneAccumulator acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(i % kLanes, a[i] * b[i]);
  return acc.finish();
}

Moments masked_moments_scalar(const double* p, const std::uint8_t* truth,
                              const std::uint8_t* region, std::size_t n) {
  LaneAccumulator pg, pp, gg;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = region ? static_cast<double>(region[i]) : 1.0;
    const double g = static_cast<double>(truth[i]);
    const std::size_t lane = i % kLanes;
    pg.add(lane, (p[i] * g) * r);
    pp.add(lane, (p[i] * p[i]) * r);
    gg.add(lane, g * r);
  }
  return {pg.finish(), pp.finish(), gg.finish()};
}

void erode_axis_scalar(const std::uint8_t* src, std::uint8_t* dst, std::size_t depth,
                       std::size_t height, std::size_t width, int axis, int radius,
                       bool replicate_edge) {
  const std::size_t strides[3] = {height * width, width, 1};
  const std::size_t extents[3] = {depth, height, width};
  const std::size_t stride = strides[axis];
  const std::size_t extent = extents[axis];
  for (std::size_t z = 0; z < depth; ++z) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t coord[3] = {z, y, x};
        const std::size_t pos = coord[axis];
        const std::size_t idx = z * strides[0] + y * strides[1] + x;
        const std::uint8_t* line = src + (idx - pos * stride);
        dst[idx] = erode_line_voxel(line, stride, extent, pos, radius, replicate_edge);
      }
    }
  }
}

void affine_scalar(const double* in, std::size_t in_rows, const double* weights,
                   const double* bias, std::size_t out_rows, double* out, std::size_t n) {
  for (std::size_t r = 0; r < out_rows; ++r) {
    double* row = out + r * n;
    for (std::size_t v = 0; v < n; ++v) row[v] = bias[r];
    for (std::size_t k = 0; k < in_rows; ++k) {
      const double w = weights[r * in_rows + k];
      const double* src = in + k * n;
      for (std::size_t v = 0; v < n; ++v) row[v] = row[v] + w * src[v];
    }
  }
}

void tanh_scalar(double* values, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) values[i] = tanh_value(values[i]);
}

void softmax_scalar(double* logits, std::size_t classes, std::size_t n) {
  for (std::size_t v = 0; v < n; ++v) {
    double mx = logits[v];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits[c * n + v]);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      logits[c * n + v] = exp_nonpositive(logits[c * n + v] - mx);
      s = s + logits[c * n + v];
    }
    for (std::size_t c = 0; c < classes; ++c) logits[c * n + v] = logits[c * n + v] / s;
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::Scalar,       sum_scalar,        dot_scalar,
                                 masked_moments_scalar, erode_axis_scalar, affine_scalar,
                                 tanh_scalar,       softmax_scalar};
  return table;
}

}  // namespace cwseg::simd::detail
