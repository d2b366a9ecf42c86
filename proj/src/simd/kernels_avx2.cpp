// AVX2 variants. Compiled with -mavx2 only (no FMA) so every product and sum
// rounds exactly as in the scalar reference.

#include <immintrin.h>

#include <algorithm>
#include <cstring>

#include "simd/kernels_internal.hpp"

namespace cwseg::simd::detail {
namespace {

struct VecAccumulator {
  __m256d s = _mm256_setzero_pd();
  __m256d c = _mm256_setzero_pd();

  inline void add(__m256d x) {
    const __m256d t = _mm256_add_pd(s, x);
    const __m256d bp = _mm256_sub_pd(t, s);
    const __m256d err =
        _mm256_add_pd(_mm256_sub_pd(s, _mm256_sub_pd(t, bp)), _mm256_sub_pd(x, bp));
    s = t;
    c = _mm256_add_pd(c, err);
  }

  inline LaneAccumulator spill() const {
    LaneAccumulator out;
    _mm256_storeu_pd(out.s, s);
    _mm256_storeu_pd(out.c, c);
    return out;
  }
};

inline __m256d load_mask4(const std::uint8_t* bytes) {
  std::int32_t packed;
  std::memcpy(&packed, bytes, sizeof(packed));
  return _mm256_cvtepi32_pd(_mm_cvtepu8_epi32(_mm_cvtsi32_si128(packed)));
}

double sum_avx2(const double* values, std::size_t n) {
  VecAccumulator vacc;
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vacc.add(_mm256_loadu_pd(values + i));
  LaneAccumulator acc = vacc.spill();
  for (; i < n; ++i) acc.add(i % kLanes, values[i]);
  return acc.finish();
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  VecAccumulator vacc;
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    vacc.add(_mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  LaneAccumulator acc = vacc.spill();
  for (; i < n; ++i) acc.add(i % kLanes, a[i] * b[i]);
  return acc.finish();
}

Moments masked_moments_avx2(const double* p, const std::uint8_t* truth,
                            const std::uint8_t* region, std::size_t n) {
  VecAccumulator vpg, vpp, vg;
  const __m256d ones = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d pv = _mm256_loadu_pd(p + i);
    const __m256d gv = load_mask4(truth + i);
    const __m256d rv = region ? load_mask4(region + i) : ones;
    vpg.add(_mm256_mul_pd(_mm256_mul_pd(pv, gv), rv));
    vpp.add(_mm256_mul_pd(_mm256_mul_pd(pv, pv), rv));
    vg.add(_mm256_mul_pd(gv, rv));
  }
  LaneAccumulator pg = vpg.spill(), pp = vpp.spill(), gg = vg.spill();
  for (; i < n; ++i) {
    const double r = region ? static_cast<double>(region[i]) : 1.0;
    const double g = static_cast<double>(truth[i]);
    const std::size_t lane = i % kLanes;
    pg.add(lane, (p[i] * g) * r);
    pp.add(lane, (p[i] * p[i]) * r);
    gg.add(lane, g * r);
  }
  return {pg.finish(), pp.finish(), gg.finish()};
}

// AND of `count` byte rows into dst, 32 voxels at a time.
inline void and_rows(const std::uint8_t* const* rows, int count, std::uint8_t* dst,
                     std::size_t width) {
  std::size_t x = 0;
  for (; x + 32 <= width; x += 32) {
    __m256i acc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(rows[0] + x));
    for (int r = 1; r < count; ++r)
      acc = _mm256_and_si256(acc,
                             _mm256_loadu_si256(reinterpret_cast<const __m256i*>(rows[r] + x)));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + x), acc);
  }
  for (; x < width; ++x) {
    std::uint8_t v = rows[0][x];
    for (int r = 1; r < count; ++r) v &= rows[r][x];
    dst[x] = v;
  }
}

void erode_axis_avx2(const std::uint8_t* src, std::uint8_t* dst, std::size_t depth,
                     std::size_t height, std::size_t width, int axis, int radius,
                     bool replicate_edge) {
  const std::size_t plane = height * width;
  if (axis == 2) {
    const std::size_t r = static_cast<std::size_t>(radius);
    for (std::size_t row = 0; row < depth * height; ++row) {
      const std::uint8_t* in = src + row * width;
      std::uint8_t* out = dst + row * width;
      if (width <= 2 * r) {
        for (std::size_t x = 0; x < width; ++x)
          out[x] = erode_line_voxel(in, 1, width, x, radius, replicate_edge);
        continue;
      }
      for (std::size_t x = 0; x < r; ++x)
        out[x] = erode_line_voxel(in, 1, width, x, radius, replicate_edge);
      std::size_t x = r;
      for (; x + 32 + r <= width; x += 32) {
        __m256i acc = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + x - r));
        for (std::size_t o = 1; o <= 2 * r; ++o)
          acc = _mm256_and_si256(
              acc, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + x - r + o)));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + x), acc);
      }
      for (; x < width; ++x)
        out[x] = erode_line_voxel(in, 1, width, x, radius, replicate_edge);
    }
    return;
  }

  const std::size_t extent = axis == 0 ? depth : height;
  const std::size_t outer = axis == 0 ? 1 : depth;
  const std::size_t row_stride = axis == 0 ? plane : width;
  const std::size_t block = axis == 0 ? 0 : plane;
  const std::size_t inner = axis == 0 ? height : 1;  // rows sharing one axis position
  std::vector<const std::uint8_t*> rows(static_cast<std::size_t>(2 * radius + 1));

  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t pos = 0; pos < extent; ++pos) {
      for (std::size_t in_row = 0; in_row < inner; ++in_row) {
        const std::size_t base = o * block + in_row * width;
        std::uint8_t* out = dst + base + pos * row_stride;
        bool outside = false;
        for (int k = -radius; k <= radius; ++k) {
          const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(pos) + k;
          if ((q < 0 || static_cast<std::size_t>(q) >= extent) && !replicate_edge) {
            outside = true;
            break;
          }
          rows[static_cast<std::size_t>(k + radius)] =
              src + base + clamp_index(q, extent) * row_stride;
        }
        if (outside) {
          std::memset(out, 0, width);
          continue;
        }
        and_rows(rows.data(), 2 * radius + 1, out, width);
      }
    }
  }
}

void affine_avx2(const double* in, std::size_t in_rows, const double* weights,
                 const double* bias, std::size_t out_rows, double* out, std::size_t n) {
  for (std::size_t r = 0; r < out_rows; ++r) {
    double* row = out + r * n;
    const double* w = weights + r * in_rows;
    std::size_t v = 0;
    for (; v + kLanes <= n; v += kLanes) {
      __m256d acc = _mm256_set1_pd(bias[r]);
      for (std::size_t k = 0; k < in_rows; ++k)
        acc = _mm256_add_pd(acc,
                            _mm256_mul_pd(_mm256_set1_pd(w[k]), _mm256_loadu_pd(in + k * n + v)));
      _mm256_storeu_pd(row + v, acc);
    }
    for (; v < n; ++v) {
      double acc = bias[r];
      for (std::size_t k = 0; k < in_rows; ++k) acc = acc + w[k] * in[k * n + v];
      row[v] = acc;
    }
  }
}

inline __m256d exp_nonpositive_avx2(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(kExpFloor));
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2e)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d r = _mm256_sub_pd(_mm256_sub_pd(x, _mm256_mul_pd(k, _mm256_set1_pd(kLn2Hi))),
                                  _mm256_mul_pd(k, _mm256_set1_pd(kLn2Lo)));
  __m256d p = _mm256_set1_pd(kExpCoef[12]);
  for (int i = 11; i >= 0; --i)
    p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(kExpCoef[i]));
  // 2^k: k sits in the low mantissa bits after adding 1.5 * 2^52.
  const __m256i kbits = _mm256_castpd_si256(_mm256_add_pd(k, _mm256_set1_pd(0x1.8p52)));
  const __m256i biased = _mm256_add_epi64(kbits, _mm256_set1_epi64x(1023));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
  return _mm256_mul_pd(p, scale);
}

void tanh_avx2(double* values, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d x = _mm256_loadu_pd(values + i);
    const __m256d a = _mm256_andnot_pd(sign, x);
    const __m256d e = exp_nonpositive_avx2(_mm256_mul_pd(_mm256_set1_pd(-2.0), a));
    const __m256d t = _mm256_div_pd(_mm256_sub_pd(one, e), _mm256_add_pd(one, e));
    _mm256_storeu_pd(values + i, _mm256_or_pd(t, _mm256_and_pd(sign, x)));
  }
  for (; i < n; ++i) values[i] = tanh_value(values[i]);
}

void softmax_avx2(double* logits, std::size_t classes, std::size_t n) {
  std::size_t v = 0;
  for (; v + kLanes <= n; v += kLanes) {
    __m256d mx = _mm256_loadu_pd(logits + v);
    for (std::size_t c = 1; c < classes; ++c) mx = _mm256_max_pd(mx, _mm256_loadu_pd(logits + c * n + v));
    __m256d s = _mm256_setzero_pd();
    for (std::size_t c = 0; c < classes; ++c) {
      const __m256d e = exp_nonpositive_avx2(_mm256_sub_pd(_mm256_loadu_pd(logits + c * n + v), mx));
      _mm256_storeu_pd(logits + c * n + v, e);
      s = _mm256_add_pd(s, e);
    }
    for (std::size_t c = 0; c < classes; ++c)
      _mm256_storeu_pd(logits + c * n + v, _mm256_div_pd(_mm256_loadu_pd(logits + c * n + v), s));
  }
  for (; v < n; ++v) {
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

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::Avx2,       sum_avx2,        dot_avx2,
                                 masked_moments_avx2, erode_axis_avx2, affine_avx2,
                                 tanh_avx2,       softmax_avx2};
  return table;
}

}  // namespace cwseg::simd::detail
