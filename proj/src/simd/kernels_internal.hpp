#pragma once

// Helpers shared by the scalar and vector kernel translation units. Everything
// here has internal linkage so each TU keeps its own copy compiled with its own
// target flags.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "cwseg/simd.hpp"

namespace cwseg::simd::detail {

inline constexpr std::size_t kLanes = 4;

namespace {

/// Running compensated sum for one lane (Knuth's branch-free two-sum).
struct LaneAccumulator {
  double s[kLanes] = {0.0, 0.0, 0.0, 0.0};
  double c[kLanes] = {0.0, 0.0, 0.0, 0.0};

  inline void add(std::size_t lane, double x) {
    const double t = s[lane] + x;
    const double bp = t - s[lane];
    const double err = (s[lane] - (t - bp)) + (x - bp);
    s[lane] = t;
    c[lane] = c[lane] + err;
  }

  inline double finish() const {
    double hi = s[0];
    double lo = c[0];
    for (std::size_t l = 1; l < kLanes; ++l) {
      const double t = hi + s[l];
      const double bp = t - hi;
      const double err = (hi - (t - bp)) + (s[l] - bp);
      hi = t;
      lo = lo + err;
      lo = lo + c[l];
    }
    return hi + lo;
  }
};

// exp(x) for x <= 0: Cody-Waite reduction to |r| <= ln2/2 and a degree-12
// Taylor polynomial. Vector kernels replay exactly these operations.
inline constexpr double kExpFloor = -700.0;
inline constexpr double kLog2e = 1.4426950408889634;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kExpCoef[13] = {
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
};

inline double exp_nonpositive(double x) {
  x = x < kExpFloor ? kExpFloor : x;
  const double k = std::nearbyint(x * kLog2e);
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;
  double p = kExpCoef[12];
  for (int i = 11; i >= 0; --i) p = p * r + kExpCoef[i];
  const auto bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(k) + 1023) << 52;
  return p * std::bit_cast<double>(bits);
}

inline double tanh_value(double x) {
  const double e = exp_nonpositive(-2.0 * std::fabs(x));
  return std::copysign((1.0 - e) / (1.0 + e), x);
}

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t extent) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= extent) return extent - 1;
  return static_cast<std::size_t>(i);
}

/// Scalar erosion of one output voxel along an axis, given a strided line.
inline std::uint8_t erode_line_voxel(const std::uint8_t* line, std::size_t stride,
                                     std::size_t extent, std::size_t pos, int radius,
                                     bool replicate_edge) {
  for (int o = -radius; o <= radius; ++o) {
    const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(pos) + o;
    if (q < 0 || static_cast<std::size_t>(q) >= extent) {
      if (!replicate_edge) return 0;
      if (line[clamp_index(q, extent) * stride] == 0) return 0;
      continue;
    }
    if (line[static_cast<std::size_t>(q) * stride] == 0) return 0;
  }
  return 1;
}

}  // namespace

const KernelTable& scalar_table();
#if defined(CWSEG_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace cwseg::simd::detail
