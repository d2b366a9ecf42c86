#pragma once

// Data-parallel inner loops shared by every module. Each kernel has a scalar
// reference implementation and, where the platform allows, a vectorized
// variant. Variants are selected once at runtime and must produce results that
// are bit-identical to the scalar reference: reductions use a fixed four-lane
// compensated accumulation order on every path.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cwseg::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Sums restricted to a region: sum(p*g), sum(p*p), sum(g).
struct Moments {
  double pg = 0.0;
  double pp = 0.0;
  double g = 0.0;
};

struct KernelTable {
  Isa isa;

  /// Compensated sum of `n` doubles.
  double (*sum)(const double* values, std::size_t n);

  /// Compensated dot product.
  double (*dot)(const double* a, const double* b, std::size_t n);

  /// Dice moments of a probability channel against a binary truth mask,
  /// restricted to `region` (nullptr means every voxel).
  Moments (*masked_moments)(const double* p, const std::uint8_t* truth,
                            const std::uint8_t* region, std::size_t n);

  /// One binary erosion pass along a single axis of a row-major volume.
  /// `axis` 0 = depth, 1 = height, 2 = width. Voxels outside the volume read
  /// as 0 when `replicate_edge` is false, as the nearest edge voxel otherwise.
  void (*erode_axis)(const std::uint8_t* src, std::uint8_t* dst,
                     std::size_t depth, std::size_t height, std::size_t width,
                     int axis, int radius, bool replicate_edge);

  /// out[r*n + v] = bias[r] + sum_k weights[r*in_rows + k] * in[k*n + v],
  /// accumulated in increasing k.
  void (*affine)(const double* in, std::size_t in_rows, const double* weights,
                 const double* bias, std::size_t out_rows, double* out,
                 std::size_t n);

  /// In-place hyperbolic tangent (absolute error below 1e-15).
  void (*tanh_inplace)(double* values, std::size_t n);

  /// In-place softmax over `classes` channel-major rows of length `n`.
  void (*softmax)(double* logits, std::size_t classes, std::size_t n);
};

/// Table selected for this process: the widest supported ISA, unless the
/// environment variable CWSEG_SIMD=scalar forces the reference kernels.
const KernelTable& kernels();

/// Table for a specific ISA. Throws std::runtime_error if unsupported here.
const KernelTable& kernels_for(Isa isa);

/// Every ISA usable on this machine, scalar first.
std::vector<Isa> available_isas();

}  // namespace cwseg::simd
