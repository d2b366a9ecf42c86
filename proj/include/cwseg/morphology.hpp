#pragma once

// Binary erosion with a box structuring element, contour extraction as the
// difference between a mask and its erosion, and the two-level contour weight
// map used by the weighted cross-entropy.

#include <vector>

#include "cwseg/volgrid.hpp"

namespace cwseg {

/// Full box of odd extents. Default 3x3x3 (26-connectivity).
struct StructuringElement {
  int depth = 3;
  int height = 3;
  int width = 3;

  static StructuringElement cube(int extent) { return {extent, extent, extent}; }
  void validate() const;
  friend bool operator==(const StructuringElement&, const StructuringElement&) = default;
};

enum class BoundaryPolicy { ZeroOutside, ReplicateEdge };

struct ContourSpec {
  StructuringElement element{};
  int iterations = 6;
  BoundaryPolicy boundary = BoundaryPolicy::ZeroOutside;

  void validate() const;
  friend bool operator==(const ContourSpec&, const ContourSpec&) = default;
};

/// Applies `spec.iterations` erosions. A voxel survives one pass iff every
/// voxel under the element centred on it is 1. Single-slice volumes (depth 1)
/// use an element depth of 1.
BinaryMask erode(const BinaryMask& mask, const ContourSpec& spec);

struct ContourSplit {
  BinaryMask contour;
  BinaryMask interior;
};

/// interior = erode(mask); contour = mask AND NOT interior.
ContourSplit extract_contour(const BinaryMask& mask, const ContourSpec& spec);

/// Contour splits of every class; entry 0 (background) is left empty.
std::vector<ContourSplit> extract_class_contours(const LabelVolume& labels,
                                                 const ContourSpec& spec);

/// Weight `contour_gain` on voxels lying on any foreground class contour, 1
/// elsewhere. Throws std::domain_error when contour_gain < 1 or is not finite.
ScalarVolume build_weight_map(const LabelVolume& labels, const ContourSpec& spec,
                              double contour_gain);

/// Same map from precomputed per-class splits.
ScalarVolume weight_map_from_contours(const Dims& dims, const std::vector<ContourSplit>& splits,
                                      double contour_gain);

}  // namespace cwseg
