#include "cwseg/morphology.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cwseg/simd.hpp"

namespace cwseg {

void StructuringElement::validate() const {
  for (int e : {depth, height, width})
    if (e < 1 || e % 2 == 0)
      throw std::invalid_argument("structuring element extents must be odd and >= 1, got " +
                                  std::to_string(e));
}

void ContourSpec::validate() const {
  element.validate();
  if (iterations < 1) throw std::invalid_argument("erosion iterations must be >= 1");
}

BinaryMask erode(const BinaryMask& mask, const ContourSpec& spec) {
  spec.validate();
  const Dims& d = mask.dims();
  const int radii[3] = {d.depth == 1 ? 0 : spec.element.depth / 2, spec.element.height / 2,
                        spec.element.width / 2};
  const bool replicate = spec.boundary == BoundaryPolicy::ReplicateEdge;
  const auto& k = simd::kernels();

  // A box erosion factors into one line erosion per axis.
  std::vector<std::uint8_t> a(mask.bits().begin(), mask.bits().end());
  std::vector<std::uint8_t> b(a.size());
  for (int it = 0; it < spec.iterations; ++it) {
    for (int axis = 0; axis < 3; ++axis) {
      if (radii[axis] == 0) continue;
      k.erode_axis(a.data(), b.data(), d.depth, d.height, d.width, axis, radii[axis], replicate);
      a.swap(b);
    }
  }
  return BinaryMask(d, std::move(a));
}

ContourSplit extract_contour(const BinaryMask& mask, const ContourSpec& spec) {
  BinaryMask interior = erode(mask, spec);
  BinaryMask contour = mask_minus(mask, interior);
  return {std::move(contour), std::move(interior)};
}

std::vector<ContourSplit> extract_class_contours(const LabelVolume& labels,
                                                 const ContourSpec& spec) {
  std::vector<ContourSplit> out;
  out.reserve(static_cast<std::size_t>(labels.num_classes()));
  out.push_back({BinaryMask(labels.dims()), BinaryMask(labels.dims())});
  for (int c = 1; c < labels.num_classes(); ++c) out.push_back(extract_contour(one_hot(labels, c), spec));
  return out;
}

ScalarVolume weight_map_from_contours(const Dims& dims, const std::vector<ContourSplit>& splits,
                                      double contour_gain) {
  if (!std::isfinite(contour_gain) || contour_gain < 1.0)
    throw std::domain_error("contour_gain must be finite and >= 1");
  std::vector<double> w(dims.voxels(), 1.0);
  for (std::size_t c = 1; c < splits.size(); ++c) {
    const auto bits = splits[c].contour.bits();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (bits[i]) w[i] = contour_gain;
  }
  return ScalarVolume(dims, std::move(w));
}

ScalarVolume build_weight_map(const LabelVolume& labels, const ContourSpec& spec,
                              double contour_gain) {
  if (!std::isfinite(contour_gain) || contour_gain < 1.0)
    throw std::domain_error("contour_gain must be finite and >= 1");
  return weight_map_from_contours(labels.dims(), extract_class_contours(labels, spec), contour_gain);
}

}  // namespace cwseg
