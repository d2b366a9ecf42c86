#pragma once

// Volumetric data model: dimensions, label maps, binary masks, per-class
// probability volumes and scalar volumes. Storage is flat row-major with width
// varying fastest and depth slowest; multi-channel volumes are channel-major.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cwseg {

struct Dims {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  Dims() = default;
  /// Throws std::invalid_argument on a zero extent or index overflow.
  Dims(std::size_t depth, std::size_t height, std::size_t width);

  std::size_t voxels() const { return depth * height * width; }
  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * height + y) * width + x;
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Integer class map. Class 0 is background; classes 1..num_classes-1 are the
/// foreground targets.
class LabelVolume {
 public:
  LabelVolume(Dims dims, std::vector<std::uint8_t> labels, int num_classes);

  const Dims& dims() const { return dims_; }
  int num_classes() const { return num_classes_; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }

  /// Number of voxels labelled `class_id`.
  std::size_t count(int class_id) const;

 private:
  Dims dims_;
  std::vector<std::uint8_t> labels_;
  int num_classes_;
};

class BinaryMask {
 public:
  /// All-zero mask.
  explicit BinaryMask(Dims dims);
  /// Throws std::invalid_argument on a length mismatch or a byte other than 0/1.
  BinaryMask(Dims dims, std::vector<std::uint8_t> bits);

  const Dims& dims() const { return dims_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  Dims dims_;
  std::vector<std::uint8_t> bits_;
};

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
/// a AND NOT b
BinaryMask mask_minus(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_not(const BinaryMask& a);

/// Per-class probabilities, channel-major: value(c, i) = values()[c*N + i].
class ProbVolume {
 public:
  /// Throws std::invalid_argument if a value lies outside [0, 1] or is NaN.
  ProbVolume(Dims dims, int num_classes, std::vector<double> values);

  const Dims& dims() const { return dims_; }
  int num_classes() const { return num_classes_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> channel(int c) const;
  double value(int c, std::size_t i) const { return values_[c * dims_.voxels() + i]; }

  /// True when every voxel's channel sum is within `tol` of 1.
  bool normalized(double tol = 1e-5) const;

 private:
  Dims dims_;
  int num_classes_;
  std::vector<double> values_;
};

class ScalarVolume {
 public:
  /// Throws std::invalid_argument on a length mismatch or a non-finite value.
  ScalarVolume(Dims dims, std::vector<double> values);

  const Dims& dims() const { return dims_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Mask that is 1 exactly where `labels` equals `class_id`.
BinaryMask one_hot(const LabelVolume& labels, int class_id);

/// Probability volume holding the one-hot encoding of every class.
ProbVolume one_hot_probs(const LabelVolume& labels);

/// (y - mean) / population standard deviation; all zeros when sigma < 1e-12.
ScalarVolume zscore_normalize(const ScalarVolume& img);

/// Deterministic compensated sum. Throws std::domain_error when the input
/// contains NaN or the result is not finite.
double reduce_sum(std::span<const double> values);

}  // namespace cwseg
