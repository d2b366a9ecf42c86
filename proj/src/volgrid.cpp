#include "cwseg/volgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cwseg/simd.hpp"

namespace cwseg {

Dims::Dims(std::size_t d, std::size_t h, std::size_t w) : depth(d), height(h), width(w) {
  if (d == 0 || h == 0 || w == 0) throw std::invalid_argument("dims must be strictly positive");
  constexpr auto kMax = static_cast<std::size_t>(std::numeric_limits<std::ptrdiff_t>::max());
  if (h > kMax / w || d > kMax / (h * w))
    throw std::invalid_argument("dims overflow the index range");
}

LabelVolume::LabelVolume(Dims dims, std::vector<std::uint8_t> labels, int num_classes)
    : dims_(dims), labels_(std::move(labels)), num_classes_(num_classes) {
  if (labels_.size() != dims_.voxels())
    throw std::invalid_argument("label count does not match dims");
  if (num_classes_ < 2 || num_classes_ > 256)
    throw std::invalid_argument("num_classes must lie in [2, 256]");
  for (auto v : labels_)
    if (v >= num_classes_)
      throw std::invalid_argument("label " + std::to_string(v) + " out of range for " +
                                  std::to_string(num_classes_) + " classes");
}

std::size_t LabelVolume::count(int class_id) const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(class_id)));
}

BinaryMask::BinaryMask(Dims dims) : dims_(dims), bits_(dims.voxels(), 0) {}

BinaryMask::BinaryMask(Dims dims, std::vector<std::uint8_t> bits)
    : dims_(dims), bits_(std::move(bits)) {
  if (bits_.size() != dims_.voxels()) throw std::invalid_argument("mask length does not match dims");
  for (auto b : bits_)
    if (b > 1) throw std::invalid_argument("mask values must be 0 or 1");
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
  if (!(a.dims() == b.dims())) throw std::invalid_argument("mask dims differ");
  std::vector<std::uint8_t> out(a.dims().voxels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(a[i], b[i]);
  return BinaryMask(a.dims(), std::move(out));
}

}  // namespace

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](std::uint8_t x, std::uint8_t y) -> std::uint8_t { return x & y; });
}

BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](std::uint8_t x, std::uint8_t y) -> std::uint8_t { return x | y; });
}

BinaryMask mask_minus(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, [](std::uint8_t x, std::uint8_t y) -> std::uint8_t { return x & (y ^ 1); });
}

BinaryMask mask_not(const BinaryMask& a) {
  std::vector<std::uint8_t> out(a.bits().begin(), a.bits().end());
  for (auto& b : out) b ^= 1;
  return BinaryMask(a.dims(), std::move(out));
}

ProbVolume::ProbVolume(Dims dims, int num_classes, std::vector<double> values)
    : dims_(dims), num_classes_(num_classes), values_(std::move(values)) {
  if (num_classes_ < 1) throw std::invalid_argument("probability volume needs a channel");
  if (values_.size() != dims_.voxels() * static_cast<std::size_t>(num_classes_))
    throw std::invalid_argument("probability count does not match dims x channels");
  for (double v : values_)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
}

std::span<const double> ProbVolume::channel(int c) const {
  if (c < 0 || c >= num_classes_) throw std::out_of_range("channel index out of range");
  const std::size_t n = dims_.voxels();
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(c) * n, n);
}

bool ProbVolume::normalized(double tol) const {
  const std::size_t n = dims_.voxels();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 0; c < num_classes_; ++c) s += values_[c * n + i];
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

ScalarVolume::ScalarVolume(Dims dims, std::vector<double> values)
    : dims_(dims), values_(std::move(values)) {
  if (values_.size() != dims_.voxels()) throw std::invalid_argument("value count does not match dims");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("scalar volume values must be finite");
}

BinaryMask one_hot(const LabelVolume& labels, int class_id) {
  if (class_id < 0 || class_id >= labels.num_classes())
    throw std::domain_error("class_id " + std::to_string(class_id) + " out of range");
  std::vector<std::uint8_t> bits(labels.dims().voxels());
  const auto src = labels.labels();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = src[i] == class_id ? 1 : 0;
  return BinaryMask(labels.dims(), std::move(bits));
}

ProbVolume one_hot_probs(const LabelVolume& labels) {
  const std::size_t n = labels.dims().voxels();
  std::vector<double> values(n * static_cast<std::size_t>(labels.num_classes()), 0.0);
  for (std::size_t i = 0; i < n; ++i) values[labels[i] * n + i] = 1.0;
  return ProbVolume(labels.dims(), labels.num_classes(), std::move(values));
}

ScalarVolume zscore_normalize(const ScalarVolume& img) {
  const auto& k = simd::kernels();
  const auto y = img.values();
  const std::size_t n = y.size();
  const double mean = reduce_sum(y) / static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = y[i] - mean;
  const double var = k.dot(centered.data(), centered.data(), n) / static_cast<double>(n);
  const double sigma = std::sqrt(var);
  if (!(sigma >= 1e-12)) return ScalarVolume(img.dims(), std::vector<double>(n, 0.0));
  for (auto& v : centered) v /= sigma;
  return ScalarVolume(img.dims(), std::move(centered));
}

double reduce_sum(std::span<const double> values) {
  const double s = simd::kernels().sum(values.data(), values.size());
  if (!std::isfinite(s)) {
    for (double v : values)
      if (std::isnan(v)) throw std::domain_error("reduce_sum: NaN input");
    throw std::domain_error("reduce_sum: non-finite result");
  }
  return s;
}

}  // namespace cwseg
