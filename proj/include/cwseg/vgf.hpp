#pragma once

// VGF volume files: a single-line JSON header
//   {"magic":"VGF1","dims":[d,h,w],"dtype":"u8"|"f32","channels":c,"kind":...}
// terminated by '\n', followed by raw little-endian voxels, row-major with
// width fastest and channel-major for multi-channel volumes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cwseg/volgrid.hpp"

namespace cwseg::io {

enum class DType { U8, F32 };
enum class VolumeKind { Labels, Image, Probs, Weights };

struct VolumeFile {
  Dims dims;
  DType dtype = DType::U8;
  int channels = 1;
  VolumeKind kind = VolumeKind::Labels;
  std::vector<std::uint8_t> payload;

  std::size_t element_size() const { return dtype == DType::U8 ? 1 : 4; }
  /// Throws std::runtime_error when the payload length or kind/dtype pairing
  /// is inconsistent.
  void validate() const;
  friend bool operator==(const VolumeFile&, const VolumeFile&) = default;
};

std::string encode(const VolumeFile& file);
/// Throws std::runtime_error on a malformed header or payload.
VolumeFile decode(std::string_view bytes);

void write_volume_file(const std::filesystem::path& path, const VolumeFile& file);
VolumeFile read_volume_file(const std::filesystem::path& path);

VolumeFile from_labels(const LabelVolume& labels);
VolumeFile from_mask(const BinaryMask& mask);
VolumeFile from_scalar(const ScalarVolume& values, VolumeKind kind);
VolumeFile from_probs(const ProbVolume& probs);

/// num_classes defaults to max(2, largest label + 1).
LabelVolume to_labels(const VolumeFile& file, std::optional<int> num_classes = std::nullopt);
ScalarVolume to_scalar(const VolumeFile& file);
ProbVolume to_probs(const VolumeFile& file);

}  // namespace cwseg::io
