#include "cwseg/vgf.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "io/atomic_write.hpp"

namespace cwseg::io {

namespace {

constexpr std::string_view kMagic = "VGF1";

std::string_view dtype_name(DType t) { return t == DType::U8 ? "u8" : "f32"; }

std::string_view kind_name(VolumeKind k) {
  switch (k) {
    case VolumeKind::Labels: return "labels";
    case VolumeKind::Image: return "image";
    case VolumeKind::Probs: return "probs";
    case VolumeKind::Weights: return "weights";
  }
  return "?";
}

VolumeKind parse_kind(const std::string& s) {
  if (s == "labels") return VolumeKind::Labels;
  if (s == "image") return VolumeKind::Image;
  if (s == "probs") return VolumeKind::Probs;
  if (s == "weights") return VolumeKind::Weights;
  throw std::runtime_error("VGF header: unknown kind '" + s + "'");
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                             static_cast<std::uint32_t>(p[2]) << 16 |
                             static_cast<std::uint32_t>(p[3]) << 24;
  return std::bit_cast<float>(bits);
}

std::vector<double> decode_f32(const VolumeFile& file) {
  if (file.dtype != DType::F32) throw std::runtime_error("expected an f32 volume");
  std::vector<double> out(file.payload.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f32(file.payload.data() + 4 * i);
  return out;
}

}  // namespace

void write_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void VolumeFile::validate() const {
  if (channels < 1) throw std::runtime_error("VGF: channels must be >= 1");
  if (kind == VolumeKind::Labels && (dtype != DType::U8 || channels != 1))
    throw std::runtime_error("VGF: labels require dtype u8 and one channel");
  const std::size_t expect = static_cast<std::size_t>(channels) * dims.voxels() * element_size();
  if (payload.size() != expect)
    throw std::runtime_error("VGF: payload has " + std::to_string(payload.size()) +
                             " bytes, expected " + std::to_string(expect));
}

std::string encode(const VolumeFile& file) {
  file.validate();
  nlohmann::ordered_json h;
  h["magic"] = kMagic;
  h["dims"] = {file.dims.depth, file.dims.height, file.dims.width};
  h["dtype"] = dtype_name(file.dtype);
  h["channels"] = file.channels;
  h["kind"] = kind_name(file.kind);
  std::string out = h.dump();
  out.push_back('\n');
  out.append(file.payload.begin(), file.payload.end());
  return out;
}

VolumeFile decode(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw std::runtime_error("VGF: missing header terminator");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("VGF: malformed header: ") + e.what());
  }
  VolumeFile f;
  try {
    if (h.at("magic").get<std::string>() != kMagic) throw std::runtime_error("VGF: bad magic");
    const auto dims = h.at("dims");
    if (!dims.is_array() || dims.size() != 3) throw std::runtime_error("VGF: dims must have 3 entries");
    for (const auto& d : dims)
      if (!d.is_number_unsigned()) throw std::runtime_error("VGF: dims must be positive integers");
    try {
      f.dims = Dims(dims[0].get<std::size_t>(), dims[1].get<std::size_t>(), dims[2].get<std::size_t>());
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string("VGF: ") + e.what());
    }
    const auto dtype = h.at("dtype").get<std::string>();
    if (dtype == "u8")
      f.dtype = DType::U8;
    else if (dtype == "f32")
      f.dtype = DType::F32;
    else
      throw std::runtime_error("VGF: unknown dtype '" + dtype + "'");
    f.channels = h.at("channels").get<int>();
    f.kind = parse_kind(h.at("kind").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("VGF: malformed header: ") + e.what());
  }
  if (f.channels < 1) throw std::runtime_error("VGF: channels must be >= 1");
  const std::size_t per_voxel = f.element_size() * static_cast<std::size_t>(f.channels);
  if (f.dims.voxels() > std::numeric_limits<std::size_t>::max() / per_voxel)
    throw std::runtime_error("VGF: dims overflow the payload size");
  const auto payload = bytes.substr(nl + 1);
  f.payload.assign(payload.begin(), payload.end());
  f.validate();
  return f;
}

void write_volume_file(const std::filesystem::path& path, const VolumeFile& file) {
  write_atomic(path, encode(file));
}

VolumeFile read_volume_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

VolumeFile from_labels(const LabelVolume& labels) {
  return {labels.dims(), DType::U8, 1, VolumeKind::Labels,
          std::vector<std::uint8_t>(labels.labels().begin(), labels.labels().end())};
}

VolumeFile from_mask(const BinaryMask& mask) {
  return {mask.dims(), DType::U8, 1, VolumeKind::Labels,
          std::vector<std::uint8_t>(mask.bits().begin(), mask.bits().end())};
}

VolumeFile from_scalar(const ScalarVolume& values, VolumeKind kind) {
  VolumeFile f{values.dims(), DType::F32, 1, kind, {}};
  f.payload.reserve(values.values().size() * 4);
  for (double v : values.values()) put_f32(f.payload, static_cast<float>(v));
  return f;
}

VolumeFile from_probs(const ProbVolume& probs) {
  VolumeFile f{probs.dims(), DType::F32, probs.num_classes(), VolumeKind::Probs, {}};
  f.payload.reserve(probs.values().size() * 4);
  for (double v : probs.values()) put_f32(f.payload, static_cast<float>(v));
  return f;
}

LabelVolume to_labels(const VolumeFile& file, std::optional<int> num_classes) {
  file.validate();
  if (file.kind != VolumeKind::Labels) throw std::runtime_error("expected a labels volume");
  const int max_label = file.payload.empty()
                            ? 0
                            : *std::max_element(file.payload.begin(), file.payload.end());
  const int classes = num_classes.value_or(std::max(2, max_label + 1));
  if (max_label >= classes)
    throw std::runtime_error("label " + std::to_string(max_label) + " exceeds " +
                             std::to_string(classes) + " classes");
  return LabelVolume(file.dims, file.payload, classes);
}

ScalarVolume to_scalar(const VolumeFile& file) {
  file.validate();
  if (file.channels != 1) throw std::runtime_error("expected a single-channel volume");
  return ScalarVolume(file.dims, decode_f32(file));
}

ProbVolume to_probs(const VolumeFile& file) {
  file.validate();
  if (file.kind != VolumeKind::Probs) throw std::runtime_error("expected a probs volume");
  try {
    return ProbVolume(file.dims, file.channels, decode_f32(file));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
}

}  // namespace cwseg::io
