#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "cwseg/trainkit.hpp"
#include "io/atomic_write.hpp"

// Layout (all integers and reals little-endian):
//   magic "CWSEGMDL" | u32 version | u32 features | u32 hidden | u32 classes |
//   u32 variant | f64 contour_gain | f64 lambda | u32 iterations |
//   u64 parameter count | f64 parameters...

namespace cwseg::trainkit {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'W', 'S', 'E', 'G', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  if (pos + sizeof(U) > in.size()) throw std::runtime_error("checkpoint truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return std::bit_cast<T>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TinyModel& model,
                     const CheckpointMeta& meta) {
  std::string out(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, FeatureVolume::kChannels);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_classes()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.variant));
  put<double>(out, meta.contour_gain);
  put<double>(out, meta.lambda);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.iterations));
  put<std::uint64_t>(out, model.params().size());
  for (double p : model.params()) put<double>(out, p);
  io::write_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < kMagic.size() || std::memcmp(in.data(), kMagic.data(), kMagic.size()) != 0)
    throw std::runtime_error("not a model checkpoint: " + path.string());
  std::size_t pos = kMagic.size();
  if (take<std::uint32_t>(in, pos) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  if (take<std::uint32_t>(in, pos) != FeatureVolume::kChannels)
    throw std::runtime_error("checkpoint feature count mismatch");
  const auto hidden = static_cast<int>(take<std::uint32_t>(in, pos));
  const auto classes = static_cast<int>(take<std::uint32_t>(in, pos));
  CheckpointMeta meta;
  const auto variant = take<std::uint32_t>(in, pos);
  if (variant > static_cast<std::uint32_t>(LossVariant::CEDL))
    throw std::runtime_error("checkpoint has an unknown loss variant");
  meta.variant = static_cast<LossVariant>(variant);
  meta.contour_gain = take<double>(in, pos);
  meta.lambda = take<double>(in, pos);
  meta.iterations = static_cast<int>(take<std::uint32_t>(in, pos));
  const auto count = take<std::uint64_t>(in, pos);
  if (classes < 2 || hidden < 1 || count != TinyModel::param_count(classes, hidden))
    throw std::runtime_error("checkpoint parameter count does not match its shape");
  if (in.size() != pos + count * 8) throw std::runtime_error("checkpoint length mismatch");
  std::vector<double> params(count);
  for (auto& p : params) p = take<double>(in, pos);
  return {TinyModel(classes, hidden, std::move(params)), meta};
}

}  // namespace cwseg::trainkit
