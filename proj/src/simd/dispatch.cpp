#include <cstdlib>
#include <stdexcept>
#include <string>

#include "simd/kernels_internal.hpp"

namespace cwseg::simd {
namespace {

bool cpu_has_avx2() {
#if defined(CWSEG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& select() {
  const char* forced = std::getenv("CWSEG_SIMD");
  if (forced && std::string(forced) == "scalar") return detail::scalar_table();
#if defined(CWSEG_HAVE_AVX2)
  if (cpu_has_avx2()) return detail::avx2_table();
#endif
  return detail::scalar_table();
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

const KernelTable& kernels() {
  static const KernelTable& table = select();
  return table;
}

const KernelTable& kernels_for(Isa isa) {
  if (isa == Isa::Scalar) return detail::scalar_table();
#if defined(CWSEG_HAVE_AVX2)
  if (isa == Isa::Avx2 && cpu_has_avx2()) return detail::avx2_table();
#endif
  throw std::runtime_error("ISA not available on this machine: " + std::string(isa_name(isa)));
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out{Isa::Scalar};
  if (cpu_has_avx2()) out.push_back(Isa::Avx2);
  return out;
}

}  // namespace cwseg::simd
