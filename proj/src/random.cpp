#include "voi_twin/random.hpp"

namespace voi_twin {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view subsystem,
                          std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = fnv_mix(kFnvOffset, master);
  for (unsigned char c : subsystem) {
    h ^= c;
    h *= kFnvPrime;
  }
  for (std::uint64_t k : keys) h = fnv_mix(h, k);
  // One SplitMix64 round so nearby keys land far apart.
  Rng finisher(h);
  return finisher();
}

}  // namespace voi_twin
