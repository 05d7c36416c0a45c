#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace lhb {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a, used to turn names into stream keys.
constexpr std::uint64_t hash_name(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// Well-known stream ids. Each (seed, stream, counter) triple yields an
// independent generator, so draws never depend on call order elsewhere.
enum class Stream : std::uint64_t {
  setup = 1,
  contexts = 2,
  noise = 3,
  ties = 4,
  agent = 5,
  trial = 6,
};

// Counter-keyed SplitMix64 generator; satisfies UniformRandomBitGenerator.
class KeyedRng {
 public:
  using result_type = std::uint64_t;

  explicit KeyedRng(std::uint64_t seed) noexcept : state_(mix64(seed)) {}
  KeyedRng(std::uint64_t seed, Stream stream, std::uint64_t counter) noexcept
      : state_(combine_keys(combine_keys(seed, static_cast<std::uint64_t>(stream)), counter)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) built from the top 53 bits.
  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace lhb
