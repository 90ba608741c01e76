#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace cmag::rng {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of a tag string.
constexpr std::uint64_t tag(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based random stream keyed by (seed, tag). Every draw is a pure
/// function of (key, i, j), so results never depend on call order or on how
/// work is split across threads.
class Stream {
 public:
  constexpr Stream(std::uint64_t seed, std::uint64_t stream_tag) noexcept
      : key_(mix64(mix64(seed) ^ mix64(stream_tag + 0x632BE59BD9B4E019ULL))) {}
  constexpr Stream(std::uint64_t seed, std::string_view stream_tag) noexcept
      : Stream(seed, tag(stream_tag)) {}

  constexpr Stream derive(std::uint64_t sub) const noexcept {
    Stream s = *this;
    s.key_ = mix64(key_ ^ mix64(sub ^ 0xD1B54A32D192ED03ULL));
    return s;
  }

  constexpr std::uint64_t bits(std::uint64_t i, std::uint64_t j = 0) const noexcept {
    return mix64(key_ ^ mix64(i ^ mix64(j + 0x8CB92BA72F3D8DD7ULL)));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t i, std::uint64_t j = 0) const noexcept {
    return static_cast<double>(bits(i, j) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Multiply-shift reduction; n must be > 0.
  std::uint64_t below(std::uint64_t n, std::uint64_t i, std::uint64_t j = 0) const noexcept {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(bits(i, j)) * static_cast<unsigned __int128>(n);
    return static_cast<std::uint64_t>(wide >> 64);
  }

  /// Standard normal via Box-Muller on two counter draws.
  double normal(std::uint64_t i, std::uint64_t j = 0) const noexcept {
    const double u1 = 1.0 - uniform(i, 2 * j);  // (0, 1]
    const double u2 = uniform(i, 2 * j + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

/// In-place Fisher-Yates shuffle where the draw at position i is stream(i).
template <typename Vec>
void shuffle(Vec& v, const Stream& stream) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.below(i, i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace cmag::rng
