#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

namespace joinsample {

// splitmix64 finalizer: full avalanche on 64-bit input.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Seeded 64-bit hash of a byte string. Each 8-byte little-endian block is
// folded in through a full mixing round.
inline std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = mix64(seed ^ 0x51ed270b27a3c4d9ULL) ^ mix64(bytes.size());
  std::size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t block = 0;
    for (std::size_t j = 0; j < 8; ++j) {
      block |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i + j])) << (8 * j);
    }
    h = mix64(h ^ block);
  }
  if (i < bytes.size()) {
    std::uint64_t block = 0;
    for (std::size_t j = 0; i + j < bytes.size(); ++j) {
      block |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i + j])) << (8 * j);
    }
    h = mix64(h ^ block ^ 0xff51afd7ed558ccdULL);
  }
  return mix64(h);
}

// The shared universe hash h: key -> [0, 1). Both parties evaluate it with
// the same seed so that a key is kept on both sides or on neither.
inline double key_hash(std::string_view key, std::uint64_t seed) noexcept {
  return to_unit(hash_bytes(key, seed));
}

// Counter-based uniform draw in [0, 1) addressed by (seed, stream, index).
// Per-row Bernoulli decisions are therefore independent of evaluation order.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
  return to_unit(mix64(mix64(seed ^ mix64(stream + 0x2545f4914f6cdd1dULL)) + index * 0x9e3779b97f4a7c15ULL));
}

// Derives an independent child seed, e.g. per Monte-Carlo trial.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return mix64(mix64(seed + 0x632be59bd9b4e019ULL * (a + 1)) ^ mix64(b + 0x8cb92ba72f3d8dd7ULL));
}

}  // namespace joinsample
