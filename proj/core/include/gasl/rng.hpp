#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gasl {

/// 64-bit FNV-1a over an arbitrary byte range.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

/// Child seed for a named component, so modules draw from decoupled streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view component) {
  std::uint64_t h = fnv1a64(&parent, sizeof(parent));
  return fnv1a64(component, h);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace gasl
