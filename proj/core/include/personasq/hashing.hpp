#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace personasq {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a. Stable across platforms; used for seeding and feature hashing.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Deterministic PRNG stream (splitmix64). Unlike std::uniform_int_distribution,
/// outputs are identical across standard library implementations, which keeps
/// sampled goals and dataset splits byte-stable in golden files.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;

  /// Uniform integer in [0, bound), bound > 0, via rejection sampling.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  std::uint64_t state_;
};

/// Mixes a base seed with string labels into a derived seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view a, std::string_view b = {}) noexcept;

}  // namespace personasq
