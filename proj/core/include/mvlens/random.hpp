#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace mvlens {

/// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Sub-seed for a named purpose. Stable across platforms and releases.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) noexcept;

/// Sub-seed for the i-th independent stream (permutation trial, query, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// Random source whose outputs are identical on every standard library.
///
/// std::uniform_int_distribution, std::normal_distribution and std::shuffle
/// are implementation-defined, so draws are derived from the raw mt19937_64
/// stream here instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);

  /// Standard normal deviate (Marsaglia polar method).
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mvlens
