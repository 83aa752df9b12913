#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace celllab {

/// Seeded random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard)
/// and does its own uniform/normal conversion, so a given seed yields the
/// same draws on every standard library. Sub-streams are derived from the
/// seed and a name, never from the parent's position, which keeps modules
/// independently reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller, cached second variate).
  double normal();
  double normal(double mean, double sd);
  bool bernoulli(double p);
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  Rng substream(std::string_view name) const;
  Rng substream(std::string_view name, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace celllab
