#pragma once

#include <cstdint>
#include <random>

namespace r2d2 {

// Seedable source of uniform and standard-normal variates. Single owner:
// parallel work gets its own stream through split(), never a shared one.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Independent, reproducible sub-stream for (seed, index).
  RandomStream split(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal (Marsaglia polar method, spare value cached).
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace r2d2
