#pragma once

#include "vpcl/types.hpp"

#include <cstdint>
#include <string_view>

namespace vpcl {

// SplitMix64 step (Steele, Lea, Flood 2014): constants 0x9e3779b97f4a7c15,
// 0xbf58476d1ce4e5b9, 0x94d049bb133111eb.
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic child seed for a named stream of a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0);

// xoshiro256** 1.0 (Blackman, Vigna), state filled from SplitMix64(seed).
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  explicit Xoshiro256(std::uint64_t seed);
  std::uint64_t operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }

 private:
  std::uint64_t s_[4];
};

// Pinned variate transforms. Only IEEE sqrt and libm log/pow are used, so the
// stream is reproducible wherever those agree.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  // (0, 1) with 53 random bits, never exactly 0.
  double uniform();
  // Marsaglia polar method; the second variate of each pair is cached.
  double normal();
  // Marsaglia-Tsang; shapes below 1 use the U^(1/a) boost.
  double gamma(double shape);
  double beta(double a, double b);
  Vec3 normal3();
  Vec3 unit_vector();
  // Uniform in the unit ball by rejection from the cube.
  Vec3 in_unit_ball();

 private:
  Xoshiro256 rng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace vpcl
