#pragma once

#include <cstdint>

#include "sgdstab/types.hpp"

namespace sgdstab {

// SplitMix64 finalizer. Stateless, so streams can be addressed by counter.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Small deterministic generator used for data/task/direction sampling.
// Hand-rolled (Box-Muller for normals) so results are identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1) with 53 random bits
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_normal();
  Vector normal_vector(int n);
  Vector unit_vector(int n);
  // uniform in the closed ball of given radius
  Vector ball_point(int n, double radius);
  // orthonormal n x k frame from a QR of a Gaussian matrix
  Matrix orthonormal_frame(int n, int k);

  // bounded uniform integer in [0, m) via 128-bit multiply (bias < m / 2^64)
  int next_below(int m) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(m)) >> 64);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Randomness source of the seeded dynamics: a master seed plus a shift
// offset. index_at(n) is the training-example index used by step n; shifting
// the stream by k steps is O(1) and exact, so shift(a).shift(b) ==
// shift(a + b) holds by construction.
struct SeedStream {
  std::uint64_t master_seed = 0;
  std::uint64_t shift_offset = 0;

  // 0-based factor index for step n (n = 1 is the first step)
  int index_at(std::uint64_t n, int num_choices) const {
    std::uint64_t h = mix64(master_seed ^ mix64(shift_offset + n));
    return static_cast<int>((static_cast<unsigned __int128>(h) *
                             static_cast<unsigned __int128>(num_choices)) >> 64);
  }

  SeedStream shift(std::uint64_t k) const { return {master_seed, shift_offset + k}; }

  static SeedStream for_trial(std::uint64_t master, std::uint64_t trial) {
    return {hash_combine(master, trial), 0};
  }
};

}  // namespace sgdstab
