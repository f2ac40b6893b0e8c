#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>

namespace openpimd {

// xoshiro256** with splitmix64 seeding. Hand-rolled so that trajectories are
// reproducible bit-for-bit across platforms and across checkpoint restarts;
// the standard-library distributions do not guarantee either.
class Rng {
 public:
  Rng() : Rng(0x9e3779b97f4a7c15ULL) {}

  explicit Rng(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& word : state_) {
      z += 0x9e3779b97f4a7c15ULL;
      std::uint64_t w = z;
      w = (w ^ (w >> 30)) * 0xbf58476d1ce4e5b9ULL;
      w = (w ^ (w >> 27)) * 0x94d049bb133111ebULL;
      word = w ^ (w >> 31);
    }
    has_spare_ = false;
    spare_ = 0.0;
  }

  // Independent stream for walker `index` derived from a master seed; changing
  // the walker count never aliases streams.
  static Rng for_stream(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t z = master_seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in (0, 1]; never returns 0 so log() is safe.
  double uniform() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via polar Box-Muller with a cached spare.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace openpimd
