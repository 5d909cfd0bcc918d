#pragma once

#include <cstdint>
#include <random>

namespace ecodrive {

/// splitmix64 finalizer; used to derive independent sub-seeds from one base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Sub-seed for stream `index` of `base`. Every stochastic component draws from
/// its own derived stream, so results do not depend on scheduling or call order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 1));
}

/// mt19937_64 with portable helpers. std::uniform_*_distribution output is
/// implementation-defined; these draws are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, n). Modulo bias is negligible for the small n used here.
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [lo, hi], inclusive.
  int range_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1)));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ecodrive
