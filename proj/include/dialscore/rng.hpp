#pragma once

#include <cstdint>
#include <cmath>

namespace dialscore {

// Counter-based splitmix64 stream. One 64-bit word of state, so streams are
// trivial to serialize and to derive per-id child streams from.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; consumes two uniforms per call, no cached second value.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Independent stream derived from this stream's seed and an id.
  RngStream child(std::uint64_t id) const {
    std::uint64_t z = state_ ^ (id * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
    z = (z ^ (z >> 29)) * 0xFF51AFD7ED558CCDULL;
    z = (z ^ (z >> 32)) * 0xC4CEB9FE1A85EC53ULL;
    return RngStream(z ^ (z >> 32));
  }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace dialscore
