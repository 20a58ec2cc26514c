#pragma once

#include <cstdint>
#include <string_view>

namespace phg {

// Deterministic splitmix64 stream. All randomness in the project flows from
// one master seed through named substreams so that runs sharing a seed see
// identical draws regardless of which components are enabled.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Derive an independent stream keyed by a label.
  Rng substream(std::string_view name) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
      h ^= static_cast<uint8_t>(c);
      h *= 0x100000001b3ULL;
    }
    Rng r(state_ ^ h);
    r.next_u64();  // decorrelate from the parent state
    return r;
  }

 private:
  uint64_t state_;
};

}  // namespace phg
