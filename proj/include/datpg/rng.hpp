#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>

namespace datpg {

// Stateless counter-based generator: every draw is a pure function of
// (seed, stream, counters), so results do not depend on evaluation order or
// thread count.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t bits(std::initializer_list<std::uint64_t> counters) const {
    std::uint64_t h = key_;
    for (std::uint64_t c : counters) h = mix(h ^ mix(c + 0x9e3779b97f4a7c15ULL));
    return h;
  }

  // Uniform in (0, 1), clamped away from the endpoints by `margin`.
  double uniform(std::initializer_list<std::uint64_t> counters,
                 double margin = 1e-12) const {
    const double u =
        static_cast<double>(bits(counters) >> 11) * 0x1.0p-53;
    return std::clamp(u, margin, 1.0 - margin);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
};

}  // namespace datpg
