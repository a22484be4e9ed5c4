#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ehrd3pm/types.hpp"

namespace ehrd3pm {

// splitmix64 step; also used as the seed-mixing primitive for substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0xD1B54A32D192ED03ull * (stream + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

// Counter-based generator: cheap to fork into independent substreams so that
// parallel and serial traversals of a record set draw identical values.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller, one draw per call
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // index into a probability row (assumed normalized); clamps to last category
  int categorical(const double* p, int k) {
    double u = uniform01();
    double acc = 0.0;
    for (int j = 0; j < k - 1; ++j) {
      acc += p[j];
      if (u < acc) return j;
    }
    return k - 1;
  }

  int uniform_int(int n) { // in [0, n)
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  template <class T>
  void shuffle(std::vector<T>& v) { // Fisher-Yates
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

  Rng substream(std::uint64_t index) const { return Rng(derive_seed(state_, index)); }

private:
  std::uint64_t state_;
};

} // namespace ehrd3pm
