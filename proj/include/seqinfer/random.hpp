#pragma once

// Platform-independent seeded randomness.
//
// std::mt19937_64 is bit-specified by the standard, but the standard
// distributions are not, so every draw here is derived from raw 64-bit
// engine outputs:
//   uniform01()      = (raw >> 11) * 2^-53
//   below(n)         = rejection sampling on raw % n, rejecting raw values
//                      >= 2^64 - (2^64 mod n)
//   shuffle(v)       = Fisher-Yates from the back: for i = n-1 .. 1,
//                      swap(v[i], v[below(i + 1)])

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace seqinfer {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::size_t below(std::size_t n);

  template <class T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    shuffle(std::span<T>(v));
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace seqinfer
