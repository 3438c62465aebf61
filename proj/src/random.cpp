#include "seqinfer/random.hpp"

#include <numeric>

#include "seqinfer/errors.hpp"

namespace seqinfer {

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw ContractError("Rng::below(0)");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // 2^64 mod n, computed without overflow.
  const std::uint64_t rem = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = engine_();
    if (rem == 0 || x < 0 - rem) return static_cast<std::size_t>(x % bound);
  }
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  shuffle(v);
  return v;
}

}  // namespace seqinfer
