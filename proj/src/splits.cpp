#include "seqinfer/splits.hpp"

#include <algorithm>
#include <cmath>

#include "seqinfer/errors.hpp"
#include "seqinfer/random.hpp"

namespace seqinfer {

DataSplit split_dataset(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ContractError("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split ratios must sum to 1");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
      if (frac[i] > frac[best]) best = i;
    ++sizes[best];
    frac[best] = -1.0;
    ++assigned;
  }
  for (std::size_t i = 0; i < 3; ++i)
    if (ratios[i] > 0.0 && sizes[i] == 0)
      throw ContractError("too few samples (" + std::to_string(n) + ") for every non-zero split part");

  Rng rng(seed);
  const auto perm = rng.permutation(n);
  DataSplit out;
  auto take = [&](std::vector<std::size_t>& part, std::size_t from, std::size_t count) {
    part.assign(perm.begin() + static_cast<std::ptrdiff_t>(from), perm.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(part.begin(), part.end());
  };
  take(out.train, 0, sizes[0]);
  take(out.val, sizes[0], sizes[1]);
  take(out.test, sizes[0] + sizes[1], sizes[2]);
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (auto f : fold_of) ++sizes[f];
  return sizes;
}

FoldSplit FoldAssignment::split(std::size_t i) const {
  if (i >= k) throw ContractError("fold index out of range");
  FoldSplit s;
  for (std::size_t idx = 0; idx < fold_of.size(); ++idx) (fold_of[idx] == i ? s.val : s.train).push_back(idx);
  return s;
}

std::vector<FoldSplit> FoldAssignment::splits() const {
  std::vector<FoldSplit> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(split(i));
  return out;
}

FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ContractError("k-fold needs k >= 2, got " + std::to_string(k));
  if (k > n) throw ContractError("k-fold needs k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of.assign(n, 0);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) fa.fold_of[perm[pos++]] = f;
  }
  return fa;
}

double cross_validation_score(std::span<const double> fold_scores) {
  if (fold_scores.empty()) throw ContractError("no fold scores");
  double total = 0.0;
  for (double s : fold_scores) total += s;
  return total / static_cast<double>(fold_scores.size());
}

}  // namespace seqinfer
