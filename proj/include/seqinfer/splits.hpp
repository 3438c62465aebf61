#pragma once

// Seeded train/validation/test splitting and k-fold cross-validation.
// Shuffles use seqinfer::Rng, so splits are reproducible across platforms.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace seqinfer {

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Part sizes use largest remainders (ties to the earlier part) so they sum
// to n. Each part is sorted ascending.
DataSplit split_dataset(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

struct FoldAssignment {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold_of;  // per sample

  std::size_t num_samples() const { return fold_of.size(); }
  std::vector<std::size_t> fold_sizes() const;
  // Fold i as validation, the remaining folds as training; both ascending.
  FoldSplit split(std::size_t i) const;
  std::vector<FoldSplit> splits() const;
};

// Shuffle, then deal the permutation into k contiguous folds; the first
// n % k folds get one extra sample.
FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

// Arithmetic mean of per-fold validation scores.
double cross_validation_score(std::span<const double> fold_scores);

}  // namespace seqinfer
