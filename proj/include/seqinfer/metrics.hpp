#pragma once

// Classification metrics over a confusion matrix, and BLEU.
//
// A metric whose denominator is zero is reported as std::nullopt
// ("undefined"), never as 0.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace seqinfer {

using Metric = std::optional<double>;

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels);

  void add(std::size_t predicted, std::size_t actual, std::size_t count = 1);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t num_classes() const { return labels_.size(); }
  std::size_t index_of(const std::string& label) const;
  std::size_t count(std::size_t predicted, std::size_t actual) const { return counts_[predicted * labels_.size() + actual]; }
  std::size_t total() const { return total_; }
  std::size_t correct() const;

  // One-vs-rest views for class c.
  std::size_t tp(std::size_t c) const { return count(c, c); }
  std::size_t fp(std::size_t c) const;
  std::size_t fn(std::size_t c) const;
  std::size_t tn(std::size_t c) const { return total_ - tp(c) - fp(c) - fn(c); }

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;  // [predicted][actual]
  std::size_t total_ = 0;
};

// Pairs are (predicted, actual). Throws ContractError on unknown labels.
ConfusionMatrix confusion_from_pairs(std::span<const std::pair<std::string, std::string>> pairs,
                                     std::vector<std::string> labels);
ConfusionMatrix confusion_from_indices(std::span<const std::size_t> predicted, std::span<const std::size_t> actual,
                                       std::vector<std::string> labels);

Metric accuracy(const ConfusionMatrix& cm);
Metric precision(const ConfusionMatrix& cm, std::size_t c);
Metric recall(const ConfusionMatrix& cm, std::size_t c);
// 2PR / (P + R); undefined when P or R is, or when P + R == 0.
Metric f1(const ConfusionMatrix& cm, std::size_t c);

// Pooled counts over classes.
Metric micro_precision(const ConfusionMatrix& cm);
Metric micro_recall(const ConfusionMatrix& cm);
Metric micro_f1(const ConfusionMatrix& cm);
// Mean over classes where the metric is defined.
Metric macro_precision(const ConfusionMatrix& cm);
Metric macro_recall(const ConfusionMatrix& cm);
Metric macro_f1(const ConfusionMatrix& cm);

// Keys: n, accuracy, per_class{label: precision, recall, f1, support},
// macro{precision, recall, f1}, micro{...}, confusion{labels, counts}.
// counts[p][a] rows are predicted labels. Undefined metrics are null.
nlohmann::json metric_report(const ConfusionMatrix& cm);

using TokenSeq = std::vector<std::string>;

struct BleuStats {
  std::vector<std::size_t> matches;  // clipped n-gram matches, n = 1..N
  std::vector<std::size_t> totals;   // candidate n-gram counts
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
  std::vector<double> weights;

  void accumulate(const BleuStats& other);
  double brevity_penalty() const;
  double score() const;
};

// Closest reference length to c; ties go to the shorter reference.
std::size_t effective_reference_length(std::size_t c, std::span<const TokenSeq> references);

BleuStats bleu_stats(const TokenSeq& candidate, std::span<const TokenSeq> references, std::size_t max_n = 4,
                     std::vector<double> weights = {});

// BP * exp(sum w_n log p_n); BP = 1 if c > r else exp(1 - r/c); 0 if any p_n is 0.
double bleu(const TokenSeq& candidate, std::span<const TokenSeq> references, std::size_t max_n = 4,
            std::vector<double> weights = {});

// Pools statistics across the corpus before combining.
double corpus_bleu(std::span<const TokenSeq> candidates, std::span<const std::vector<TokenSeq>> references,
                   std::size_t max_n = 4, std::vector<double> weights = {});

}  // namespace seqinfer
