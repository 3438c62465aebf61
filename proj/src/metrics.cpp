#include "seqinfer/metrics.hpp"

#include <cmath>
#include <map>

#include "seqinfer/errors.hpp"

namespace seqinfer {
namespace {

Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

Metric harmonic(Metric p, Metric r) {
  if (!p || !r || *p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

template <class F>
Metric macro(const ConfusionMatrix& cm, F metric) {
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c)
    if (auto m = metric(cm, c)) {
      total += *m;
      ++defined;
    }
  if (defined == 0) return std::nullopt;
  return total / static_cast<double>(defined);
}

nlohmann::json to_json(Metric m) { return m ? nlohmann::json(*m) : nlohmann::json(nullptr); }

std::vector<double> resolve_weights(std::size_t max_n, std::vector<double> weights) {
  if (max_n == 0) throw ContractError("BLEU needs N >= 1");
  if (weights.empty()) return std::vector<double>(max_n, 1.0 / static_cast<double>(max_n));
  if (weights.size() != max_n) throw ContractError("BLEU needs one weight per n-gram order");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ContractError("BLEU weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("BLEU weights must sum to 1");
  return weights;
}

std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& seq, std::size_t n) {
  std::map<TokenSeq, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[TokenSeq(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {
  if (labels_.empty()) throw ContractError("confusion matrix needs at least one label");
}

void ConfusionMatrix::add(std::size_t predicted, std::size_t actual, std::size_t count) {
  if (predicted >= labels_.size() || actual >= labels_.size()) throw ContractError("class index out of range");
  counts_[predicted * labels_.size() + actual] += count;
  total_ += count;
}

std::size_t ConfusionMatrix::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return i;
  throw ContractError("unknown label '" + label + "'");
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) c += count(i, i);
  return c;
}

std::size_t ConfusionMatrix::fp(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t a = 0; a < labels_.size(); ++a)
    if (a != c) s += count(c, a);
  return s;
}

std::size_t ConfusionMatrix::fn(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < labels_.size(); ++p)
    if (p != c) s += count(p, c);
  return s;
}

ConfusionMatrix confusion_from_pairs(std::span<const std::pair<std::string, std::string>> pairs,
                                     std::vector<std::string> labels) {
  ConfusionMatrix cm(std::move(labels));
  for (const auto& [pred, actual] : pairs) cm.add(cm.index_of(pred), cm.index_of(actual));
  return cm;
}

ConfusionMatrix confusion_from_indices(std::span<const std::size_t> predicted, std::span<const std::size_t> actual,
                                       std::vector<std::string> labels) {
  if (predicted.size() != actual.size()) throw ContractError("prediction and label counts differ");
  ConfusionMatrix cm(std::move(labels));
  for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(predicted[i], actual[i]);
  return cm;
}

Metric accuracy(const ConfusionMatrix& cm) { return ratio(cm.correct(), cm.total()); }
Metric precision(const ConfusionMatrix& cm, std::size_t c) { return ratio(cm.tp(c), cm.tp(c) + cm.fp(c)); }
Metric recall(const ConfusionMatrix& cm, std::size_t c) { return ratio(cm.tp(c), cm.tp(c) + cm.fn(c)); }
Metric f1(const ConfusionMatrix& cm, std::size_t c) { return harmonic(precision(cm, c), recall(cm, c)); }

Metric micro_precision(const ConfusionMatrix& cm) {
  std::size_t tp = 0, fp = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    tp += cm.tp(c);
    fp += cm.fp(c);
  }
  return ratio(tp, tp + fp);
}

Metric micro_recall(const ConfusionMatrix& cm) {
  std::size_t tp = 0, fn = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    tp += cm.tp(c);
    fn += cm.fn(c);
  }
  return ratio(tp, tp + fn);
}

Metric micro_f1(const ConfusionMatrix& cm) { return harmonic(micro_precision(cm), micro_recall(cm)); }
Metric macro_precision(const ConfusionMatrix& cm) { return macro(cm, precision); }
Metric macro_recall(const ConfusionMatrix& cm) { return macro(cm, recall); }
Metric macro_f1(const ConfusionMatrix& cm) { return macro(cm, f1); }

nlohmann::json metric_report(const ConfusionMatrix& cm) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < cm.num_classes(); ++c)
    per_class[cm.labels()[c]] = {{"precision", to_json(precision(cm, c))},
                                 {"recall", to_json(recall(cm, c))},
                                 {"f1", to_json(f1(cm, c))},
                                 {"support", cm.tp(c) + cm.fn(c)}};
  nlohmann::json counts = nlohmann::json::array();
  for (std::size_t p = 0; p < cm.num_classes(); ++p) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t a = 0; a < cm.num_classes(); ++a) row.push_back(cm.count(p, a));
    counts.push_back(row);
  }
  return {{"n", cm.total()},
          {"accuracy", to_json(accuracy(cm))},
          {"per_class", per_class},
          {"macro", {{"precision", to_json(macro_precision(cm))}, {"recall", to_json(macro_recall(cm))}, {"f1", to_json(macro_f1(cm))}}},
          {"micro", {{"precision", to_json(micro_precision(cm))}, {"recall", to_json(micro_recall(cm))}, {"f1", to_json(micro_f1(cm))}}},
          {"confusion", {{"labels", cm.labels()}, {"counts", counts}}}};
}

void BleuStats::accumulate(const BleuStats& other) {
  if (matches.empty()) {
    *this = other;
    return;
  }
  if (other.matches.size() != matches.size()) throw ContractError("BLEU statistics of different orders");
  for (std::size_t i = 0; i < matches.size(); ++i) {
    matches[i] += other.matches[i];
    totals[i] += other.totals[i];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
}

double BleuStats::brevity_penalty() const {
  if (candidate_length == 0) throw ContractError("BLEU of an empty candidate");
  if (candidate_length > reference_length) return 1.0;
  return std::exp(1.0 - static_cast<double>(reference_length) / static_cast<double>(candidate_length));
}

double BleuStats::score() const {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < matches.size(); ++n) {
    if (matches[n] == 0 || totals[n] == 0) return 0.0;
    log_sum += weights[n] * std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  return brevity_penalty() * std::exp(log_sum);
}

std::size_t effective_reference_length(std::size_t c, std::span<const TokenSeq> references) {
  if (references.empty()) throw ContractError("BLEU needs at least one reference");
  std::size_t best = references.front().size();
  for (const auto& ref : references) {
    const std::size_t len = ref.size();
    const std::size_t d = len > c ? len - c : c - len;
    const std::size_t db = best > c ? best - c : c - best;
    if (d < db || (d == db && len < best)) best = len;
  }
  return best;
}

BleuStats bleu_stats(const TokenSeq& candidate, std::span<const TokenSeq> references, std::size_t max_n,
                     std::vector<double> weights) {
  if (candidate.empty()) throw ContractError("BLEU of an empty candidate");
  BleuStats stats;
  stats.weights = resolve_weights(max_n, std::move(weights));
  stats.candidate_length = candidate.size();
  stats.reference_length = effective_reference_length(candidate.size(), references);
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = ngram_counts(candidate, n);
    std::map<TokenSeq, std::size_t> max_ref;
    for (const auto& ref : references)
      for (const auto& [gram, cnt] : ngram_counts(ref, n)) max_ref[gram] = std::max(max_ref[gram], cnt);
    std::size_t matched = 0, total = 0;
    for (const auto& [gram, cnt] : cand) {
      total += cnt;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(cnt, it->second);
    }
    stats.matches.push_back(matched);
    stats.totals.push_back(total);
  }
  return stats;
}

double bleu(const TokenSeq& candidate, std::span<const TokenSeq> references, std::size_t max_n,
            std::vector<double> weights) {
  return bleu_stats(candidate, references, max_n, std::move(weights)).score();
}

double corpus_bleu(std::span<const TokenSeq> candidates, std::span<const std::vector<TokenSeq>> references,
                   std::size_t max_n, std::vector<double> weights) {
  if (candidates.size() != references.size()) throw ContractError("corpus BLEU: candidate and reference counts differ");
  if (candidates.empty()) throw ContractError("corpus BLEU of an empty corpus");
  const auto w = resolve_weights(max_n, std::move(weights));
  BleuStats pooled;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].empty()) {
      pooled.accumulate(bleu_stats(candidates[i], references[i], max_n, w));
      continue;
    }
    // An empty decode adds reference length only.
    BleuStats empty;
    empty.weights = w;
    empty.matches.assign(max_n, 0);
    empty.totals.assign(max_n, 0);
    empty.reference_length = effective_reference_length(0, references[i]);
    pooled.accumulate(empty);
  }
  if (pooled.candidate_length == 0) return 0.0;
  return pooled.score();
}

}  // namespace seqinfer
