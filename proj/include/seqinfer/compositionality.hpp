#pragma once

// Contextual phrase compositionality scoring.
//
// A phrase representation is a context-weighted sum of its token vectors,
// unit normalised. The score of a phrase is the mean cosine similarity
// between its representation and the representations of its one-token
// perturbations.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace seqinfer {

using Tokens = std::vector<std::string>;

class EmbeddingStore {
 public:
  // `word v1 ... vd` per line. Duplicate words: last wins, counted.
  static EmbeddingStore load(std::istream& in);
  static EmbeddingStore load_file(const std::string& path);

  void insert(const std::string& word, std::vector<double> vec);
  std::size_t size() const { return vectors_.size(); }
  // Throws LookupError when empty, since the dimension is undefined.
  std::size_t dimension() const;
  bool contains(const std::string& word) const { return vectors_.count(word) != 0; }
  // Throws LookupError for unknown words.
  const std::vector<double>& lookup(const std::string& word) const;
  std::size_t duplicate_count() const { return duplicates_; }

  EmbeddingStore rescaled(double factor) const;
  const std::unordered_map<std::string, std::vector<double>>& vectors() const { return vectors_; }

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::optional<std::size_t> dim_;
  std::size_t duplicates_ = 0;
};

struct PhraseContext {
  Tokens usage_scenario;
  std::vector<std::pair<std::string, double>> global_context;
  double lambda = 0.5;

  void validate() const;
};

struct PerturbationSet {
  Tokens phrase;
  std::vector<Tokens> variants;

  // Each variant has the phrase's length and differs in exactly one position.
  void validate() const;
};

// Per-token weights: w = w_global + lambda * (w_scenario - w_global), where
// w_scenario is the token's scenario frequency normalised over the phrase
// and w_global its context weight normalised over the phrase. Absent
// evidence falls back to uniform weights.
std::vector<double> token_weights(const Tokens& phrase, const PhraseContext& ctx);

std::vector<double> phrase_vector(const Tokens& phrase, const EmbeddingStore& store, const PhraseContext& ctx);

double cosine(std::span<const double> a, std::span<const double> b);

double compositionality_score(const PerturbationSet& set, const EmbeddingStore& store, const PhraseContext& ctx);

// One JSON-lines phrase task.
struct PhraseTask {
  PerturbationSet perturbations;
  PhraseContext context;
};

std::vector<PhraseTask> read_phrase_tasks(std::istream& in);
std::vector<PhraseTask> read_phrase_tasks_file(const std::string& path);

// `phrase<TAB>score` per task; phrase tokens joined by single spaces.
void write_scores(std::ostream& out, const std::vector<PhraseTask>& tasks, const EmbeddingStore& store);

}  // namespace seqinfer
