#pragma once

// Labelled datasets in JSON lines, token vocabularies and synthetic tasks.
//
// One JSON object per line. Text fields are a string (split on whitespace)
// or a token array.
//   classification:  {"text", "label"}
//   pair_inference:  {"text1", "text2", "label"}
//   relation:        {"text", "e1": [first, last], "e2": [first, last], "label"}  (1-based, inclusive)
//   seq2seq_toy:     {"source", "target"}
// Optional parse fields: "heads", "deprels", "pos" (and "heads2", "deprels2",
// "pos2" for the second text of a pair).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqinfer/compositionality.hpp"
#include "seqinfer/dependency.hpp"
#include "seqinfer/harness/config.hpp"

namespace seqinfer::harness {

struct Sample {
  Tokens tokens;
  Tokens tokens2;
  std::optional<DependencyTree> tree;
  std::optional<DependencyTree> tree2;
  Span e1, e2;
  Tokens target;
  std::string label;
  std::size_t line = 0;
};

struct LabeledDataset {
  TaskKind task = TaskKind::classification;
  std::vector<Sample> samples;
  std::vector<std::string> labels;  // sorted, unique

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  // Throws ContractError for labels outside the vocabulary.
  std::size_t label_index(const std::string& label) const;
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  void refresh_labels();
};

LabeledDataset read_jsonl_dataset(std::istream& in, TaskKind task);
LabeledDataset load_jsonl_dataset(const std::string& path, TaskKind task);
void write_jsonl_dataset(std::ostream& out, const LabeledDataset& data);

// Index 0 is the unknown token.
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";

  Vocabulary();
  static Vocabulary build(const std::vector<Tokens>& corpora, const std::vector<std::string>& reserved = {});

  std::size_t size() const { return words_.size(); }
  std::size_t id(const std::string& word) const;  // unknown words map to 0
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::vector<std::size_t> ids(const Tokens& tokens) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

struct SyntheticSpec {
  std::string task;  // marker_window | copy | reverse
  std::size_t size = 0;
  std::size_t length = 12;
  std::size_t vocab = 8;
  std::size_t window = 2;
  std::uint64_t seed = 7;
};

// marker_window: one anchor token "A" and one marker token "M" among fillers;
// label "1" iff |pos(A) - pos(M)| <= window. copy/reverse: seq2seq pairs
// over tokens w0..w{vocab-1}.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace seqinfer::harness
