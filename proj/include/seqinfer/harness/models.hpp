#pragma once

// Trainable models for every configured model kind, plus the toy
// encoder-decoder for seq2seq tasks.

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqinfer/attention.hpp"
#include "seqinfer/compositionality.hpp"
#include "seqinfer/encoders.hpp"
#include "seqinfer/harness/config.hpp"
#include "seqinfer/harness/dataset.hpp"

namespace seqinfer::harness {

constexpr const char* kBos = "<bos>";
constexpr const char* kEos = "<eos>";

// Everything needed to rebuild a model's parameter layout.
struct Blueprint {
  ExperimentConfig config;
  Vocabulary words;
  Vocabulary deprels;
  Vocabulary pos;
  std::vector<std::string> labels;

  static Blueprint from_data(const ExperimentConfig& cfg, const LabeledDataset& train);
};

class Model {
 public:
  explicit Model(Blueprint bp) : bp_(std::move(bp)) {}
  virtual ~Model() = default;

  virtual Tensor loss(const Sample& s) const = 0;
  // Predicted label, or the greedy decode joined by spaces.
  virtual std::string predict(const Sample& s) const = 0;

  const Blueprint& blueprint() const { return bp_; }
  const ExperimentConfig& config() const { return bp_.config; }
  const ParamList& params() const { return params_; }
  std::vector<Tensor> trainable() const;
  std::vector<std::string> frozen_groups() const;

  nlohmann::json save() const;

 protected:
  Blueprint bp_;
  ParamList params_;
};

std::unique_ptr<Model> build_model(const Blueprint& bp, Rng& rng, const EmbeddingStore* pretrained = nullptr);
std::unique_ptr<Model> load_model(const nlohmann::json& j);
std::unique_ptr<Model> load_model_file(const std::string& path);
void save_model_file(const Model& model, const std::string& path);

// Whether the model reads dependency trees from the samples.
bool needs_trees(const ExperimentConfig& cfg);

}  // namespace seqinfer::harness
