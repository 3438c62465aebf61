#pragma once

// Training loop, evaluation, cross-validation and gradient checking.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqinfer/harness/config.hpp"
#include "seqinfer/harness/dataset.hpp"
#include "seqinfer/harness/models.hpp"
#include "seqinfer/metrics.hpp"

namespace seqinfer::harness {

struct DataSplits {
  LabeledDataset train;
  std::optional<LabeledDataset> val;
  std::optional<LabeledDataset> test;
};

// Files named in the config, or the synthetic section.
DataSplits load_splits(const ExperimentConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  Metric val_metric;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<EpochRecord> history;
};

// Minibatch SGD on the mean sample loss. Throws StateError when the loss
// stops being finite.
TrainResult train(const ExperimentConfig& cfg, const LabeledDataset& train_data, const LabeledDataset* val = nullptr);

struct Evaluation {
  nlohmann::json report;
  std::vector<std::string> predicted;
  std::vector<std::string> actual;
  Metric headline;  // accuracy, or corpus BLEU for seq2seq
};

// Classification: metric_report. seq2seq: n, bleu, exact_match, token_accuracy.
Evaluation evaluate(const Model& model, const LabeledDataset& data);

struct CrossValidation {
  nlohmann::json report;
  std::vector<std::string> predicted;  // out-of-fold, per sample
  std::vector<std::string> actual;
};

CrossValidation cross_validate(const ExperimentConfig& cfg, const LabeledDataset& data, std::size_t k);

// Small fixed inputs (n <= 8) for the config's task.
LabeledDataset gradcheck_samples(TaskKind task);

// Central differences against backward() for every parameter group.
// Keys: model, task, step, groups[{name, size, max_rel_error}], frozen[names],
// worst, tolerance, pass.
nlohmann::json gradcheck_report(const ExperimentConfig& cfg, double step = 1e-5, double tolerance = 1e-4);

void write_predictions(std::ostream& out, const std::vector<std::string>& predicted,
                       const std::vector<std::string>& actual);
void write_history(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace seqinfer::harness
