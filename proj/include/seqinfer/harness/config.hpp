#pragma once

// Experiment configuration, read from and written to JSON.
//
// {
//   "model": "transformer_masked",         rnn | cnn_multiscale | transformer_concat | transformer_masked |
//                                          transformer_gated | ms_encoder | block_relation
//   "task": "classification",              classification | pair_inference | relation | seq2seq_toy | compositionality
//   "dims": {"d_model": 16, "d_k": 8, "heads": 2, "layers": 1, "d_ff": 32,
//            "kernel_sizes": [1, 2, 3], "filters": 8, "tag_dim": 4},
//   "roles": "roles.tsv",                  per-head role file, or
//   "role_list": ["local:2", "self"],      inline roles (one per head)
//   "positional": true,
//   "training": {"epochs": 10, "learning_rate": 0.1, "seed": 1, "batch_size": 0},
//   "data": {"train": "train.jsonl", "val": "", "test": "", "embeddings": "", "freeze_embeddings": false},
//   "synthetic": {"task": "marker_window", "train_size": 1000, "val_size": 200, "test_size": 0,
//                 "length": 12, "vocab": 8, "window": 2, "seed": 7}
// }
//
// Paths are relative to the directory holding the config file. batch_size 0
// means the whole training set when it has at most 256 samples, else 32.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqinfer/attention.hpp"

namespace seqinfer::harness {

enum class ModelKind { rnn, cnn_multiscale, transformer_concat, transformer_masked, transformer_gated, ms_encoder, block_relation };
enum class TaskKind { classification, pair_inference, relation, seq2seq_toy, compositionality };

std::string to_string(ModelKind kind);
std::string to_string(TaskKind kind);
ModelKind parse_model_kind(const std::string& text);
TaskKind parse_task_kind(const std::string& text);
const std::vector<ModelKind>& all_model_kinds();

struct Dims {
  std::size_t d_model = 16;
  std::size_t d_k = 8;
  std::size_t heads = 2;
  std::size_t layers = 1;
  std::size_t d_ff = 32;
  std::vector<std::size_t> kernel_sizes{1, 2, 3};
  std::size_t filters = 8;
  std::size_t tag_dim = 4;

  bool operator==(const Dims&) const = default;
};

struct TrainingConfig {
  std::size_t epochs = 10;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
  std::size_t batch_size = 0;

  bool operator==(const TrainingConfig&) const = default;
};

struct DataConfig {
  std::string train, val, test;
  std::string embeddings;
  bool freeze_embeddings = false;

  bool operator==(const DataConfig&) const = default;
};

struct SyntheticConfig {
  std::string task = "marker_window";  // marker_window | copy | reverse
  std::size_t train_size = 0, val_size = 0, test_size = 0;
  std::size_t length = 12;
  std::size_t vocab = 8;
  std::size_t window = 2;
  std::uint64_t seed = 7;

  bool operator==(const SyntheticConfig&) const = default;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::transformer_concat;
  TaskKind task = TaskKind::classification;
  Dims dims;
  std::string roles_path;
  std::vector<RoleSpec> role_list;
  bool positional = true;
  TrainingConfig training;
  DataConfig data;
  std::optional<SyntheticConfig> synthetic;

  std::string base_dir;  // not serialised

  // Roles for the attention heads: the role file if set, else role_list.
  std::vector<RoleSpec> head_roles() const;
  std::string resolve(const std::string& path) const;
  std::size_t effective_batch_size(std::size_t train_size) const;
  // Dimensions, roles and model/task compatibility.
  void validate_model() const;
  // validate_model plus data sources and referenced files.
  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j, std::string base_dir = ".");

  bool operator==(const ExperimentConfig& o) const;
};

ExperimentConfig load_config(const std::string& path);

}  // namespace seqinfer::harness
