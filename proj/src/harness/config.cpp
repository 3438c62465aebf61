#include "seqinfer/harness/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "seqinfer/errors.hpp"

namespace seqinfer::harness {
namespace {

using nlohmann::json;

const std::vector<std::pair<ModelKind, std::string>>& model_names() {
  static const std::vector<std::pair<ModelKind, std::string>> names{
      {ModelKind::rnn, "rnn"},
      {ModelKind::cnn_multiscale, "cnn_multiscale"},
      {ModelKind::transformer_concat, "transformer_concat"},
      {ModelKind::transformer_masked, "transformer_masked"},
      {ModelKind::transformer_gated, "transformer_gated"},
      {ModelKind::ms_encoder, "ms_encoder"},
      {ModelKind::block_relation, "block_relation"}};
  return names;
}

const std::vector<std::pair<TaskKind, std::string>>& task_names() {
  static const std::vector<std::pair<TaskKind, std::string>> names{{TaskKind::classification, "classification"},
                                                                   {TaskKind::pair_inference, "pair_inference"},
                                                                   {TaskKind::relation, "relation"},
                                                                   {TaskKind::seq2seq_toy, "seq2seq_toy"},
                                                                   {TaskKind::compositionality, "compositionality"}};
  return names;
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw FormatError("config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw FormatError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string to_string(ModelKind kind) {
  for (const auto& [k, n] : model_names())
    if (k == kind) return n;
  return "?";
}

std::string to_string(TaskKind kind) {
  for (const auto& [k, n] : task_names())
    if (k == kind) return n;
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  for (const auto& [k, n] : model_names())
    if (n == text) return k;
  throw ContractError("unknown model kind '" + text + "'");
}

TaskKind parse_task_kind(const std::string& text) {
  for (const auto& [k, n] : task_names())
    if (n == text) return k;
  throw ContractError("unknown task kind '" + text + "'");
}

const std::vector<ModelKind>& all_model_kinds() {
  static const std::vector<ModelKind> kinds = [] {
    std::vector<ModelKind> out;
    for (const auto& [k, n] : model_names()) out.push_back(k);
    return out;
  }();
  return kinds;
}

std::vector<RoleSpec> ExperimentConfig::head_roles() const {
  if (!roles_path.empty()) return read_role_assignments_file(resolve(roles_path));
  return role_list;
}

std::string ExperimentConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir.empty() ? "." : base_dir) / p).lexically_normal().string();
}

std::size_t ExperimentConfig::effective_batch_size(std::size_t train_size) const {
  if (training.batch_size > 0) return training.batch_size;
  return train_size <= 256 ? std::max<std::size_t>(train_size, 1) : 32;
}

void ExperimentConfig::validate_model() const {
  const auto& d = dims;
  if (d.d_model == 0 || d.d_k == 0 || d.heads == 0 || d.layers == 0 || d.d_ff == 0 || d.filters == 0 || d.tag_dim == 0)
    throw ContractError("config: dimensions must be positive");
  if (d.kernel_sizes.empty()) throw ContractError("config: kernel_sizes is empty");
  for (auto h : d.kernel_sizes)
    if (h == 0) throw ContractError("config: kernel sizes must be >= 1");
  if (!(training.learning_rate > 0.0)) throw ContractError("config: learning_rate must be positive");
  if (!roles_path.empty() && !role_list.empty()) throw ContractError("config: give either roles or role_list, not both");
  if (task == TaskKind::seq2seq_toy && model != ModelKind::transformer_concat)
    throw ContractError("config: seq2seq_toy uses the transformer_concat encoder-decoder");
  if (model == ModelKind::block_relation && task != TaskKind::relation)
    throw ContractError("config: block_relation needs the relation task");
  const bool uses_attention = model == ModelKind::transformer_concat || model == ModelKind::transformer_masked ||
                              model == ModelKind::transformer_gated || model == ModelKind::ms_encoder;
  if ((positional || task == TaskKind::seq2seq_toy) && uses_attention && d.d_model % 2 != 0)
    throw ContractError("config: positional encodings need an even d_model");
  if (!roles_path.empty() && !std::filesystem::exists(resolve(roles_path)))
    throw ContractError("config: file not found: " + resolve(roles_path));
  if (model == ModelKind::transformer_masked || model == ModelKind::transformer_gated) {
    const auto roles = head_roles();
    if (model == ModelKind::transformer_masked && roles.empty())
      throw ContractError("config: transformer_masked needs roles or role_list");
    if (!roles.empty() && roles.size() != d.heads)
      throw ContractError("config: " + std::to_string(roles.size()) + " roles for " + std::to_string(d.heads) + " heads");
  }
  if (synthetic) {
    const auto& s = *synthetic;
    if (s.task != "marker_window" && s.task != "copy" && s.task != "reverse")
      throw ContractError("config: unknown synthetic task '" + s.task + "'");
    if (s.train_size == 0) throw ContractError("config: synthetic train_size must be positive");
  }
}

void ExperimentConfig::validate() const {
  validate_model();
  for (const auto* path : {&data.train, &data.val, &data.test, &data.embeddings})
    if (!path->empty() && !std::filesystem::exists(resolve(*path)))
      throw ContractError("config: file not found: " + resolve(*path));
  if (task != TaskKind::compositionality && data.train.empty() && !synthetic)
    throw ContractError("config: needs data.train or a synthetic section");
}

json ExperimentConfig::to_json() const {
  json j;
  j["model"] = to_string(model);
  j["task"] = to_string(task);
  j["dims"] = {{"d_model", dims.d_model}, {"d_k", dims.d_k},     {"heads", dims.heads},
               {"layers", dims.layers},   {"d_ff", dims.d_ff},   {"kernel_sizes", dims.kernel_sizes},
               {"filters", dims.filters}, {"tag_dim", dims.tag_dim}};
  if (!roles_path.empty()) j["roles"] = roles_path;
  if (!role_list.empty()) {
    json roles = json::array();
    for (const auto& r : role_list) roles.push_back(r.str());
    j["role_list"] = roles;
  }
  j["positional"] = positional;
  j["training"] = {{"epochs", training.epochs},
                   {"learning_rate", training.learning_rate},
                   {"seed", training.seed},
                   {"batch_size", training.batch_size}};
  j["data"] = {{"train", data.train},
               {"val", data.val},
               {"test", data.test},
               {"embeddings", data.embeddings},
               {"freeze_embeddings", data.freeze_embeddings}};
  if (synthetic) {
    const auto& s = *synthetic;
    j["synthetic"] = {{"task", s.task},     {"train_size", s.train_size}, {"val_size", s.val_size},
                      {"test_size", s.test_size}, {"length", s.length},  {"vocab", s.vocab},
                      {"window", s.window}, {"seed", s.seed}};
  }
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, std::string base_dir) {
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  try {
    check_keys(j, "config",
               {"model", "task", "dims", "roles", "role_list", "positional", "training", "data", "synthetic"});
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    if (j.contains("task")) c.task = parse_task_kind(j.at("task").get<std::string>());
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      check_keys(d, "dims", {"d_model", "d_k", "heads", "layers", "d_ff", "kernel_sizes", "filters", "tag_dim"});
      read(d, "d_model", c.dims.d_model);
      read(d, "d_k", c.dims.d_k);
      read(d, "heads", c.dims.heads);
      read(d, "layers", c.dims.layers);
      read(d, "d_ff", c.dims.d_ff);
      read(d, "kernel_sizes", c.dims.kernel_sizes);
      read(d, "filters", c.dims.filters);
      read(d, "tag_dim", c.dims.tag_dim);
    }
    read(j, "roles", c.roles_path);
    if (j.contains("role_list"))
      for (const auto& r : j.at("role_list")) c.role_list.push_back(RoleSpec::parse(r.get<std::string>()));
    read(j, "positional", c.positional);
    if (j.contains("training")) {
      const auto& t = j.at("training");
      check_keys(t, "training", {"epochs", "learning_rate", "seed", "batch_size"});
      read(t, "epochs", c.training.epochs);
      read(t, "learning_rate", c.training.learning_rate);
      read(t, "seed", c.training.seed);
      read(t, "batch_size", c.training.batch_size);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      check_keys(d, "data", {"train", "val", "test", "embeddings", "freeze_embeddings"});
      read(d, "train", c.data.train);
      read(d, "val", c.data.val);
      read(d, "test", c.data.test);
      read(d, "embeddings", c.data.embeddings);
      read(d, "freeze_embeddings", c.data.freeze_embeddings);
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      check_keys(s, "synthetic", {"task", "train_size", "val_size", "test_size", "length", "vocab", "window", "seed"});
      SyntheticConfig sc;
      read(s, "task", sc.task);
      read(s, "train_size", sc.train_size);
      read(s, "val_size", sc.val_size);
      read(s, "test_size", sc.test_size);
      read(s, "length", sc.length);
      read(s, "vocab", sc.vocab);
      read(s, "window", sc.window);
      read(s, "seed", sc.seed);
      c.synthetic = sc;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return model == o.model && task == o.task && dims == o.dims && roles_path == o.roles_path &&
         role_list == o.role_list && positional == o.positional && training == o.training && data == o.data &&
         synthetic == o.synthetic;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
  auto dir = std::filesystem::path(path).parent_path().string();
  return ExperimentConfig::from_json(j, dir.empty() ? "." : dir);
}

}  // namespace seqinfer::harness
