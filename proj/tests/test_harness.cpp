#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "seqinfer/errors.hpp"
#include "seqinfer/harness/config.hpp"
#include "seqinfer/harness/dataset.hpp"
#include "seqinfer/harness/models.hpp"
#include "seqinfer/harness/training.hpp"
#include "seqinfer/metrics.hpp"
#include "seqinfer/splits.hpp"

using namespace seqinfer;
using namespace seqinfer::harness;

namespace {

ExperimentConfig marker_config(ModelKind kind, std::size_t epochs) {
  ExperimentConfig c;
  c.model = kind;
  c.dims = Dims{8, 4, 2, 1, 16, {1, 2}, 4, 3};
  if (kind == ModelKind::transformer_masked) c.role_list = {RoleSpec{Role::local, 2}, RoleSpec{Role::self}};
  c.positional = false;
  c.training = TrainingConfig{epochs, 0.1, 3, 0};
  c.synthetic = SyntheticConfig{"marker_window", 60, 20, 0, 8, 5, 2, 9};
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("seqinfer_test_" + name)).string();
}

}  // namespace

TEST(Config, RoundTripsThroughJson) {
  ExperimentConfig c;
  c.model = ModelKind::transformer_gated;
  c.task = TaskKind::pair_inference;
  c.dims.kernel_sizes = {2, 4};
  c.role_list = {RoleSpec{Role::local, 3}, RoleSpec{Role::syntactic}};
  c.positional = false;
  c.training = TrainingConfig{7, 0.05, 99, 16};
  c.data.train = "train.jsonl";
  c.data.freeze_embeddings = true;
  c.synthetic = SyntheticConfig{"copy", 10, 2, 3, 5, 6, 1, 4};
  const auto j = c.to_json();
  const auto back = ExperimentConfig::from_json(j);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_TRUE(ExperimentConfig::from_json(ExperimentConfig{}.to_json()) == ExperimentConfig{});
}

TEST(Config, ErrorsAndPaths) {
  nlohmann::json bad = {{"modle", "rnn"}};
  EXPECT_THROW(ExperimentConfig::from_json(bad), FormatError);
  EXPECT_THROW(ExperimentConfig::from_json({{"model", "lstm"}}), ContractError);
  EXPECT_THROW(ExperimentConfig::from_json({{"dims", {{"d_model", "x"}}}}), FormatError);
  auto c = ExperimentConfig::from_json({{"data", {{"train", "a/b.jsonl"}}}}, "/tmp/cfg");
  EXPECT_EQ(c.resolve(c.data.train), "/tmp/cfg/a/b.jsonl");
  EXPECT_EQ(c.resolve("/abs/x"), "/abs/x");
  EXPECT_THROW(c.validate(), ContractError);
  auto m = marker_config(ModelKind::transformer_masked, 1);
  m.dims.heads = 3;
  EXPECT_THROW(m.validate(), ContractError);
  EXPECT_EQ(m.effective_batch_size(256), 256u);
  EXPECT_EQ(m.effective_batch_size(257), 32u);
  m.training.batch_size = 5;
  EXPECT_EQ(m.effective_batch_size(1000), 5u);
}

TEST(Dataset, LoadsClassification) {
  std::istringstream in("{\"text\": \"a b c\", \"label\": \"x\"}\n{\"text\": [\"d\"], \"label\": 3}\n");
  auto d = read_jsonl_dataset(in, TaskKind::classification);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.samples[0].tokens, (Tokens{"a", "b", "c"}));
  EXPECT_EQ(d.samples[1].label, "3");
  EXPECT_EQ(d.labels, (std::vector<std::string>{"3", "x"}));
}

TEST(Dataset, MissingFieldNamesLine) {
  std::istringstream in("{\"text\": \"a\", \"label\": \"x\"}\n{\"text\": \"b\"}\n");
  try {
    read_jsonl_dataset(in, TaskKind::classification);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
  std::istringstream rel("{\"text\": \"a b c\", \"e1\": [1, 2], \"e2\": [2, 3], \"label\": \"r\"}\n");
  EXPECT_THROW(read_jsonl_dataset(rel, TaskKind::relation), FormatError);
  std::istringstream empty("\n\n");
  EXPECT_THROW(read_jsonl_dataset(empty, TaskKind::classification), FormatError);
}

TEST(Dataset, RelationRoundTrip) {
  std::istringstream in(
      R"({"text": "the cat saw a dog", "e1": [2, 2], "e2": [4, 5], "label": "sees", "heads": [2, 3, 0, 5, 3], "deprels": ["det", "nsubj", "root", "det", "obj"], "pos": ["DT", "NN", "VBD", "DT", "NN"]})"
      "\n"
      R"({"text": ["dogs", "bark"], "e1": [1, 1], "e2": [2, 2], "label": "none"})"
      "\n");
  auto d = read_jsonl_dataset(in, TaskKind::relation);
  std::stringstream ss;
  write_jsonl_dataset(ss, d);
  auto back = read_jsonl_dataset(ss, TaskKind::relation);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.samples[i].tokens, d.samples[i].tokens);
    EXPECT_EQ(back.samples[i].e1.first, d.samples[i].e1.first);
    EXPECT_EQ(back.samples[i].e2.last, d.samples[i].e2.last);
    EXPECT_EQ(back.samples[i].label, d.samples[i].label);
    EXPECT_EQ(back.samples[i].tree.has_value(), d.samples[i].tree.has_value());
  }
  EXPECT_EQ(back.samples[0].tree->heads, d.samples[0].tree->heads);
  EXPECT_EQ(back.samples[0].tree->deprels, d.samples[0].tree->deprels);
}

TEST(Synthetic, MarkerWindowLabelsFollowDistance) {
  auto d = generate_synthetic({"marker_window", 500, 10, 6, 2, 1});
  for (const auto& s : d.samples) {
    std::size_t a = 99, m = 99, count_a = 0, count_m = 0;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (s.tokens[i] == "A") a = i, ++count_a;
      if (s.tokens[i] == "M") m = i, ++count_m;
    }
    ASSERT_EQ(count_a, 1u);
    ASSERT_EQ(count_m, 1u);
    const std::size_t dist = a > m ? a - m : m - a;
    EXPECT_EQ(s.label, dist <= 2 ? "1" : "0");
  }
}

TEST(Synthetic, ClassBalanceOverSeeds) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto d = generate_synthetic({"marker_window", 1000, 12, 8, 2, seed});
    std::size_t pos = 0;
    for (const auto& s : d.samples) pos += s.label == "1";
    EXPECT_GE(pos, 450u) << seed;
    EXPECT_LE(pos, 550u) << seed;
  }
}

TEST(Synthetic, CopyAndReverse) {
  auto c = generate_synthetic({"copy", 20, 6, 5, 0, 3});
  for (const auto& s : c.samples) EXPECT_EQ(s.target, s.tokens);
  auto r = generate_synthetic({"reverse", 20, 6, 5, 0, 3});
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(r.samples[i].tokens, c.samples[i].tokens);
    EXPECT_EQ(r.samples[i].target, Tokens(c.samples[i].tokens.rbegin(), c.samples[i].tokens.rend()));
  }
  auto again = generate_synthetic({"copy", 20, 6, 5, 0, 3});
  EXPECT_EQ(again.samples[7].tokens, c.samples[7].tokens);
  EXPECT_THROW(generate_synthetic({"marker_window", 10, 12, 2, 2, 1}), ContractError);
  EXPECT_THROW(generate_synthetic({"marker_window", 10, 3, 5, 2, 1}), ContractError);
  EXPECT_THROW(generate_synthetic({"copy", 10, 4, 1, 0, 1}), ContractError);
  EXPECT_THROW(generate_synthetic({"sort", 10, 4, 5, 0, 1}), ContractError);
}

TEST(Training, ZeroEpochsReturnsInitialModel) {
  auto cfg = marker_config(ModelKind::rnn, 0);
  auto splits = load_splits(cfg);
  auto a = train(cfg, splits.train);
  EXPECT_TRUE(a.history.empty());
  Rng rng(cfg.training.seed);
  auto fresh = build_model(Blueprint::from_data(cfg, splits.train), rng);
  ASSERT_EQ(fresh->params().size(), a.model->params().size());
  for (std::size_t i = 0; i < fresh->params().size(); ++i) {
    const auto x = fresh->params()[i].tensor.data(), y = a.model->params()[i].tensor.data();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
}

TEST(Training, SameSeedIsBitIdentical) {
  for (auto kind : {ModelKind::rnn, ModelKind::cnn_multiscale, ModelKind::transformer_gated}) {
    auto cfg = marker_config(kind, 3);
    auto splits = load_splits(cfg);
    auto a = train(cfg, splits.train, &*splits.val);
    auto b = train(cfg, splits.train, &*splits.val);
    ASSERT_EQ(a.history.size(), 3u);
    for (std::size_t e = 0; e < 3; ++e) {
      EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
      EXPECT_EQ(a.history[e].val_metric, b.history[e].val_metric);
    }
    EXPECT_EQ(a.model->save().dump(), b.model->save().dump());
  }
}

TEST(Training, MemorisesFourSamples) {
  auto cfg = marker_config(ModelKind::transformer_concat, 200);
  cfg.training.learning_rate = 0.3;
  std::istringstream in(
      "{\"text\": \"a b c\", \"label\": \"p\"}\n{\"text\": \"d e\", \"label\": \"q\"}\n"
      "{\"text\": \"f g h i\", \"label\": \"r\"}\n{\"text\": \"j\", \"label\": \"p\"}\n");
  auto data = read_jsonl_dataset(in, TaskKind::classification);
  auto result = train(cfg, data);
  auto ev = evaluate(*result.model, data);
  EXPECT_EQ(*ev.headline, 1.0);
  EXPECT_LT(result.history.back().train_loss, result.history.front().train_loss);
}

TEST(Evaluation, AccuracyMatchesRecomputationFromPredictions) {
  auto cfg = marker_config(ModelKind::cnn_multiscale, 2);
  auto splits = load_splits(cfg);
  auto result = train(cfg, splits.train);
  auto ev = evaluate(*result.model, *splits.val);
  std::stringstream dump;
  write_predictions(dump, ev.predicted, ev.actual);
  std::string line;
  std::getline(dump, line);
  EXPECT_EQ(line, "index\tpredicted\tactual");
  std::size_t n = 0, hit = 0;
  while (std::getline(dump, line)) {
    std::istringstream ls(line);
    std::string idx, p, a;
    std::getline(ls, idx, '\t');
    std::getline(ls, p, '\t');
    std::getline(ls, a, '\t');
    EXPECT_EQ(std::stoul(idx), n);
    ++n;
    hit += p == a;
  }
  EXPECT_EQ(n, splits.val->size());
  EXPECT_EQ(ev.report["accuracy"].get<double>(), static_cast<double>(hit) / static_cast<double>(n));
}

TEST(Evaluation, EmptyAndMismatchedDataErrors) {
  auto cfg = marker_config(ModelKind::rnn, 0);
  auto splits = load_splits(cfg);
  auto result = train(cfg, splits.train);
  LabeledDataset empty;
  EXPECT_THROW(evaluate(*result.model, empty), ContractError);
  auto odd = *splits.val;
  odd.samples[0].label = "2";
  EXPECT_THROW(evaluate(*result.model, odd), ContractError);
}

TEST(CrossValidation, ReportsFoldsAndMean) {
  auto cfg = marker_config(ModelKind::rnn, 1);
  auto splits = load_splits(cfg);
  auto cv = cross_validate(cfg, splits.train, 2);
  ASSERT_EQ(cv.report["scores"].size(), 2u);
  const double mean = (cv.report["scores"][0].get<double>() + cv.report["scores"][1].get<double>()) / 2.0;
  EXPECT_EQ(cv.report["mean"].get<double>(), mean);
  EXPECT_EQ(cv.predicted.size(), splits.train.size());
  for (const auto& p : cv.predicted) EXPECT_FALSE(p.empty());
  auto other = cfg;
  other.training.seed = 4;
  auto f1 = kfold_split(splits.train.size(), 3, cfg.training.seed);
  auto f2 = kfold_split(splits.train.size(), 3, other.training.seed);
  EXPECT_NE(f1.fold_of, f2.fold_of);
  EXPECT_EQ(f1.fold_sizes(), f2.fold_sizes());
}

TEST(Gradcheck, ListsEveryGroupOnceAndFrozenSeparately) {
  auto cfg = marker_config(ModelKind::transformer_masked, 1);
  cfg.role_list = {RoleSpec{Role::local, 1}, RoleSpec{Role::syntactic}};
  auto report = gradcheck_report(cfg);
  EXPECT_TRUE(report["pass"].get<bool>()) << report.dump();
  auto data = gradcheck_samples(cfg.task);
  Rng rng(0);
  auto model = build_model(Blueprint::from_data(cfg, data), rng);
  std::set<std::string> names;
  for (const auto& g : report["groups"]) EXPECT_TRUE(names.insert(g["name"].get<std::string>()).second);
  EXPECT_EQ(names.size(), model->params().size());
  EXPECT_TRUE(report["frozen"].empty());

  cfg.data.freeze_embeddings = true;
  auto frozen = gradcheck_report(cfg);
  ASSERT_EQ(frozen["frozen"].size(), 1u);
  EXPECT_EQ(frozen["frozen"][0], "embed");
  for (const auto& g : frozen["groups"]) EXPECT_NE(g["name"], "embed");
  EXPECT_EQ(frozen["groups"].size() + 1, names.size());
  cfg.dims.d_model = 32;
  EXPECT_THROW(gradcheck_report(cfg), ContractError);
}

TEST(Models, SaveLoadRoundTrip) {
  for (auto kind : {ModelKind::rnn, ModelKind::transformer_masked, ModelKind::ms_encoder}) {
    auto cfg = marker_config(kind, 1);
    auto data = gradcheck_samples(TaskKind::classification);
    auto result = train(cfg, data);
    const auto path = temp_path("model.json");
    save_model_file(*result.model, path);
    auto back = load_model_file(path);
    EXPECT_EQ(back->save().dump(), result.model->save().dump());
    for (const auto& s : data.samples) EXPECT_EQ(back->predict(s), result.model->predict(s));
    std::filesystem::remove(path);
  }
  EXPECT_THROW(load_model(nlohmann::json{{"format", "other"}}), FormatError);
}

TEST(Models, Seq2SeqDecodesAndScores) {
  ExperimentConfig cfg;
  cfg.task = TaskKind::seq2seq_toy;
  cfg.dims = Dims{8, 4, 2, 1, 16, {1}, 1, 1};
  cfg.training = TrainingConfig{1, 0.1, 1, 0};
  cfg.synthetic = SyntheticConfig{"copy", 30, 10, 0, 4, 5, 0, 2};
  auto splits = load_splits(cfg);
  auto result = train(cfg, splits.train, &*splits.val);
  auto ev = evaluate(*result.model, *splits.val);
  EXPECT_EQ(ev.predicted.size(), 10u);
  EXPECT_GE(*ev.headline, 0.0);
  EXPECT_LE(*ev.headline, 1.0);
  EXPECT_TRUE(ev.report.contains("bleu") && ev.report.contains("exact_match"));
  auto bad = cfg;
  bad.model = ModelKind::rnn;
  EXPECT_THROW(bad.validate(), ContractError);
}

TEST(Models, TreeModelsNeedTrees) {
  auto cfg = marker_config(ModelKind::ms_encoder, 1);
  auto splits = load_splits(cfg);
  EXPECT_THROW(train(cfg, splits.train), ContractError);
  EXPECT_TRUE(needs_trees(cfg));
  EXPECT_FALSE(needs_trees(marker_config(ModelKind::rnn, 1)));
}
