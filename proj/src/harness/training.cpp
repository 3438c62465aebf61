#include "seqinfer/harness/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "seqinfer/errors.hpp"
#include "seqinfer/random.hpp"
#include "seqinfer/splits.hpp"

namespace seqinfer::harness {
namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string join(const Tokens& t) {
  std::string out;
  for (const auto& w : t) out += (out.empty() ? "" : " ") + w;
  return out;
}

Tokens split_words(const std::string& s) {
  std::istringstream ss(s);
  Tokens out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

LabeledDataset synthetic_part(const SyntheticConfig& s, std::size_t size, std::uint64_t offset) {
  return generate_synthetic(SyntheticSpec{s.task, size, s.length, s.vocab, s.window, s.seed + offset});
}

}  // namespace

DataSplits load_splits(const ExperimentConfig& cfg) {
  cfg.validate();
  DataSplits out;
  if (!cfg.data.train.empty()) {
    out.train = load_jsonl_dataset(cfg.resolve(cfg.data.train), cfg.task);
    if (!cfg.data.val.empty()) out.val = load_jsonl_dataset(cfg.resolve(cfg.data.val), cfg.task);
    if (!cfg.data.test.empty()) out.test = load_jsonl_dataset(cfg.resolve(cfg.data.test), cfg.task);
    return out;
  }
  const auto& s = *cfg.synthetic;
  out.train = synthetic_part(s, s.train_size, 0);
  if (s.val_size) out.val = synthetic_part(s, s.val_size, 1000003);
  if (s.test_size) out.test = synthetic_part(s, s.test_size, 2000006);
  const bool seq = out.train.task == TaskKind::seq2seq_toy;
  if (seq != (cfg.task == TaskKind::seq2seq_toy))
    throw ContractError("config: synthetic task '" + s.task + "' does not produce " + to_string(cfg.task) + " data");
  return out;
}

TrainResult train(const ExperimentConfig& cfg, const LabeledDataset& train_data, const LabeledDataset* val) {
  if (train_data.empty()) throw ContractError("training set is empty");
  Rng rng(cfg.training.seed);
  std::optional<EmbeddingStore> pretrained;
  if (!cfg.data.embeddings.empty()) pretrained = EmbeddingStore::load_file(cfg.resolve(cfg.data.embeddings));
  TrainResult result;
  result.model = build_model(Blueprint::from_data(cfg, train_data), rng, pretrained ? &*pretrained : nullptr);
  const auto params = result.model->trainable();
  const std::size_t n = train_data.size();
  const std::size_t batch = cfg.effective_batch_size(n);
  for (std::size_t epoch = 1; epoch <= cfg.training.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      for (auto p : params) p.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const Tensor loss = result.model->loss(train_data.samples[order[i]]);
        batch_loss += loss.item();
        backward(scale(loss, 1.0 / static_cast<double>(end - start)));
      }
      if (!std::isfinite(batch_loss))
        throw StateError("training diverged in epoch " + std::to_string(epoch) + ": loss is " +
                         format_double(batch_loss) + "; lower the learning rate");
      sgd_step(params, cfg.training.learning_rate);
      total += batch_loss;
    }
    EpochRecord rec{epoch, total / static_cast<double>(n), std::nullopt};
    if (val) rec.val_metric = evaluate(*result.model, *val).headline;
    result.history.push_back(rec);
  }
  return result;
}

Evaluation evaluate(const Model& model, const LabeledDataset& data) {
  if (data.empty()) throw ContractError("cannot evaluate on an empty dataset");
  Evaluation ev;
  const auto& labels = model.blueprint().labels;
  if (data.task == TaskKind::seq2seq_toy) {
    std::vector<TokenSeq> cands;
    std::vector<std::vector<TokenSeq>> refs;
    std::size_t exact = 0, tok_ok = 0, tok_total = 0;
    for (const auto& s : data.samples) {
      ev.predicted.push_back(model.predict(s));
      ev.actual.push_back(join(s.target));
      cands.push_back(split_words(ev.predicted.back()));
      refs.push_back({s.target});
      exact += cands.back() == s.target;
      for (std::size_t i = 0; i < s.target.size(); ++i) tok_ok += i < cands.back().size() && cands.back()[i] == s.target[i];
      tok_total += s.target.size();
    }
    const double b = corpus_bleu(cands, refs);
    ev.headline = b;
    ev.report = {{"n", data.size()},
                 {"bleu", b},
                 {"exact_match", static_cast<double>(exact) / static_cast<double>(data.size())},
                 {"token_accuracy", static_cast<double>(tok_ok) / static_cast<double>(tok_total)}};
    return ev;
  }
  for (const auto& s : data.samples)
    if (!std::binary_search(labels.begin(), labels.end(), s.label))
      throw ContractError("vocabulary mismatch: label '" + s.label + "' (line " + std::to_string(s.line) +
                          ") is unknown to the model");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& s : data.samples) {
    ev.predicted.push_back(model.predict(s));
    ev.actual.push_back(s.label);
    pairs.emplace_back(ev.predicted.back(), ev.actual.back());
  }
  const auto cm = confusion_from_pairs(pairs, labels);
  ev.report = metric_report(cm);
  ev.headline = accuracy(cm);
  return ev;
}

CrossValidation cross_validate(const ExperimentConfig& cfg, const LabeledDataset& data, std::size_t k) {
  const auto folds = kfold_split(data.size(), k, cfg.training.seed);
  CrossValidation cv;
  cv.predicted.assign(data.size(), "");
  cv.actual.assign(data.size(), "");
  json fold_reports = json::array();
  std::vector<double> scores;
  for (std::size_t f = 0; f < k; ++f) {
    const auto split = folds.split(f);
    auto train_part = data.subset(split.train);
    train_part.refresh_labels();
    auto val_part = data.subset(split.val);
    val_part.labels = train_part.labels;
    auto result = train(cfg, train_part, nullptr);
    const auto ev = evaluate(*result.model, val_part);
    for (std::size_t i = 0; i < split.val.size(); ++i) {
      cv.predicted[split.val[i]] = ev.predicted[i];
      cv.actual[split.val[i]] = ev.actual[i];
    }
    const double score = ev.headline.value_or(0.0);
    scores.push_back(score);
    fold_reports.push_back({{"fold", f},
                            {"train_size", split.train.size()},
                            {"val_size", split.val.size()},
                            {"score", score},
                            {"final_train_loss", result.history.empty() ? json(nullptr) : json(result.history.back().train_loss)},
                            {"report", ev.report}});
  }
  cv.report = {{"k", k},
               {"seed", cfg.training.seed},
               {"metric", cfg.task == TaskKind::seq2seq_toy ? "bleu" : "accuracy"},
               {"fold_sizes", folds.fold_sizes()},
               {"scores", scores},
               {"mean", cross_validation_score(scores)},
               {"folds", fold_reports}};
  return cv;
}

LabeledDataset gradcheck_samples(TaskKind task) {
  LabeledDataset d;
  d.task = task;
  const DependencyTree t1{{"the", "cat", "saw", "a", "dog"}, {2, 3, 0, 5, 3}, {"det", "nsubj", "root", "det", "obj"},
                          {"DT", "NN", "VBD", "DT", "NN"}};
  const DependencyTree t2{{"dogs", "chase", "cats", "in", "the", "big", "park"},
                          {2, 0, 2, 7, 7, 7, 2},
                          {"nsubj", "root", "obj", "case", "det", "amod", "obl"},
                          {"NNS", "VBP", "NNS", "IN", "DT", "JJ", "NN"}};
  auto sample = [&](const DependencyTree& t, std::string label) {
    Sample s;
    s.tokens = t.tokens;
    s.tree = t;
    s.label = std::move(label);
    return s;
  };
  Sample a = sample(t1, "0"), b = sample(t2, "1");
  switch (task) {
    case TaskKind::pair_inference:
      a.tokens2 = t2.tokens;
      a.tree2 = t2;
      b.tokens2 = t1.tokens;
      b.tree2 = t1;
      break;
    case TaskKind::relation:
      a.e1 = {2, 2};
      a.e2 = {5, 5};
      b.e1 = {1, 1};
      b.e2 = {6, 7};
      break;
    case TaskKind::seq2seq_toy:
      a.target = {"saw", "the", "cat"};
      b.target = {"dogs", "park"};
      break;
    default:
      break;
  }
  d.samples = {a, b};
  d.refresh_labels();
  return d;
}

json gradcheck_report(const ExperimentConfig& cfg_in, double step, double tolerance) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.dims.d_model > 16) throw ContractError("gradcheck needs d_model <= 16, got " + std::to_string(cfg.dims.d_model));
  if (cfg.task == TaskKind::compositionality) throw ContractError("compositionality has no gradients to check");
  cfg.data.embeddings.clear();
  const auto data = gradcheck_samples(cfg.task);
  Rng rng(cfg.training.seed);
  auto model = build_model(Blueprint::from_data(cfg, data), rng);
  // All-zero parameters (biases) get small random values.
  for (auto p : model->params()) {
    if (!p.tensor.requires_grad()) continue;
    auto d = p.tensor.mutable_data();
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }))
      for (auto& v : d) v = rng.uniform(-0.2, 0.2);
  }
  auto total_loss = [&] {
    Tensor l = model->loss(data.samples[0]);
    for (std::size_t i = 1; i < data.size(); ++i) l = add(l, model->loss(data.samples[i]));
    return l;
  };
  const auto params = model->trainable();
  for (auto p : params) p.zero_grad();
  backward(total_loss());
  json groups = json::array();
  double worst = 0.0;
  for (auto np : model->params()) {
    if (!np.tensor.requires_grad()) continue;
    const std::vector<double> analytic(np.tensor.grad().begin(), np.tensor.grad().end());
    auto d = np.tensor.mutable_data();
    double group_worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double saved = d[i];
      d[i] = saved + step;
      const double up = total_loss().item();
      d[i] = saved - step;
      const double down = total_loss().item();
      d[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double rel = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-6);
      group_worst = std::max(group_worst, rel);
    }
    worst = std::max(worst, group_worst);
    groups.push_back({{"name", np.name}, {"size", d.size()}, {"max_rel_error", group_worst}});
  }
  return {{"model", to_string(cfg.model)},
          {"task", to_string(cfg.task)},
          {"step", step},
          {"groups", groups},
          {"frozen", model->frozen_groups()},
          {"worst", worst},
          {"tolerance", tolerance},
          {"pass", worst < tolerance}};
}

void write_predictions(std::ostream& out, const std::vector<std::string>& predicted,
                       const std::vector<std::string>& actual) {
  out << "index\tpredicted\tactual\n";
  for (std::size_t i = 0; i < predicted.size(); ++i) out << i << '\t' << predicted[i] << '\t' << actual[i] << '\n';
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_metric\n";
  for (const auto& r : history)
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << (r.val_metric ? format_double(*r.val_metric) : "")
        << '\n';
}

}  // namespace seqinfer::harness
