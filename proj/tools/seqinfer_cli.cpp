// seqinfer command-line tool: train, eval, cv, gradcheck,
// score-compositionality and gen-data.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqinfer/compositionality.hpp"
#include "seqinfer/errors.hpp"
#include "seqinfer/harness/config.hpp"
#include "seqinfer/harness/dataset.hpp"
#include "seqinfer/harness/models.hpp"
#include "seqinfer/harness/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqinfer;
using namespace seqinfer::harness;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::size_t k = 5;
  std::string model;
  std::string data;
  std::string kind;
  std::string embeddings;
  std::string tasks;
  std::string task = "marker_window";
  std::size_t size = 1000, length = 12, vocab = 8, window = 2;
};

ExperimentConfig config_from(const Options& o) {
  if (o.config.empty()) throw ContractError("--config is required");
  auto cfg = load_config(o.config);
  if (o.seed) cfg.training.seed = *o.seed;
  return cfg;
}

std::ofstream open_out(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  const auto path = (fs::path(o.out) / name).string();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  return out;
}

void write_json(const Options& o, const std::string& name, const json& j) { open_out(o, name) << j.dump(2) << '\n'; }

int cmd_train(const Options& o) {
  const auto cfg = config_from(o);
  auto splits = load_splits(cfg);
  const LabeledDataset* val = splits.val ? &*splits.val : nullptr;
  auto result = train(cfg, splits.train, val);
  json metrics{{"command", "train"},
               {"model", to_string(cfg.model)},
               {"task", to_string(cfg.task)},
               {"seed", cfg.training.seed},
               {"epochs", cfg.training.epochs},
               {"train_size", splits.train.size()},
               {"final_train_loss", result.history.empty() ? json(nullptr) : json(result.history.back().train_loss)}};
  auto train_eval = evaluate(*result.model, splits.train);
  metrics["train"] = train_eval.report;
  const LabeledDataset* held = splits.test ? &*splits.test : val;
  Evaluation shown = train_eval;
  std::string shown_name = "train";
  if (val) {
    auto ev = evaluate(*result.model, *val);
    metrics["val"] = ev.report;
    if (held == val) shown = ev, shown_name = "val";
  }
  if (splits.test) {
    shown = evaluate(*result.model, *splits.test);
    metrics["test"] = shown.report;
    shown_name = "test";
  }
  metrics["predictions_split"] = shown_name;
  write_json(o, "metrics.json", metrics);
  auto pred = open_out(o, "predictions.tsv");
  write_predictions(pred, shown.predicted, shown.actual);
  auto hist = open_out(o, "history.csv");
  write_history(hist, result.history);
  save_model_file(*result.model, (fs::path(o.out) / "model.json").string());
  std::cout << "trained " << to_string(cfg.model) << " for " << cfg.training.epochs << " epochs; " << shown_name << ' '
            << (cfg.task == TaskKind::seq2seq_toy ? "bleu" : "accuracy") << ' '
            << (shown.headline ? std::to_string(*shown.headline) : "undefined") << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.model.empty()) throw ContractError("--model is required");
  auto model = load_model_file(o.model);
  LabeledDataset data;
  std::string name;
  if (!o.data.empty()) {
    data = load_jsonl_dataset(o.data, model->config().task);
    name = o.data;
  } else {
    auto splits = load_splits(config_from(o));
    data = splits.test ? *splits.test : splits.val ? *splits.val : splits.train;
    name = splits.test ? "test" : splits.val ? "val" : "train";
  }
  auto ev = evaluate(*model, data);
  write_json(o, "metrics.json", {{"command", "eval"}, {"split", name}, {"report", ev.report}});
  auto pred = open_out(o, "predictions.tsv");
  write_predictions(pred, ev.predicted, ev.actual);
  std::cout << "evaluated " << data.size() << " samples; headline "
            << (ev.headline ? std::to_string(*ev.headline) : "undefined") << '\n';
  return 0;
}

int cmd_cv(const Options& o) {
  const auto cfg = config_from(o);
  auto splits = load_splits(cfg);
  auto cv = cross_validate(cfg, splits.train, o.k);
  cv.report["command"] = "cv";
  cv.report["model"] = to_string(cfg.model);
  write_json(o, "metrics.json", cv.report);
  auto pred = open_out(o, "predictions.tsv");
  write_predictions(pred, cv.predicted, cv.actual);
  std::cout << o.k << "-fold mean " << cv.report["metric"].get<std::string>() << ' ' << cv.report["mean"].dump() << '\n';
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto base = config_from(o);
  std::vector<ModelKind> kinds{base.model};
  if (o.kind == "all")
    kinds = all_model_kinds();
  else if (!o.kind.empty())
    kinds = {parse_model_kind(o.kind)};
  json reports = json::array();
  bool pass = true;
  for (auto kind : kinds) {
    auto cfg = base;
    cfg.model = kind;
    if (kind == ModelKind::block_relation) cfg.task = TaskKind::relation;
    if (kind != ModelKind::transformer_concat && cfg.task == TaskKind::seq2seq_toy) cfg.task = TaskKind::classification;
    if (kind == ModelKind::transformer_masked && cfg.head_roles().empty()) {
      cfg.role_list.assign(cfg.dims.heads, RoleSpec{Role::local, 1});
      cfg.roles_path.clear();
    }
    if (kind != ModelKind::block_relation && base.task == TaskKind::relation && base.model == ModelKind::block_relation)
      cfg.task = TaskKind::classification;
    auto r = gradcheck_report(cfg);
    pass = pass && r["pass"].get<bool>();
    std::cout << to_string(kind) << " (" << to_string(cfg.task) << "): worst " << r["worst"].dump()
              << (r["pass"].get<bool>() ? " ok" : " FAIL") << '\n';
    reports.push_back(std::move(r));
  }
  write_json(o, "metrics.json", {{"command", "gradcheck"}, {"pass", pass}, {"reports", reports}});
  return pass ? 0 : 1;
}

int cmd_score(const Options& o) {
  std::string emb = o.embeddings, tasks = o.tasks;
  if (!o.config.empty()) {
    const auto cfg = config_from(o);
    if (emb.empty()) emb = cfg.resolve(cfg.data.embeddings);
    if (tasks.empty()) tasks = cfg.resolve(cfg.data.train);
  }
  if (emb.empty() || tasks.empty()) throw ContractError("need --embeddings and --tasks (or a config naming them)");
  const auto store = EmbeddingStore::load_file(emb);
  const auto phrase_tasks = read_phrase_tasks_file(tasks);
  write_scores(std::cout, phrase_tasks, store);
  std::vector<std::string> scores, phrases;
  double total = 0.0, lo = 1.0, hi = -1.0;
  for (const auto& t : phrase_tasks) {
    const double s = compositionality_score(t.perturbations, store, t.context);
    total += s;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
    std::string p;
    for (const auto& w : t.perturbations.phrase) p += (p.empty() ? "" : " ") + w;
    phrases.push_back(p);
    scores.push_back(json(s).dump());
  }
  json metrics{{"command", "score-compositionality"}, {"n", phrase_tasks.size()}};
  if (!phrase_tasks.empty()) {
    metrics["mean"] = total / static_cast<double>(phrase_tasks.size());
    metrics["min"] = lo;
    metrics["max"] = hi;
  }
  write_json(o, "metrics.json", metrics);
  auto pred = open_out(o, "predictions.tsv");
  write_predictions(pred, scores, phrases);
  return 0;
}

int cmd_gen(const Options& o) {
  if (!o.config.empty()) {
    const auto cfg = config_from(o);
    if (!cfg.synthetic) throw ContractError("config has no synthetic section");
    const auto splits = load_splits(cfg);
    auto write = [&](const std::string& name, const LabeledDataset& d) {
      auto f = open_out(o, name);
      write_jsonl_dataset(f, d);
    };
    write("train.jsonl", splits.train);
    if (splits.val) write("val.jsonl", *splits.val);
    if (splits.test) write("test.jsonl", *splits.test);
    json metrics{{"command", "gen-data"}, {"task", cfg.synthetic->task}, {"train", splits.train.size()}};
    if (splits.val) metrics["val"] = splits.val->size();
    if (splits.test) metrics["test"] = splits.test->size();
    write_json(o, "metrics.json", metrics);
    return 0;
  }
  SyntheticSpec spec{o.task, o.size, o.length, o.vocab, o.window, o.seed.value_or(7)};
  const auto data = generate_synthetic(spec);
  auto f = open_out(o, o.task + ".jsonl");
  write_jsonl_dataset(f, data);
  std::size_t positives = 0;
  for (const auto& s : data.samples) positives += s.label == "1";
  json metrics{{"command", "gen-data"}, {"task", o.task}, {"size", data.size()}, {"seed", spec.seed}};
  if (data.task == TaskKind::classification) metrics["positive_fraction"] = static_cast<double>(positives) / data.size();
  write_json(o, "metrics.json", metrics);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqinfer: attention, encoders, metrics and experiments for sequence inference"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* c, bool needs_config) {
    auto* opt = c->add_option("--config", o.config, "experiment config (JSON)");
    if (needs_config) opt->required();
    c->add_option("--seed", o.seed, "override the training seed");
    c->add_option("--out", o.out, "output directory")->capture_default_str();
  };
  auto* train_cmd = app.add_subcommand("train", "train a model and write metrics, predictions, history and model.json");
  common(train_cmd, true);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model");
  common(eval_cmd, false);
  eval_cmd->add_option("--model", o.model, "model.json written by train")->required();
  eval_cmd->add_option("--data", o.data, "dataset to evaluate (default: the config's test, val or train split)");
  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation on the training data");
  common(cv_cmd, true);
  cv_cmd->add_option("--k", o.k, "number of folds")->capture_default_str();
  auto* gc_cmd = app.add_subcommand("gradcheck", "compare backward() with central finite differences");
  common(gc_cmd, true);
  gc_cmd->add_option("--kind", o.kind, "model kind to check, or 'all'");
  auto* sc_cmd = app.add_subcommand("score-compositionality", "score phrases against their perturbations");
  common(sc_cmd, false);
  sc_cmd->add_option("--embeddings", o.embeddings, "word-vector text file");
  sc_cmd->add_option("--tasks", o.tasks, "phrase task JSON-lines file");
  auto* gen_cmd = app.add_subcommand("gen-data", "write synthetic datasets as JSON lines");
  common(gen_cmd, false);
  gen_cmd->add_option("--task", o.task, "marker_window, copy or reverse")->capture_default_str();
  gen_cmd->add_option("--size", o.size)->capture_default_str();
  gen_cmd->add_option("--length", o.length)->capture_default_str();
  gen_cmd->add_option("--vocab", o.vocab)->capture_default_str();
  gen_cmd->add_option("--window", o.window)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (train_cmd->parsed()) return cmd_train(o);
    if (eval_cmd->parsed()) return cmd_eval(o);
    if (cv_cmd->parsed()) return cmd_cv(o);
    if (gc_cmd->parsed()) return cmd_gradcheck(o);
    if (sc_cmd->parsed()) return cmd_score(o);
    if (gen_cmd->parsed()) return cmd_gen(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
