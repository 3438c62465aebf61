// Python bindings. Matrices cross the boundary as lists of rows.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <set>
#include <sstream>

#include "seqinfer/attention.hpp"
#include "seqinfer/compositionality.hpp"
#include "seqinfer/dependency.hpp"
#include "seqinfer/encoders.hpp"
#include "seqinfer/errors.hpp"
#include "seqinfer/harness/config.hpp"
#include "seqinfer/harness/training.hpp"
#include "seqinfer/metrics.hpp"
#include "seqinfer/ops.hpp"
#include "seqinfer/splits.hpp"

namespace py = pybind11;
using namespace seqinfer;

namespace {

using Rows = std::vector<std::vector<double>>;
using Indices = std::vector<std::size_t>;

Tensor to_tensor(const Rows& rows) {
  if (rows.empty() || rows[0].empty()) throw DimensionError("matrix must be non-empty");
  for (const auto& r : rows)
    if (r.size() != rows[0].size()) throw DimensionError("matrix rows differ in length");
  return Tensor::matrix(rows);
}

Rows to_rows(const Tensor& t) {
  const auto& s = t.shape();
  const std::size_t cols = s.size() == 2 ? s[1] : t.numel();
  const std::size_t n = s.size() == 2 ? s[0] : 1;
  Rows out(n, std::vector<double>(cols));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i][j] = t.data()[i * cols + j];
  return out;
}

DependencyTree make_tree(std::vector<std::string> tokens, Indices heads, std::vector<std::string> deprels) {
  DependencyTree t{std::move(tokens), std::move(heads), std::move(deprels), {}};
  if (t.deprels.empty()) t.deprels.assign(t.tokens.size(), "dep");
  t.pos.assign(t.tokens.size(), "_");
  t.validate();
  return t;
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ContractError("unknown activation '" + name + "'");
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ConfusionMatrix confusion(const std::vector<std::string>& predicted, const std::vector<std::string>& actual,
                          std::vector<std::string> labels) {
  if (predicted.size() != actual.size()) throw DimensionError("predicted and actual differ in length");
  if (labels.empty()) {
    std::set<std::string> all(actual.begin(), actual.end());
    all.insert(predicted.begin(), predicted.end());
    labels.assign(all.begin(), all.end());
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < predicted.size(); ++i) pairs.emplace_back(predicted[i], actual[i]);
  return confusion_from_pairs(pairs, std::move(labels));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Attention, sequence encoders, metrics and compositionality scoring";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<WindowError>(m, "WindowError", PyExc_ValueError);
  py::register_exception<TreeError>(m, "TreeError", PyExc_ValueError);
  py::register_exception<DegenerateSliceError>(m, "DegenerateSliceError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);

  // attention
  m.def("scaled_dot_attention", [](const Rows& q, const Rows& k, const Rows& v) {
    return to_rows(scaled_dot_attention(to_tensor(q), to_tensor(k), to_tensor(v)));
  }, py::arg("q"), py::arg("k"), py::arg("v"));
  m.def("masked_attention", [](const Rows& q, const Rows& k, const Rows& v, const Rows& mask) {
    auto rm = RoleMask::from_matrix(RoleSpec{}, to_tensor(mask));
    return to_rows(masked_attention(to_tensor(q), to_tensor(k), to_tensor(v), rm));
  }, py::arg("q"), py::arg("k"), py::arg("v"), py::arg("mask"),
     "mask entries are 0 (attend) or -inf (blocked)");
  m.def("attention_weights", [](const Rows& q, const Rows& k) {
    return to_rows(attention_weights(to_tensor(q), to_tensor(k)));
  });
  m.def("role_mask", [](const std::string& role, std::size_t n, std::optional<Indices> heads) {
    const auto spec = RoleSpec::parse(role);
    if (!heads) return to_rows(build_role_mask(spec, n).matrix());
    auto tree = make_tree(std::vector<std::string>(heads->size(), "_"), *heads, {});
    return to_rows(build_role_mask(spec, n, &tree).matrix());
  }, py::arg("role"), py::arg("n"), py::arg("heads") = py::none(),
     "role: global, self, forward, backward, local:<w> or syntactic (needs heads)");
  m.def("gated_heads", [](const Rows& x, const std::vector<std::array<Rows, 3>>& qkv, const std::vector<double>& gates,
                          const std::vector<Rows>& proj) {
    std::vector<HeadParams> heads;
    for (const auto& h : qkv) heads.push_back({to_tensor(h[0]), to_tensor(h[1]), to_tensor(h[2])});
    HeadGates g;
    for (double raw : gates) g.raw.push_back(Tensor::scalar(raw));
    std::vector<Tensor> p;
    for (const auto& r : proj) p.push_back(to_tensor(r));
    return to_rows(multi_head_gated(to_tensor(x), heads, g, p));
  }, py::arg("x"), py::arg("heads"), py::arg("gate_logits"), py::arg("projections"),
     "heads: [w_q, w_k, w_v] per head; gates are sigmoid(gate_logits)");
  m.def("sinusoidal_positions", [](std::size_t n, std::size_t d) { return to_rows(sinusoidal_positions(n, d)); });

  // encoders
  m.def("rnn_encode", [](const Rows& w_x, const Rows& w_h, const std::vector<double>& b, const Rows& seq,
                         std::optional<std::vector<double>> h0, const std::string& activation) {
    RnnCell cell{to_tensor(w_x), to_tensor(w_h), Tensor::vector(b), parse_activation(activation)};
    auto init = h0 ? Tensor::vector(*h0) : Tensor::zeros({cell.d_h()});
    return to_rows(rnn_encode(cell, to_tensor(seq), init));
  }, py::arg("w_x"), py::arg("w_h"), py::arg("b"), py::arg("sequence"), py::arg("h0") = py::none(),
     py::arg("activation") = "tanh");
  m.def("cnn_feature_map", [](const Rows& seq, std::size_t width, const Rows& w, const std::vector<double>& b,
                              const std::string& activation) {
    ConvFilter f{width, to_tensor(w), Tensor::vector(b)};
    return to_rows(cnn_feature_map(to_tensor(seq), f, parse_activation(activation)));
  }, py::arg("sequence"), py::arg("width"), py::arg("w"), py::arg("b"), py::arg("activation") = "relu");

  // dependency structure, 1-based token indices
  m.def("segment_sentence", [](std::vector<std::string> tokens, Indices heads, std::vector<std::string> deprels) {
    auto seg = segment_sentence(make_tree(std::move(tokens), std::move(heads), std::move(deprels)));
    return std::make_pair(seg.major, seg.surrounding);
  }, py::arg("tokens"), py::arg("heads"), py::arg("deprels"));
  m.def("extract_blocks", [](std::vector<std::string> tokens, Indices heads, std::pair<std::size_t, std::size_t> e1,
                             std::pair<std::size_t, std::size_t> e2) {
    auto tree = make_tree(std::move(tokens), std::move(heads), {});
    auto b = extract_blocks(tree, {e1.first, e1.second}, {e2.first, e2.second});
    return std::make_pair(b.block1, b.block2);
  }, py::arg("tokens"), py::arg("heads"), py::arg("e1"), py::arg("e2"));

  // metrics
  m.def("metric_report", [](const std::vector<std::string>& predicted, const std::vector<std::string>& actual,
                            std::vector<std::string> labels) {
    return to_py(metric_report(confusion(predicted, actual, std::move(labels))));
  }, py::arg("predicted"), py::arg("actual"), py::arg("labels") = std::vector<std::string>{},
     "undefined metrics are None");
  m.def("accuracy", [](const std::vector<std::string>& predicted, const std::vector<std::string>& actual) {
    return accuracy(confusion(predicted, actual, {}));
  });
  m.def("bleu", [](const TokenSeq& candidate, const std::vector<TokenSeq>& references, std::size_t max_n,
                   std::vector<double> weights) { return bleu(candidate, references, max_n, std::move(weights)); },
        py::arg("candidate"), py::arg("references"), py::arg("max_n") = 4, py::arg("weights") = std::vector<double>{});
  m.def("corpus_bleu", [](const std::vector<TokenSeq>& candidates, const std::vector<std::vector<TokenSeq>>& references,
                          std::size_t max_n) { return corpus_bleu(candidates, references, max_n); },
        py::arg("candidates"), py::arg("references"), py::arg("max_n") = 4);

  // splits
  m.def("split_dataset", [](std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
    auto s = split_dataset(n, ratios, seed);
    return py::make_tuple(s.train, s.val, s.test);
  }, py::arg("n"), py::arg("ratios"), py::arg("seed"));
  m.def("kfold_split", [](std::size_t n, std::size_t k, std::uint64_t seed) { return kfold_split(n, k, seed).fold_of; },
        py::arg("n"), py::arg("k"), py::arg("seed"), "fold index of every sample");
  m.def("cross_validation_score", [](const std::vector<double>& scores) { return cross_validation_score(scores); });

  // compositionality
  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def(py::init<>())
      .def_static("load", &EmbeddingStore::load_file, py::arg("path"))
      .def_static("parse", [](const std::string& text) {
        std::istringstream in(text);
        return EmbeddingStore::load(in);
      })
      .def("insert", &EmbeddingStore::insert)
      .def("lookup", &EmbeddingStore::lookup)
      .def("dimension", &EmbeddingStore::dimension)
      .def("rescaled", &EmbeddingStore::rescaled)
      .def("__len__", &EmbeddingStore::size)
      .def("__contains__", &EmbeddingStore::contains);
  auto context = [](Tokens scenario, std::vector<std::pair<std::string, double>> global, double lambda) {
    return PhraseContext{std::move(scenario), std::move(global), lambda};
  };
  m.def("phrase_vector", [context](const Tokens& phrase, const EmbeddingStore& store, Tokens scenario,
                                   std::vector<std::pair<std::string, double>> global, double lambda) {
    return phrase_vector(phrase, store, context(std::move(scenario), std::move(global), lambda));
  }, py::arg("phrase"), py::arg("store"), py::arg("scenario") = Tokens{},
     py::arg("global_context") = std::vector<std::pair<std::string, double>>{}, py::arg("lam") = 0.5);
  m.def("compositionality_score", [context](const Tokens& phrase, std::vector<Tokens> perturbations,
                                            const EmbeddingStore& store, Tokens scenario,
                                            std::vector<std::pair<std::string, double>> global, double lambda) {
    return compositionality_score({phrase, std::move(perturbations)}, store,
                                  context(std::move(scenario), std::move(global), lambda));
  }, py::arg("phrase"), py::arg("perturbations"), py::arg("store"), py::arg("scenario") = Tokens{},
     py::arg("global_context") = std::vector<std::pair<std::string, double>>{}, py::arg("lam") = 0.5);
  m.def("cosine", [](const std::vector<double>& a, const std::vector<double>& b) { return cosine(a, b); });

  // experiments
  m.def("gradcheck", [](const py::object& config) {
    return to_py(harness::gradcheck_report(harness::ExperimentConfig::from_json(from_py(config))));
  }, py::arg("config"), "finite-difference check of every parameter group for a config dict");
  m.def("train_and_evaluate", [](const py::object& config, const std::string& base_dir) {
    const auto cfg = harness::ExperimentConfig::from_json(from_py(config), base_dir);
    cfg.validate();
    auto splits = harness::load_splits(cfg);
    const auto* val = splits.val ? &*splits.val : nullptr;
    auto result = harness::train(cfg, splits.train, val);
    nlohmann::json out{{"history", nlohmann::json::array()}};
    for (const auto& e : result.history)
      out["history"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                                {"val_metric", e.val_metric ? nlohmann::json(*e.val_metric) : nlohmann::json()}});
    out["train"] = harness::evaluate(*result.model, splits.train).report;
    if (val) out["val"] = harness::evaluate(*result.model, *val).report;
    if (splits.test) out["test"] = harness::evaluate(*result.model, *splits.test).report;
    return to_py(out);
  }, py::arg("config"), py::arg("base_dir") = ".");
}
