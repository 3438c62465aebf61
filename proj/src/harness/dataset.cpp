#include "seqinfer/harness/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "seqinfer/errors.hpp"
#include "seqinfer/random.hpp"

namespace seqinfer::harness {
namespace {

using nlohmann::json;

Tokens read_text(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'", line);
  const auto& v = j.at(key);
  Tokens out;
  if (v.is_string()) {
    std::istringstream ss(v.get<std::string>());
    for (std::string t; ss >> t;) out.push_back(t);
  } else if (v.is_array()) {
    for (const auto& t : v) {
      if (!t.is_string()) throw FormatError(std::string("field '") + key + "' must hold strings", line);
      out.push_back(t.get<std::string>());
    }
  } else {
    throw FormatError(std::string("field '") + key + "' must be a string or token array", line);
  }
  if (out.empty()) throw FormatError(std::string("field '") + key + "' is empty", line);
  return out;
}

std::optional<DependencyTree> read_tree(const json& j, const Tokens& tokens, const std::string& suffix,
                                        std::size_t line) {
  const std::string hk = "heads" + suffix, dk = "deprels" + suffix, pk = "pos" + suffix;
  if (!j.contains(hk)) return std::nullopt;
  DependencyTree t;
  t.tokens = tokens;
  t.heads = j.at(hk).get<std::vector<std::size_t>>();
  t.deprels = j.contains(dk) ? j.at(dk).get<std::vector<std::string>>() : std::vector<std::string>(tokens.size(), "dep");
  t.pos = j.contains(pk) ? j.at(pk).get<std::vector<std::string>>() : std::vector<std::string>(tokens.size(), "X");
  try {
    t.validate();
  } catch (const TreeError& e) {
    throw FormatError(e.what(), line);
  }
  return t;
}

Span read_span(const json& j, const char* key, std::size_t n, std::size_t line) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'", line);
  const auto v = j.at(key).get<std::vector<std::size_t>>();
  if (v.size() != 2 || v[0] < 1 || v[0] > v[1] || v[1] > n)
    throw FormatError(std::string("field '") + key + "' must be [first, last] within the sentence", line);
  return Span{v[0], v[1]};
}

std::string read_label(const json& j, std::size_t line) {
  if (!j.contains("label")) throw FormatError("missing field 'label'", line);
  const auto& v = j.at("label");
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw FormatError("field 'label' must be a string or integer", line);
}

void write_tree(json& j, const std::optional<DependencyTree>& t, const std::string& suffix) {
  if (!t) return;
  j["heads" + suffix] = t->heads;
  j["deprels" + suffix] = t->deprels;
  j["pos" + suffix] = t->pos;
}

}  // namespace

std::size_t LabeledDataset::label_index(const std::string& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) throw ContractError("label '" + label + "' is not in the label vocabulary");
  return static_cast<std::size_t>(it - labels.begin());
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.task = task;
  out.labels = labels;
  for (auto i : indices) out.samples.push_back(samples.at(i));
  return out;
}

void LabeledDataset::refresh_labels() {
  std::set<std::string> s;
  for (const auto& x : samples)
    if (task != TaskKind::seq2seq_toy) s.insert(x.label);
  labels.assign(s.begin(), s.end());
}

LabeledDataset read_jsonl_dataset(std::istream& in, TaskKind task) {
  if (task == TaskKind::compositionality) throw ContractError("compositionality tasks use phrase task files");
  LabeledDataset data;
  data.task = task;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw FormatError("expected a JSON object", line);
    Sample s;
    s.line = line;
    try {
      switch (task) {
        case TaskKind::classification:
          s.tokens = read_text(j, "text", line);
          s.tree = read_tree(j, s.tokens, "", line);
          s.label = read_label(j, line);
          break;
        case TaskKind::pair_inference:
          s.tokens = read_text(j, "text1", line);
          s.tokens2 = read_text(j, "text2", line);
          s.tree = read_tree(j, s.tokens, "", line);
          s.tree2 = read_tree(j, s.tokens2, "2", line);
          s.label = read_label(j, line);
          break;
        case TaskKind::relation:
          s.tokens = read_text(j, "text", line);
          s.tree = read_tree(j, s.tokens, "", line);
          s.e1 = read_span(j, "e1", s.tokens.size(), line);
          s.e2 = read_span(j, "e2", s.tokens.size(), line);
          if (s.e1.first <= s.e2.last && s.e2.first <= s.e1.last) throw FormatError("entity spans overlap", line);
          s.label = read_label(j, line);
          break;
        case TaskKind::seq2seq_toy:
          s.tokens = read_text(j, "source", line);
          s.target = read_text(j, "target", line);
          break;
        case TaskKind::compositionality:
          break;
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("bad field: ") + e.what(), line);
    }
    data.samples.push_back(std::move(s));
  }
  if (data.samples.empty()) throw FormatError("dataset is empty");
  data.refresh_labels();
  return data;
}

LabeledDataset load_jsonl_dataset(const std::string& path, TaskKind task) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset " + path);
  return read_jsonl_dataset(in, task);
}

void write_jsonl_dataset(std::ostream& out, const LabeledDataset& data) {
  for (const auto& s : data.samples) {
    json j;
    switch (data.task) {
      case TaskKind::classification:
        j["text"] = s.tokens;
        write_tree(j, s.tree, "");
        j["label"] = s.label;
        break;
      case TaskKind::pair_inference:
        j["text1"] = s.tokens;
        j["text2"] = s.tokens2;
        write_tree(j, s.tree, "");
        write_tree(j, s.tree2, "2");
        j["label"] = s.label;
        break;
      case TaskKind::relation:
        j["text"] = s.tokens;
        write_tree(j, s.tree, "");
        j["e1"] = {s.e1.first, s.e1.last};
        j["e2"] = {s.e2.first, s.e2.last};
        j["label"] = s.label;
        break;
      case TaskKind::seq2seq_toy:
        j["source"] = s.tokens;
        j["target"] = s.target;
        break;
      case TaskKind::compositionality:
        break;
    }
    out << j.dump() << '\n';
  }
}

Vocabulary::Vocabulary() {
  words_.push_back(kUnknown);
  index_[kUnknown] = 0;
}

Vocabulary Vocabulary::build(const std::vector<Tokens>& corpora, const std::vector<std::string>& reserved) {
  Vocabulary v;
  for (const auto& r : reserved)
    if (!v.index_.count(r)) {
      v.index_[r] = v.words_.size();
      v.words_.push_back(r);
    }
  std::set<std::string> all;
  for (const auto& c : corpora) all.insert(c.begin(), c.end());
  for (const auto& w : all)
    if (!v.index_.count(w)) {
      v.index_[w] = v.words_.size();
      v.words_.push_back(w);
    }
  return v;
}

std::size_t Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0 : it->second;
}

std::vector<std::size_t> Vocabulary::ids(const Tokens& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.size == 0 || spec.length == 0) throw ContractError("synthetic data needs positive size and length");
  Rng rng(spec.seed);
  LabeledDataset data;
  if (spec.task == "marker_window") {
    if (spec.vocab < 3) throw ContractError("marker_window needs vocab >= 3 (anchor, marker and a filler)");
    if (spec.length < spec.window + 2)
      throw ContractError("marker_window needs length >= window + 2 so both labels are possible");
    data.task = TaskKind::classification;
    const std::size_t fillers = spec.vocab - 2;
    const auto n = spec.length;
    for (std::size_t i = 0; i < spec.size; ++i) {
      const bool positive = rng.below(2) == 1;
      std::size_t a = 0;
      std::vector<std::size_t> options;
      do {
        a = rng.below(n);
        options.clear();
        for (std::size_t m = 0; m < n; ++m) {
          if (m == a) continue;
          const std::size_t dist = m > a ? m - a : a - m;
          if ((dist <= spec.window) == positive) options.push_back(m);
        }
      } while (options.empty());
      const std::size_t m = options[rng.below(options.size())];
      Sample s;
      s.tokens.resize(n);
      for (auto& t : s.tokens) t = "t" + std::to_string(rng.below(fillers));
      s.tokens[a] = "A";
      s.tokens[m] = "M";
      s.label = positive ? "1" : "0";
      s.line = i + 1;
      data.samples.push_back(std::move(s));
    }
  } else if (spec.task == "copy" || spec.task == "reverse") {
    if (spec.vocab < 2) throw ContractError(spec.task + " needs vocab >= 2");
    data.task = TaskKind::seq2seq_toy;
    for (std::size_t i = 0; i < spec.size; ++i) {
      Sample s;
      s.tokens.resize(spec.length);
      for (auto& t : s.tokens) t = "w" + std::to_string(rng.below(spec.vocab));
      s.target = s.tokens;
      if (spec.task == "reverse") std::reverse(s.target.begin(), s.target.end());
      s.line = i + 1;
      data.samples.push_back(std::move(s));
    }
  } else {
    throw ContractError("unknown synthetic task '" + spec.task + "'");
  }
  data.refresh_labels();
  return data;
}

}  // namespace seqinfer::harness
