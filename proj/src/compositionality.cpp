#include "seqinfer/compositionality.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "seqinfer/errors.hpp"

namespace seqinfer {
namespace {

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool is_count_header(const std::vector<std::string>& fields) {
  if (fields.size() != 2) return false;
  for (const auto& f : fields)
    if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) return false;
  return true;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

EmbeddingStore EmbeddingStore::load(std::istream& in) {
  EmbeddingStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    // Optional word2vec header `count dim`.
    if (lineno == 1 && is_count_header(fields)) continue;
    if (fields.size() < 2) throw FormatError("word without vector values", lineno);
    std::vector<double> vec(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i)
      if (!parse_double(fields[i], vec[i - 1])) throw FormatError("non-numeric vector value '" + fields[i] + "'", lineno);
    if (store.dim_ && *store.dim_ != vec.size())
      throw FormatError("vector has " + std::to_string(vec.size()) + " values, expected " + std::to_string(*store.dim_),
                        lineno);
    store.insert(fields[0], std::move(vec));
  }
  return store;
}

EmbeddingStore EmbeddingStore::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embedding file " + path);
  return load(in);
}

void EmbeddingStore::insert(const std::string& word, std::vector<double> vec) {
  if (vec.empty()) throw ContractError("embedding vector for '" + word + "' is empty");
  if (dim_ && *dim_ != vec.size()) throw DimensionError("embedding for '" + word + "' has wrong dimension");
  dim_ = vec.size();
  auto [it, inserted] = vectors_.insert_or_assign(word, std::move(vec));
  if (!inserted) ++duplicates_;
}

std::size_t EmbeddingStore::dimension() const {
  if (!dim_) throw LookupError("embedding store is empty; dimension undefined");
  return *dim_;
}

const std::vector<double>& EmbeddingStore::lookup(const std::string& word) const {
  auto it = vectors_.find(word);
  if (it == vectors_.end()) throw LookupError("word '" + word + "' not in embedding store");
  return it->second;
}

EmbeddingStore EmbeddingStore::rescaled(double factor) const {
  EmbeddingStore out = *this;
  for (auto& [w, v] : out.vectors_)
    for (auto& x : v) x *= factor;
  return out;
}

void PhraseContext::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("lambda must lie in [0,1]");
  for (const auto& [term, w] : global_context)
    if (!(w >= 0.0)) throw ContractError("global context weight for '" + term + "' is negative");
}

void PerturbationSet::validate() const {
  if (phrase.empty()) throw ContractError("phrase is empty");
  if (variants.empty()) throw ContractError("perturbation set is empty");
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const auto& var = variants[v];
    std::size_t diff = 0;
    if (var.size() == phrase.size())
      for (std::size_t i = 0; i < phrase.size(); ++i) diff += var[i] != phrase[i];
    if (diff != 1)
      throw ContractError("perturbation " + std::to_string(v) + " must replace exactly one token of the phrase");
  }
}

std::vector<double> token_weights(const Tokens& phrase, const PhraseContext& ctx) {
  ctx.validate();
  const std::size_t n = phrase.size();
  const double uniform = 1.0 / static_cast<double>(n);

  std::vector<double> scen(n, 0.0);
  double scen_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& t : ctx.usage_scenario) scen[i] += t == phrase[i] ? 1.0 : 0.0;
    scen_total += scen[i];
  }
  for (auto& w : scen) w = scen_total > 0.0 ? w / scen_total : uniform;

  std::vector<double> glob(n, 0.0);
  double glob_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [term, w] : ctx.global_context)
      if (term == phrase[i]) glob[i] += w;
    glob_total += glob[i];
  }
  for (auto& w : glob) w = glob_total > 0.0 ? w / glob_total : uniform;

  std::vector<double> out(n);
  // Equal evidence gives exactly that weight for every lambda.
  for (std::size_t i = 0; i < n; ++i) out[i] = glob[i] + ctx.lambda * (scen[i] - glob[i]);
  return out;
}

std::vector<double> phrase_vector(const Tokens& phrase, const EmbeddingStore& store, const PhraseContext& ctx) {
  if (phrase.empty()) throw ContractError("phrase is empty");
  std::string missing;
  for (const auto& t : phrase)
    if (!store.contains(t)) missing += (missing.empty() ? "" : ", ") + t;
  if (!missing.empty()) throw LookupError("out-of-vocabulary phrase tokens: " + missing);
  const auto weights = token_weights(phrase, ctx);
  std::vector<double> v(store.dimension(), 0.0);
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    const auto& e = store.lookup(phrase[i]);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += weights[i] * e[j];
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw ContractError("phrase vector has zero norm");
  for (auto& x : v) x /= norm;
  return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("cosine: dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ContractError("cosine of a zero vector");
  const double c = dot / std::sqrt(na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double compositionality_score(const PerturbationSet& set, const EmbeddingStore& store, const PhraseContext& ctx) {
  set.validate();
  const auto base = phrase_vector(set.phrase, store, ctx);
  double total = 0.0;
  for (const auto& var : set.variants) total += cosine(base, phrase_vector(var, store, ctx));
  return total / static_cast<double>(set.variants.size());
}

std::vector<PhraseTask> read_phrase_tasks(std::istream& in) {
  using nlohmann::json;
  std::vector<PhraseTask> tasks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PhraseTask task;
      for (const char* key : {"phrase", "perturbations"})
        if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'", lineno);
      task.perturbations.phrase = j.at("phrase").get<Tokens>();
      task.perturbations.variants = j.at("perturbations").get<std::vector<Tokens>>();
      if (j.contains("scenario")) task.context.usage_scenario = j.at("scenario").get<Tokens>();
      if (j.contains("global_context"))
        for (const auto& pair : j.at("global_context")) {
          if (!pair.is_array() || pair.size() != 2) throw FormatError("global_context entries are [term, weight]", lineno);
          task.context.global_context.emplace_back(pair[0].get<std::string>(), pair[1].get<double>());
        }
      if (j.contains("lambda")) task.context.lambda = j.at("lambda").get<double>();
      task.context.validate();
      task.perturbations.validate();
      tasks.push_back(std::move(task));
    } catch (const json::exception& e) {
      throw FormatError(std::string("bad phrase task: ") + e.what(), lineno);
    } catch (const ContractError& e) {
      throw FormatError(e.what(), lineno);
    }
  }
  return tasks;
}

std::vector<PhraseTask> read_phrase_tasks_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open phrase task file " + path);
  return read_phrase_tasks(in);
}

void write_scores(std::ostream& out, const std::vector<PhraseTask>& tasks, const EmbeddingStore& store) {
  for (const auto& t : tasks) {
    std::string phrase;
    for (const auto& tok : t.perturbations.phrase) phrase += (phrase.empty() ? "" : " ") + tok;
    out << phrase << '\t' << format_double(compositionality_score(t.perturbations, store, t.context)) << '\n';
  }
}

}  // namespace seqinfer
