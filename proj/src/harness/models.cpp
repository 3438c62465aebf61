#include "seqinfer/harness/models.hpp"

#include <algorithm>
#include <fstream>

#include "seqinfer/errors.hpp"

namespace seqinfer::harness {
namespace {

using nlohmann::json;

Tensor embedding_table(std::size_t rows, std::size_t d, Rng& rng) {
  std::vector<double> data(rows * d);
  for (auto& v : data) v = rng.uniform(-0.5, 0.5);
  return Tensor::from({rows, d}, std::move(data), true);
}

std::size_t argmax(const Tensor& t) {
  const auto d = t.data();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

Tensor last_row(const Tensor& m) {
  const std::size_t r = m.shape()[0] - 1;
  return reshape(gather_rows(m, std::span<const std::size_t>(&r, 1)), {m.shape()[1]});
}

class Classifier : public Model {
 public:
  Classifier(Blueprint bp, Rng& rng, const EmbeddingStore* pretrained) : Model(std::move(bp)) {
    const auto& cfg = bp_.config;
    const auto& d = cfg.dims;
    const std::size_t dm = d.d_model;
    embed_ = embedding_table(bp_.words.size(), dm, rng);
    if (pretrained) {
      if (pretrained->dimension() != dm)
        throw ContractError("embedding dimension " + std::to_string(pretrained->dimension()) + " != d_model " +
                            std::to_string(dm));
      auto data = embed_.mutable_data();
      for (std::size_t i = 0; i < bp_.words.size(); ++i)
        if (pretrained->contains(bp_.words.word(i))) {
          const auto& v = pretrained->lookup(bp_.words.word(i));
          std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(i * dm));
        }
    }
    if (cfg.data.freeze_embeddings) embed_ = embed_.detach();
    params_.push_back({"embed", embed_});

    std::size_t width = dm;
    MultiHeadConfig mh{d.heads, dm, d.d_k, Aggregation::concat, {}};
    switch (cfg.model) {
      case ModelKind::rnn:
        rnn_ = RnnCell::random(dm, dm, rng);
        rnn_.collect(params_, "rnn");
        break;
      case ModelKind::cnn_multiscale:
        cnn_ = CnnFilterBank::random(dm, d.kernel_sizes, d.filters, rng);
        cnn_.collect(params_, "cnn");
        width = cnn_.output_width();
        break;
      case ModelKind::transformer_concat:
      case ModelKind::transformer_masked:
      case ModelKind::transformer_gated:
        if (cfg.model != ModelKind::transformer_concat) mh.roles = cfg.head_roles();
        if (cfg.model == ModelKind::transformer_gated) mh.aggregation = Aggregation::gated;
        for (std::size_t l = 0; l < d.layers; ++l) {
          layers_.emplace_back(mh, d.d_ff, rng);
          layers_.back().collect(params_, "enc" + std::to_string(l));
        }
        break;
      case ModelKind::ms_encoder:
        ms_ = MsEncoderParams::random(mh, d.d_ff, rng);
        ms_.collect(params_, "ms");
        break;
      case ModelKind::block_relation: {
        deprel_embed_ = embedding_table(bp_.deprels.size(), d.tag_dim, rng);
        pos_embed_ = embedding_table(bp_.pos.size(), d.tag_dim, rng);
        params_.push_back({"deprel_embed", deprel_embed_});
        params_.push_back({"pos_embed", pos_embed_});
        br_ = BlockRelationParams::random(dm + 2 * d.tag_dim, d.kernel_sizes, d.filters, rng);
        br_.collect(params_, "block");
        width = br_.output_width();
        break;
      }
    }
    if (cfg.task == TaskKind::pair_inference) width *= 4;
    const std::size_t classes = bp_.labels.size();
    if (classes < 2) throw ContractError("classification needs at least two labels, got " + std::to_string(classes));
    w_out_ = glorot(width, classes, rng);
    b_out_ = Tensor::zeros({classes}, true);
    params_.push_back({"out.w", w_out_});
    params_.push_back({"out.b", b_out_});
  }

  Tensor logits(const Sample& s) const {
    Tensor f;
    if (bp_.config.task == TaskKind::pair_inference) {
      const Tensor u = encode(s.tokens, s.tree ? &*s.tree : nullptr, s);
      const Tensor v = encode(s.tokens2, s.tree2 ? &*s.tree2 : nullptr, s);
      f = concat({u, v, sub(u, v), mul(u, v)}, 0);
    } else {
      f = encode(s.tokens, s.tree ? &*s.tree : nullptr, s);
    }
    return add(matmul(f, w_out_), b_out_);
  }

  Tensor loss(const Sample& s) const override {
    const std::size_t target = label_id(s.label);
    return cross_entropy(logits(s), std::span<const std::size_t>(&target, 1));
  }

  std::string predict(const Sample& s) const override { return bp_.labels[argmax(logits(s))]; }

 private:
  std::size_t label_id(const std::string& label) const {
    auto it = std::lower_bound(bp_.labels.begin(), bp_.labels.end(), label);
    if (it == bp_.labels.end() || *it != label) throw ContractError("label '" + label + "' unknown to the model");
    return static_cast<std::size_t>(it - bp_.labels.begin());
  }

  Tensor encode(const Tokens& tokens, const DependencyTree* tree, const Sample& s) const {
    const auto& cfg = bp_.config;
    const auto ids = bp_.words.ids(tokens);
    Tensor x = gather_rows(embed_, ids);
    const std::size_t n = tokens.size();
    if ((cfg.model == ModelKind::ms_encoder || cfg.model == ModelKind::block_relation) && !tree)
      throw ContractError(to_string(cfg.model) + " needs dependency trees (sample on line " + std::to_string(s.line) + ")");
    if (tree && tree->size() != n) throw ContractError("tree and text lengths differ on line " + std::to_string(s.line));
    switch (cfg.model) {
      case ModelKind::rnn:
        return last_row(rnn_encode(rnn_, x, Tensor::zeros({cfg.dims.d_model})));
      case ModelKind::cnn_multiscale:
        return multi_scale_cnn_encode(pad_rows(x, cnn_.max_kernel()), cnn_);
      case ModelKind::transformer_concat:
      case ModelKind::transformer_masked:
      case ModelKind::transformer_gated:
        if (cfg.positional) x = add(x, sinusoidal_positions(n, cfg.dims.d_model));
        for (const auto& layer : layers_) x = layer.forward(x, tree);
        return mean_over_axis(x, 0);
      case ModelKind::ms_encoder:
        if (cfg.positional) x = add(x, sinusoidal_positions(n, cfg.dims.d_model));
        return ms_encode(x, segment_sentence(*tree), ms_);
      case ModelKind::block_relation: {
        const Tensor tags_d = gather_rows(deprel_embed_, bp_.deprels.ids(tree->deprels));
        const Tensor tags_p = gather_rows(pos_embed_, bp_.pos.ids(tree->pos));
        const Tensor enc = concat({x, tags_d, tags_p}, 1);
        return block_relation_repr(enc, extract_blocks(*tree, s.e1, s.e2), br_);
      }
    }
    throw ContractError("unsupported model kind");
  }

  Tensor embed_, deprel_embed_, pos_embed_;
  RnnCell rnn_;
  CnnFilterBank cnn_;
  std::vector<EncoderLayer> layers_;
  MsEncoderParams ms_;
  BlockRelationParams br_;
  Tensor w_out_, b_out_;
};

struct DecoderLayer {
  AttentionBlock self_attn, cross_attn;
  Tensor w1, b1, w2, b2;

  DecoderLayer(const MultiHeadConfig& cfg, std::size_t d_ff, Rng& rng)
      : self_attn(cfg, rng), cross_attn(cfg, rng) {
    w1 = glorot(cfg.d_model, d_ff, rng);
    b1 = Tensor::zeros({d_ff}, true);
    w2 = glorot(d_ff, cfg.d_model, rng);
    b2 = Tensor::zeros({cfg.d_model}, true);
  }

  Tensor forward(const Tensor& y, const Tensor& memory) const {
    const std::size_t m = y.shape()[0];
    const auto causal = build_role_mask({Role::forward}, m);
    std::vector<const RoleMask*> masks(self_attn.heads.size(), &causal);
    Tensor h = add(y, self_attn.forward(y, y, masks));
    h = add(h, cross_attn.forward(h, memory, {}));
    const Tensor ff = add_bias(matmul(relu(add_bias(matmul(h, w1), b1)), w2), b2);
    return add(h, ff);
  }

  void collect(ParamList& out, const std::string& prefix) const {
    self_attn.collect(out, prefix + ".self");
    cross_attn.collect(out, prefix + ".cross");
    out.push_back({prefix + ".ffn.w1", w1});
    out.push_back({prefix + ".ffn.b1", b1});
    out.push_back({prefix + ".ffn.w2", w2});
    out.push_back({prefix + ".ffn.b2", b2});
  }
};

class Seq2Seq : public Model {
 public:
  Seq2Seq(Blueprint bp, Rng& rng) : Model(std::move(bp)) {
    const auto& d = bp_.config.dims;
    const std::size_t v = bp_.words.size();
    embed_ = embedding_table(v, d.d_model, rng);
    params_.push_back({"embed", embed_});
    MultiHeadConfig mh{d.heads, d.d_model, d.d_k, Aggregation::concat, {}};
    for (std::size_t l = 0; l < d.layers; ++l) {
      encoder_.emplace_back(mh, d.d_ff, rng);
      encoder_.back().collect(params_, "enc" + std::to_string(l));
    }
    for (std::size_t l = 0; l < d.layers; ++l) {
      decoder_.emplace_back(mh, d.d_ff, rng);
      decoder_.back().collect(params_, "dec" + std::to_string(l));
    }
    w_out_ = glorot(d.d_model, v, rng);
    b_out_ = Tensor::zeros({v}, true);
    params_.push_back({"out.w", w_out_});
    params_.push_back({"out.b", b_out_});
    bos_ = bp_.words.id(kBos);
    eos_ = bp_.words.id(kEos);
  }

  Tensor loss(const Sample& s) const override {
    const Tensor memory = encode(s.tokens);
    std::vector<std::size_t> in{bos_};
    auto out = bp_.words.ids(s.target);
    in.insert(in.end(), out.begin(), out.end());
    out.push_back(eos_);
    return cross_entropy(decode_logits(memory, in), out);
  }

  std::string predict(const Sample& s) const override {
    const Tensor memory = encode(s.tokens);
    std::vector<std::size_t> prefix{bos_};
    std::string text;
    const std::size_t max_len = 2 * s.tokens.size() + 2;
    for (std::size_t step = 0; step < max_len; ++step) {
      const Tensor logits = decode_logits(memory, prefix);
      const std::size_t v = logits.shape()[1], last = logits.shape()[0] - 1;
      const auto d = logits.data().subspan(last * v, v);
      const auto next = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
      if (next == eos_) break;
      prefix.push_back(next);
      text += (text.empty() ? "" : " ") + bp_.words.word(next);
    }
    return text;
  }

 private:
  Tensor embed_seq(std::span<const std::size_t> ids) const {
    return add(gather_rows(embed_, ids), sinusoidal_positions(ids.size(), bp_.config.dims.d_model));
  }

  Tensor encode(const Tokens& src) const {
    const auto ids = bp_.words.ids(src);
    Tensor x = embed_seq(ids);
    for (const auto& layer : encoder_) x = layer.forward(x);
    return x;
  }

  Tensor decode_logits(const Tensor& memory, std::span<const std::size_t> prefix) const {
    Tensor y = embed_seq(prefix);
    for (const auto& layer : decoder_) y = layer.forward(y, memory);
    return add_bias(matmul(y, w_out_), b_out_);
  }

  Tensor embed_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Tensor w_out_, b_out_;
  std::size_t bos_ = 0, eos_ = 0;
};

json vocab_json(const Vocabulary& v) {
  return std::vector<std::string>(v.words().begin() + 1, v.words().end());
}

Vocabulary vocab_from_json(const json& j) {
  const auto words = j.get<std::vector<std::string>>();
  return Vocabulary::build({}, words);
}

}  // namespace

Blueprint Blueprint::from_data(const ExperimentConfig& cfg, const LabeledDataset& train) {
  Blueprint bp;
  bp.config = cfg;
  std::vector<Tokens> words, deprels, pos;
  for (const auto& s : train.samples) {
    words.push_back(s.tokens);
    if (!s.tokens2.empty()) words.push_back(s.tokens2);
    if (!s.target.empty()) words.push_back(s.target);
    for (const auto* t : {&s.tree, &s.tree2})
      if (*t) {
        deprels.push_back((*t)->deprels);
        pos.push_back((*t)->pos);
      }
  }
  std::vector<std::string> reserved;
  if (cfg.task == TaskKind::seq2seq_toy) reserved = {kBos, kEos};
  bp.words = Vocabulary::build(words, reserved);
  bp.deprels = Vocabulary::build(deprels);
  bp.pos = Vocabulary::build(pos);
  bp.labels = train.labels;
  return bp;
}

std::vector<Tensor> Model::trainable() const {
  std::vector<Tensor> out;
  for (const auto& p : params_)
    if (p.tensor.requires_grad()) out.push_back(p.tensor);
  return out;
}

std::vector<std::string> Model::frozen_groups() const {
  std::vector<std::string> out;
  for (const auto& p : params_)
    if (!p.tensor.requires_grad()) out.push_back(p.name);
  return out;
}

json Model::save() const {
  json j;
  j["format"] = "seqinfer-model";
  j["version"] = 1;
  auto cfg = bp_.config;
  if (!cfg.roles_path.empty()) {
    cfg.role_list = cfg.head_roles();
    cfg.roles_path.clear();
  }
  j["config"] = cfg.to_json();
  j["words"] = vocab_json(bp_.words);
  j["deprels"] = vocab_json(bp_.deprels);
  j["pos"] = vocab_json(bp_.pos);
  j["labels"] = bp_.labels;
  json params = json::array();
  for (const auto& p : params_)
    params.push_back({{"name", p.name},
                      {"shape", p.tensor.shape()},
                      {"data", std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())}});
  j["params"] = params;
  return j;
}

std::unique_ptr<Model> build_model(const Blueprint& bp, Rng& rng, const EmbeddingStore* pretrained) {
  bp.config.validate_model();
  if (bp.config.task == TaskKind::compositionality) throw ContractError("compositionality tasks have no trainable model");
  if (bp.config.task == TaskKind::seq2seq_toy) {
    if (pretrained) throw ContractError("seq2seq_toy does not take pretrained embeddings");
    return std::make_unique<Seq2Seq>(bp, rng);
  }
  return std::make_unique<Classifier>(bp, rng, pretrained);
}

std::unique_ptr<Model> load_model(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "seqinfer-model") throw FormatError("not a seqinfer model file");
    Blueprint bp;
    bp.config = ExperimentConfig::from_json(j.at("config"));
    bp.words = vocab_from_json(j.at("words"));
    bp.deprels = vocab_from_json(j.at("deprels"));
    bp.pos = vocab_from_json(j.at("pos"));
    bp.labels = j.at("labels").get<std::vector<std::string>>();
    Rng rng(0);
    auto model = build_model(bp, rng);
    const auto& saved = j.at("params");
    if (saved.size() != model->params().size()) throw FormatError("model file has a different parameter layout");
    for (std::size_t i = 0; i < saved.size(); ++i) {
      const auto& p = model->params()[i];
      if (saved[i].at("name").get<std::string>() != p.name || saved[i].at("shape").get<Shape>() != p.tensor.shape())
        throw FormatError("model parameter " + std::to_string(i) + " does not match '" + p.name + "'");
      const auto data = saved[i].at("data").get<std::vector<double>>();
      if (data.size() != p.tensor.numel()) throw FormatError("model parameter '" + p.name + "' has wrong size");
      auto impl = p.tensor.impl();
      impl->data = data;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

std::unique_ptr<Model> load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("model file " + path + ": " + e.what());
  }
  return load_model(j);
}

void save_model_file(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file " + path);
  out << model.save().dump(1) << '\n';
}

bool needs_trees(const ExperimentConfig& cfg) {
  if (cfg.model == ModelKind::ms_encoder || cfg.model == ModelKind::block_relation) return true;
  if (cfg.model == ModelKind::transformer_masked || cfg.model == ModelKind::transformer_gated)
    for (const auto& r : cfg.head_roles())
      if (r.role == Role::syntactic) return true;
  return false;
}

}  // namespace seqinfer::harness
