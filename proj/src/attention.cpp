#include "seqinfer/attention.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "seqinfer/errors.hpp"

namespace seqinfer {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_masks(std::span<const RoleMask* const> masks, std::size_t heads) {
  if (!masks.empty() && masks.size() != heads)
    throw ContractError("got " + std::to_string(masks.size()) + " masks for " + std::to_string(heads) + " heads");
}

const RoleMask* mask_at(std::span<const RoleMask* const> masks, std::size_t i) {
  return masks.empty() ? nullptr : masks[i];
}

}  // namespace

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = rng.uniform(-a, a);
  return Tensor::from({rows, cols}, std::move(data), true);
}

RoleSpec RoleSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  RoleSpec spec;
  if (name == "global") spec.role = Role::global;
  else if (name == "self") spec.role = Role::self;
  else if (name == "forward") spec.role = Role::forward;
  else if (name == "backward") spec.role = Role::backward;
  else if (name == "syntactic") spec.role = Role::syntactic;
  else if (name == "local") spec.role = Role::local;
  else throw ContractError("unknown role tag '" + text + "'");
  if (spec.role == Role::local) {
    if (colon == std::string::npos) throw ContractError("local role needs a window, e.g. local:2");
    const std::string w = text.substr(colon + 1);
    std::size_t used = 0;
    try {
      spec.window = std::stoul(w, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (w.empty() || used != w.size() || w[0] == '-') throw ContractError("bad local window in '" + text + "'");
  } else if (colon != std::string::npos) {
    throw ContractError("role '" + name + "' takes no window");
  }
  return spec;
}

std::string RoleSpec::str() const {
  switch (role) {
    case Role::global: return "global";
    case Role::self: return "self";
    case Role::forward: return "forward";
    case Role::backward: return "backward";
    case Role::local: return "local:" + std::to_string(window);
    case Role::syntactic: return "syntactic";
  }
  return "?";
}

RoleMask RoleMask::from_matrix(RoleSpec spec, const Tensor& matrix) {
  if (matrix.dim() != 2 || matrix.shape()[0] != matrix.shape()[1])
    throw DimensionError("role mask must be square, got " + shape_str(matrix.shape()));
  const std::size_t n = matrix.shape()[0];
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = matrix.at(i, j);
      if (v == 0.0) any = true;
      else if (v != kNegInf) throw ContractError("role mask entries must be 0 or -inf");
    }
    if (!any) throw DegenerateSliceError("role mask row " + std::to_string(i) + " excludes every position");
  }
  return RoleMask(spec, matrix.detach());
}

RoleMask build_role_mask(const RoleSpec& spec, std::size_t n, const DependencyTree* tree) {
  if (n == 0) throw ContractError("role mask needs n >= 1");
  if (spec.role == Role::syntactic) {
    if (!tree) throw ContractError("syntactic role needs a dependency tree");
    if (tree->size() != n)
      throw DimensionError("dependency tree has " + std::to_string(tree->size()) + " tokens, mask needs " +
                           std::to_string(n));
  }
  std::vector<double> m(n * n, kNegInf);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      bool include = false;
      switch (spec.role) {
        case Role::global: include = true; break;
        case Role::self: include = i == j; break;
        case Role::forward: include = j <= i; break;
        case Role::backward: include = j >= i; break;
        case Role::local: include = (i > j ? i - j : j - i) <= spec.window; break;
        case Role::syntactic:
          include = i == j || tree->heads[i] == j + 1 || tree->heads[j] == i + 1;
          break;
      }
      if (include) m[i * n + j] = 0.0;
    }
  return RoleMask::from_matrix(spec, Tensor::from({n, n}, std::move(m)));
}

std::vector<RoleSpec> read_role_assignments(std::istream& in) {
  std::vector<std::pair<std::size_t, RoleSpec>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("expected head_index<TAB>role", lineno);
    std::size_t head = 0, used = 0;
    try {
      head = std::stoul(line.substr(0, tab), &used);
    } catch (const std::logic_error&) {
      throw FormatError("bad head index", lineno);
    }
    if (used != tab) throw FormatError("bad head index", lineno);
    try {
      rows.emplace_back(head, RoleSpec::parse(line.substr(tab + 1)));
    } catch (const ContractError& e) {
      throw FormatError(e.what(), lineno);
    }
  }
  std::vector<RoleSpec> roles(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (const auto& [head, spec] : rows) {
    if (head >= rows.size() || seen[head])
      throw FormatError("role assignments must cover head indices 0..n-1 exactly once");
    seen[head] = true;
    roles[head] = spec;
  }
  return roles;
}

std::vector<RoleSpec> read_role_assignments_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open role assignment file " + path);
  return read_role_assignments(in);
}

void write_role_assignments(std::ostream& out, std::span<const RoleSpec> roles) {
  for (std::size_t i = 0; i < roles.size(); ++i) out << i << '\t' << roles[i].str() << '\n';
}

HeadParams HeadParams::random(std::size_t d_model, std::size_t d_k, Rng& rng) {
  HeadParams h;
  h.w_q = glorot(d_model, d_k, rng);
  h.w_k = glorot(d_model, d_k, rng);
  h.w_v = glorot(d_model, d_k, rng);
  return h;
}

void HeadParams::validate() const {
  if (w_q.dim() != 2 || w_k.shape() != w_q.shape() || w_v.dim() != 2 || w_v.shape()[0] != w_q.shape()[0] ||
      w_v.shape()[1] != w_q.shape()[1])
    throw DimensionError("head projections disagree: " + shape_str(w_q.shape()) + ", " + shape_str(w_k.shape()) +
                         ", " + shape_str(w_v.shape()));
}

void HeadParams::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_q", w_q});
  out.push_back({prefix + ".w_k", w_k});
  out.push_back({prefix + ".w_v", w_v});
}

HeadGates HeadGates::uniform(std::size_t heads, double raw_value) {
  HeadGates g;
  for (std::size_t i = 0; i < heads; ++i) g.raw.push_back(Tensor::scalar(raw_value, true));
  return g;
}

std::vector<double> HeadGates::effective() const {
  std::vector<double> out;
  for (const auto& r : raw) out.push_back(sigmoid(r.detach()).item());
  return out;
}

void HeadGates::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < raw.size(); ++i) out.push_back({prefix + ".gate" + std::to_string(i), raw[i]});
}

void MultiHeadConfig::validate() const {
  if (num_heads == 0 || d_model == 0 || d_k == 0) throw ContractError("attention dimensions must be positive");
  if (!roles.empty() && roles.size() != num_heads)
    throw ContractError(std::to_string(roles.size()) + " roles assigned to " + std::to_string(num_heads) + " heads");
}

Tensor attention_weights(const Tensor& q, const Tensor& k, const RoleMask* mask) {
  if (q.dim() != 2 || k.dim() != 2 || q.shape()[1] != k.shape()[1])
    throw DimensionError("attention: query " + shape_str(q.shape()) + " and key " + shape_str(k.shape()) +
                         " must share d_k");
  Tensor scores = matmul(q, transpose(k));
  if (mask) {
    if (mask->size() != q.shape()[0] || mask->size() != k.shape()[0])
      throw DimensionError("attention: mask of size " + std::to_string(mask->size()) + " for scores " +
                           shape_str(scores.shape()));
    scores = add(scores, mask->matrix());
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.shape()[1]));
  return softmax(scale(scores, inv), 1);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (v.dim() != 2 || v.shape()[0] != k.shape()[0])
    throw DimensionError("attention: key " + shape_str(k.shape()) + " and value " + shape_str(v.shape()) +
                         " must share n");
  return matmul(attention_weights(q, k), v);
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const RoleMask& mask) {
  if (v.dim() != 2 || v.shape()[0] != k.shape()[0])
    throw DimensionError("attention: key " + shape_str(k.shape()) + " and value " + shape_str(v.shape()) +
                         " must share n");
  return matmul(attention_weights(q, k, &mask), v);
}

Tensor head_attention(const Tensor& xq, const Tensor& xkv, const HeadParams& head, const RoleMask* mask) {
  head.validate();
  const Tensor q = matmul(xq, head.w_q);
  const Tensor k = matmul(xkv, head.w_k);
  const Tensor v = matmul(xkv, head.w_v);
  return mask ? masked_attention(q, k, v, *mask) : scaled_dot_attention(q, k, v);
}

Tensor multi_head_concat(const Tensor& x, std::span<const HeadParams> heads, std::span<const RoleMask* const> masks,
                         const Tensor& w_o) {
  return multi_head_concat(x, x, heads, masks, w_o);
}

Tensor multi_head_concat(const Tensor& xq, const Tensor& xkv, std::span<const HeadParams> heads,
                         std::span<const RoleMask* const> masks, const Tensor& w_o) {
  if (heads.empty()) throw ContractError("multi-head attention needs at least one head");
  check_masks(masks, heads.size());
  std::size_t width = 0;
  for (const auto& h : heads) width += h.d_k();
  if (w_o.dim() != 2 || w_o.shape()[0] != width)
    throw DimensionError("output projection " + shape_str(w_o.shape()) + " does not accept concatenated width " +
                         std::to_string(width));
  std::vector<Tensor> outs;
  outs.reserve(heads.size());
  for (std::size_t i = 0; i < heads.size(); ++i) outs.push_back(head_attention(xq, xkv, heads[i], mask_at(masks, i)));
  return matmul(outs.size() == 1 ? outs.front() : concat(outs, 1), w_o);
}

Tensor multi_head_gated(const Tensor& x, std::span<const HeadParams> heads, const HeadGates& gates,
                        std::span<const Tensor> output_proj, std::span<const RoleMask* const> masks) {
  return multi_head_gated(x, x, heads, gates, output_proj, masks);
}

Tensor multi_head_gated(const Tensor& xq, const Tensor& xkv, std::span<const HeadParams> heads, const HeadGates& gates,
                        std::span<const Tensor> output_proj, std::span<const RoleMask* const> masks) {
  if (heads.empty()) throw ContractError("multi-head attention needs at least one head");
  if (gates.count() != heads.size())
    throw ContractError(std::to_string(gates.count()) + " gates for " + std::to_string(heads.size()) + " heads");
  if (output_proj.size() != heads.size())
    throw ContractError(std::to_string(output_proj.size()) + " output projections for " +
                        std::to_string(heads.size()) + " heads");
  check_masks(masks, heads.size());
  std::optional<Tensor> total;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (output_proj[i].dim() != 2 || output_proj[i].shape()[0] != heads[i].d_k())
      throw DimensionError("head " + std::to_string(i) + " projection " + shape_str(output_proj[i].shape()) +
                           " does not accept d_k=" + std::to_string(heads[i].d_k()));
    if (i > 0 && output_proj[i].shape()[1] != output_proj[0].shape()[1])
      throw DimensionError("gated head projections must share the output width");
    Tensor term = scale_by(matmul(head_attention(xq, xkv, heads[i], mask_at(masks, i)), output_proj[i]),
                           sigmoid(gates.raw[i]));
    total = total ? add(*total, term) : term;
  }
  return *total;
}

Tensor sinusoidal_positions(std::size_t n, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0)
    throw ContractError("sinusoidal positions need an even d_model, got " + std::to_string(d_model));
  if (n == 0) throw ContractError("sinusoidal positions need n >= 1");
  std::vector<double> pe(n * d_model);
  for (std::size_t pos = 0; pos < n; ++pos)
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * freq;
      pe[pos * d_model + 2 * i] = std::sin(angle);
      pe[pos * d_model + 2 * i + 1] = std::cos(angle);
    }
  return Tensor::from({n, d_model}, std::move(pe));
}

AttentionBlock::AttentionBlock(const MultiHeadConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  for (std::size_t i = 0; i < cfg.num_heads; ++i) heads.push_back(HeadParams::random(cfg.d_model, cfg.d_k, rng));
  if (cfg.aggregation == Aggregation::concat) {
    w_o = glorot(cfg.num_heads * cfg.d_k, cfg.d_model, rng);
  } else {
    for (std::size_t i = 0; i < cfg.num_heads; ++i) head_proj.push_back(glorot(cfg.d_k, cfg.d_model, rng));
    gates = HeadGates::uniform(cfg.num_heads);
  }
}

Tensor AttentionBlock::forward(const Tensor& xq, const Tensor& xkv, std::span<const RoleMask* const> masks) const {
  if (cfg_.aggregation == Aggregation::concat) return multi_head_concat(xq, xkv, heads, masks, w_o);
  return multi_head_gated(xq, xkv, heads, gates, head_proj, masks);
}

void AttentionBlock::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < heads.size(); ++i) heads[i].collect(out, prefix + ".head" + std::to_string(i));
  if (cfg_.aggregation == Aggregation::concat) {
    out.push_back({prefix + ".w_o", w_o});
  } else {
    for (std::size_t i = 0; i < head_proj.size(); ++i) out.push_back({prefix + ".proj" + std::to_string(i), head_proj[i]});
    gates.collect(out, prefix);
  }
}

EncoderLayer::EncoderLayer(const MultiHeadConfig& cfg, std::size_t d_ff, Rng& rng) : attention(cfg, rng) {
  w1 = glorot(cfg.d_model, d_ff, rng);
  b1 = Tensor::zeros({d_ff}, true);
  w2 = glorot(d_ff, cfg.d_model, rng);
  b2 = Tensor::zeros({cfg.d_model}, true);
}

Tensor EncoderLayer::forward(const Tensor& x, const DependencyTree* tree) const {
  const auto& roles = config().roles;
  if (roles.empty()) return forward_with_masks(x, {});
  const auto masks = masks_for_roles(roles, x.shape()[0], tree);
  const auto ptrs = mask_pointers(masks);
  return forward_with_masks(x, ptrs);
}

Tensor EncoderLayer::forward_with_masks(const Tensor& x, std::span<const RoleMask* const> masks) const {
  const Tensor h = add(x, attention.forward(x, x, masks));
  const Tensor ff = add_bias(matmul(relu(add_bias(matmul(h, w1), b1)), w2), b2);
  return add(h, ff);
}

void EncoderLayer::collect(ParamList& out, const std::string& prefix) const {
  attention.collect(out, prefix + ".attn");
  out.push_back({prefix + ".ffn.w1", w1});
  out.push_back({prefix + ".ffn.b1", b1});
  out.push_back({prefix + ".ffn.w2", w2});
  out.push_back({prefix + ".ffn.b2", b2});
}

std::vector<RoleMask> masks_for_roles(std::span<const RoleSpec> roles, std::size_t n, const DependencyTree* tree) {
  std::vector<RoleMask> masks;
  masks.reserve(roles.size());
  for (const auto& r : roles) masks.push_back(build_role_mask(r, n, tree));
  return masks;
}

std::vector<const RoleMask*> mask_pointers(const std::vector<RoleMask>& masks) {
  std::vector<const RoleMask*> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(&m);
  return out;
}

}  // namespace seqinfer
