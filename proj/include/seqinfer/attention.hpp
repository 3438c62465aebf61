#pragma once

// Scaled dot-product attention, role-guided masks and multi-head blocks
// with either concatenated or soft-gated head aggregation.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqinfer/dependency.hpp"
#include "seqinfer/ops.hpp"
#include "seqinfer/random.hpp"
#include "seqinfer/tensor.hpp"

namespace seqinfer {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

// Uniform Glorot initialisation; always requires grad.
Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng);

enum class Role { global, self, forward, backward, local, syntactic };

struct RoleSpec {
  Role role = Role::global;
  std::size_t window = 0;  // local only

  // "global", "self", "forward", "backward", "local:<w>", "syntactic"
  static RoleSpec parse(const std::string& text);
  std::string str() const;
  bool operator==(const RoleSpec&) const = default;
};

// n x n additive mask with entries exactly 0 (include) or -inf (ignore);
// every row has at least one 0.
class RoleMask {
 public:
  static RoleMask from_matrix(RoleSpec spec, const Tensor& matrix);

  const RoleSpec& spec() const { return spec_; }
  const Tensor& matrix() const { return matrix_; }
  std::size_t size() const { return matrix_.shape()[0]; }
  bool includes(std::size_t i, std::size_t j) const { return matrix_.at(i, j) == 0.0; }

 private:
  RoleMask(RoleSpec spec, Tensor matrix) : spec_(spec), matrix_(std::move(matrix)) {}
  RoleSpec spec_;
  Tensor matrix_;
};

// Row i (query, 0-based) includes column j when:
//   global: always; self: j == i; forward: j <= i; backward: j >= i;
//   local(w): |i - j| <= w; syntactic: j is i's head, child, or i itself.
RoleMask build_role_mask(const RoleSpec& spec, std::size_t n, const DependencyTree* tree = nullptr);

// One line per head: `head_index<TAB>role[:window]`.
std::vector<RoleSpec> read_role_assignments(std::istream& in);
std::vector<RoleSpec> read_role_assignments_file(const std::string& path);
void write_role_assignments(std::ostream& out, std::span<const RoleSpec> roles);

struct HeadParams {
  Tensor w_q, w_k, w_v;  // d_model x d_k each

  static HeadParams random(std::size_t d_model, std::size_t d_k, Rng& rng);
  std::size_t d_k() const { return w_q.shape()[1]; }
  void validate() const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct HeadGates {
  std::vector<Tensor> raw;  // one scalar per head

  static HeadGates uniform(std::size_t heads, double raw_value = 0.0);
  std::size_t count() const { return raw.size(); }
  std::vector<double> effective() const;
  void collect(ParamList& out, const std::string& prefix) const;
};

enum class Aggregation { concat, gated };

struct MultiHeadConfig {
  std::size_t num_heads = 1;
  std::size_t d_model = 8;
  std::size_t d_k = 8;
  Aggregation aggregation = Aggregation::concat;
  std::vector<RoleSpec> roles;  // empty: every head global

  void validate() const;
};

// softmax(q k^T / sqrt(d_k), rows); with a mask, softmax((q k^T + M) / sqrt(d_k)).
Tensor attention_weights(const Tensor& q, const Tensor& k, const RoleMask* mask = nullptr);
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const RoleMask& mask);

// Projects queries from xq and keys/values from xkv, then attends.
Tensor head_attention(const Tensor& xq, const Tensor& xkv, const HeadParams& head, const RoleMask* mask = nullptr);

// masks may be empty (no masking) or hold one entry per head (nullptr = none).
Tensor multi_head_concat(const Tensor& x, std::span<const HeadParams> heads, std::span<const RoleMask* const> masks,
                         const Tensor& w_o);
Tensor multi_head_concat(const Tensor& xq, const Tensor& xkv, std::span<const HeadParams> heads,
                         std::span<const RoleMask* const> masks, const Tensor& w_o);

// sum_i sigmoid(raw_i) * (head_i(x) * proj_i); proj_i is d_k x d_model.
Tensor multi_head_gated(const Tensor& x, std::span<const HeadParams> heads, const HeadGates& gates,
                        std::span<const Tensor> output_proj, std::span<const RoleMask* const> masks = {});
Tensor multi_head_gated(const Tensor& xq, const Tensor& xkv, std::span<const HeadParams> heads, const HeadGates& gates,
                        std::span<const Tensor> output_proj, std::span<const RoleMask* const> masks);

// PE[pos][2i] = sin(pos / 10000^(2i/d)), PE[pos][2i+1] = cos(same).
Tensor sinusoidal_positions(std::size_t n, std::size_t d_model);

// Multi-head attention block owning its parameters.
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(const MultiHeadConfig& cfg, Rng& rng);

  const MultiHeadConfig& config() const { return cfg_; }
  Tensor forward(const Tensor& xq, const Tensor& xkv, std::span<const RoleMask* const> masks) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::vector<HeadParams> heads;
  Tensor w_o;                       // concat: (heads*d_k) x d_model
  std::vector<Tensor> head_proj;    // gated: d_k x d_model per head
  HeadGates gates;

 private:
  MultiHeadConfig cfg_;
};

// Self-attention + position-wise two-layer feed-forward, residual adds.
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(const MultiHeadConfig& cfg, std::size_t d_ff, Rng& rng);

  // Masks follow cfg.roles; the sequence tree is needed for syntactic roles.
  Tensor forward(const Tensor& x, const DependencyTree* tree = nullptr) const;
  Tensor forward_with_masks(const Tensor& x, std::span<const RoleMask* const> masks) const;
  void collect(ParamList& out, const std::string& prefix) const;
  const MultiHeadConfig& config() const { return attention.config(); }

  AttentionBlock attention;
  Tensor w1, b1, w2, b2;
};

// One mask per configured role, for a sequence of length n.
std::vector<RoleMask> masks_for_roles(std::span<const RoleSpec> roles, std::size_t n, const DependencyTree* tree);
std::vector<const RoleMask*> mask_pointers(const std::vector<RoleMask>& masks);

}  // namespace seqinfer
