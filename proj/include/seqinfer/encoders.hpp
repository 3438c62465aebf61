#pragma once

// Non-attention sequence encoders (vanilla RNN, multi-scale CNN) and the
// two structure-driven representations built on them: the major/surrounding
// MS encoder and the block-driven relation representation.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seqinfer/attention.hpp"
#include "seqinfer/dependency.hpp"
#include "seqinfer/ops.hpp"
#include "seqinfer/random.hpp"

namespace seqinfer {

struct RnnCell {
  Tensor w_x;  // d_in x d_h
  Tensor w_h;  // d_h x d_h
  Tensor b;    // d_h
  Activation activation = Activation::tanh;

  static RnnCell random(std::size_t d_in, std::size_t d_h, Rng& rng, Activation act = Activation::tanh);
  std::size_t d_in() const { return w_x.shape()[0]; }
  std::size_t d_h() const { return w_h.shape()[0]; }
  void validate() const;
  void collect(ParamList& out, const std::string& prefix) const;
};

// h_t = act(x_t W_x + h_{t-1} W_h + b)
Tensor rnn_step(const RnnCell& cell, const Tensor& x_t, const Tensor& h_prev);
// Stacked states, one row per step.
Tensor rnn_encode(const RnnCell& cell, const Tensor& sequence, const Tensor& h0);

struct ConvFilter {
  std::size_t width = 1;  // window of h words
  Tensor w;               // (h*d) x f
  Tensor b;               // f
};

struct CnnFilterBank {
  std::vector<ConvFilter> filters;  // one entry per kernel size
  Activation activation = Activation::relu;

  static CnnFilterBank random(std::size_t d, std::span<const std::size_t> kernel_sizes, std::size_t filters_per_size,
                              Rng& rng, Activation act = Activation::relu);
  std::size_t max_kernel() const;
  std::size_t output_width() const;
  void validate() const;
  void collect(ParamList& out, const std::string& prefix) const;
};

// c_i = act(w . x_{i:i+h-1} + b) for every window: (n-h+1) x f.
Tensor cnn_feature_map(const Tensor& sequence, const ConvFilter& filter, Activation act);
// Max-pool every filter's feature map, concatenated over sizes and filters.
Tensor multi_scale_cnn_encode(const Tensor& sequence, const CnnFilterBank& bank);

struct MsEncoderParams {
  EncoderLayer major;
  EncoderLayer surrounding;
  Tensor gate_raw;  // scalar; g = sigmoid(gate_raw)

  static MsEncoderParams random(const MultiHeadConfig& cfg, std::size_t d_ff, Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
};

// Encodes each segment with its own self-attention layer, mean-pools, and
// joins: g*major + (1-g)*surround + major (.) surround. An empty surrounding
// segment contributes zeros.
Tensor ms_encode(const Tensor& sequence, const MsSegmentation& seg, const MsEncoderParams& params);

struct BlockRelationParams {
  CnnFilterBank bank;
  Tensor entity_proj;  // d_in x bank.output_width(), no bias

  static BlockRelationParams random(std::size_t d_in, std::span<const std::size_t> kernel_sizes,
                                    std::size_t filters_per_size, Rng& rng);
  std::size_t output_width() const;
  void collect(ParamList& out, const std::string& prefix) const;
};

// concat(b1, b2, b1 - p1 - p2, b2 - p1 - p2, e1 (.) e2) where b_k is the CNN
// vector of block k (right-padded to the largest kernel), e_k the mean
// entity encoding and p_k = e_k * entity_proj.
Tensor block_relation_repr(const Tensor& encodings, const BlockSet& blocks, const BlockRelationParams& params);

// 1-based token indices to 0-based rows.
std::vector<std::size_t> to_rows(std::span<const std::size_t> token_indices);

}  // namespace seqinfer
