#include "seqinfer/encoders.hpp"

#include <algorithm>
#include <numeric>

#include "seqinfer/errors.hpp"

namespace seqinfer {

RnnCell RnnCell::random(std::size_t d_in, std::size_t d_h, Rng& rng, Activation act) {
  return RnnCell{glorot(d_in, d_h, rng), glorot(d_h, d_h, rng), Tensor::zeros({d_h}, true), act};
}

void RnnCell::validate() const {
  if (w_x.dim() != 2 || w_h.dim() != 2 || w_h.shape()[0] != w_h.shape()[1] || w_x.shape()[1] != w_h.shape()[0] ||
      b.dim() != 1 || b.numel() != w_h.shape()[0])
    throw DimensionError("rnn cell: W_x " + shape_str(w_x.shape()) + ", W_h " + shape_str(w_h.shape()) + ", b " +
                         shape_str(b.shape()));
}

void RnnCell::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_x", w_x});
  out.push_back({prefix + ".w_h", w_h});
  out.push_back({prefix + ".b", b});
}

Tensor rnn_step(const RnnCell& cell, const Tensor& x_t, const Tensor& h_prev) {
  cell.validate();
  if (x_t.dim() != 1 || x_t.numel() != cell.d_in())
    throw DimensionError("rnn_step: input " + shape_str(x_t.shape()) + " for d_in=" + std::to_string(cell.d_in()));
  if (h_prev.dim() != 1 || h_prev.numel() != cell.d_h())
    throw DimensionError("rnn_step: state " + shape_str(h_prev.shape()) + " for d_h=" + std::to_string(cell.d_h()));
  return activate(add_bias(add(matmul(x_t, cell.w_x), matmul(h_prev, cell.w_h)), cell.b), cell.activation);
}

Tensor rnn_encode(const RnnCell& cell, const Tensor& sequence, const Tensor& h0) {
  if (sequence.dim() != 2) throw DimensionError("rnn_encode: sequence must be n x d_in, got " + shape_str(sequence.shape()));
  const std::size_t n = sequence.shape()[0];
  std::vector<Tensor> states;
  states.reserve(n);
  Tensor h = h0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t row = t;
    const Tensor x_t = reshape(gather_rows(sequence, std::span<const std::size_t>(&row, 1)), {sequence.shape()[1]});
    h = rnn_step(cell, x_t, h);
    states.push_back(reshape(h, {1, cell.d_h()}));
  }
  return states.size() == 1 ? states.front() : concat(states, 0);
}

CnnFilterBank CnnFilterBank::random(std::size_t d, std::span<const std::size_t> kernel_sizes,
                                    std::size_t filters_per_size, Rng& rng, Activation act) {
  if (kernel_sizes.empty()) throw ContractError("filter bank needs at least one kernel size");
  if (filters_per_size == 0) throw ContractError("filter bank needs at least one filter per size");
  CnnFilterBank bank;
  bank.activation = act;
  for (auto h : kernel_sizes) {
    if (h == 0) throw ContractError("kernel size must be >= 1");
    bank.filters.push_back(ConvFilter{h, glorot(h * d, filters_per_size, rng), Tensor::zeros({filters_per_size}, true)});
  }
  return bank;
}

std::size_t CnnFilterBank::max_kernel() const {
  std::size_t m = 0;
  for (const auto& f : filters) m = std::max(m, f.width);
  return m;
}

std::size_t CnnFilterBank::output_width() const {
  std::size_t w = 0;
  for (const auto& f : filters) w += f.w.shape()[1];
  return w;
}

void CnnFilterBank::validate() const {
  if (filters.empty()) throw ContractError("filter bank is empty");
  for (const auto& f : filters) {
    if (f.width == 0) throw ContractError("kernel size must be >= 1");
    if (f.w.dim() != 2 || f.w.shape()[1] == 0 || f.b.numel() != f.w.shape()[1])
      throw DimensionError("filter weights " + shape_str(f.w.shape()) + " / bias " + shape_str(f.b.shape()));
  }
}

void CnnFilterBank::collect(ParamList& out, const std::string& prefix) const {
  for (const auto& f : filters) {
    const std::string p = prefix + ".k" + std::to_string(f.width);
    out.push_back({p + ".w", f.w});
    out.push_back({p + ".b", f.b});
  }
}

Tensor cnn_feature_map(const Tensor& sequence, const ConvFilter& filter, Activation act) {
  if (sequence.dim() != 2) throw DimensionError("cnn_feature_map: sequence must be n x d, got " + shape_str(sequence.shape()));
  if (filter.w.dim() != 2 || filter.w.shape()[0] != filter.width * sequence.shape()[1])
    throw DimensionError("cnn_feature_map: filter " + shape_str(filter.w.shape()) + " for window " +
                         std::to_string(filter.width) + " over d=" + std::to_string(sequence.shape()[1]));
  const Tensor windows = unfold_windows(sequence, filter.width);
  return activate(add_bias(matmul(windows, filter.w), filter.b), act);
}

Tensor multi_scale_cnn_encode(const Tensor& sequence, const CnnFilterBank& bank) {
  bank.validate();
  std::vector<Tensor> pooled;
  for (const auto& f : bank.filters) pooled.push_back(max_over_axis(cnn_feature_map(sequence, f, bank.activation), 0).values);
  return pooled.size() == 1 ? pooled.front() : concat(pooled, 0);
}

MsEncoderParams MsEncoderParams::random(const MultiHeadConfig& cfg, std::size_t d_ff, Rng& rng) {
  MsEncoderParams p;
  p.major = EncoderLayer(cfg, d_ff, rng);
  p.surrounding = EncoderLayer(cfg, d_ff, rng);
  p.gate_raw = Tensor::scalar(0.0, true);
  return p;
}

void MsEncoderParams::collect(ParamList& out, const std::string& prefix) const {
  major.collect(out, prefix + ".major");
  surrounding.collect(out, prefix + ".surround");
  out.push_back({prefix + ".gate", gate_raw});
}

std::vector<std::size_t> to_rows(std::span<const std::size_t> token_indices) {
  std::vector<std::size_t> rows;
  rows.reserve(token_indices.size());
  for (auto t : token_indices) {
    if (t == 0) throw ContractError("token indices are 1-based");
    rows.push_back(t - 1);
  }
  return rows;
}

Tensor ms_encode(const Tensor& sequence, const MsSegmentation& seg, const MsEncoderParams& params) {
  if (sequence.dim() != 2) throw DimensionError("ms_encode: sequence must be n x d, got " + shape_str(sequence.shape()));
  const std::size_t n = sequence.shape()[0];
  std::vector<std::size_t> all(seg.major);
  all.insert(all.end(), seg.surrounding.begin(), seg.surrounding.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(n);
  std::iota(expect.begin(), expect.end(), std::size_t{1});
  if (all != expect)
    throw DimensionError("ms_encode: segmentation does not partition a sequence of length " + std::to_string(n));
  if (seg.major.empty()) throw ContractError("ms_encode: major segment is empty");

  const auto major_rows = to_rows(seg.major);
  const Tensor major_vec = mean_over_axis(params.major.forward(gather_rows(sequence, major_rows)), 0);
  const Tensor g = sigmoid(params.gate_raw);
  if (seg.surrounding.empty()) return scale_by(major_vec, g);

  const auto sur_rows = to_rows(seg.surrounding);
  const Tensor sur_vec = mean_over_axis(params.surrounding.forward(gather_rows(sequence, sur_rows)), 0);
  const Tensor one_minus_g = sub(Tensor::scalar(1.0), g);
  const Tensor alignment = mul(major_vec, sur_vec);
  return add(add(scale_by(major_vec, g), scale_by(sur_vec, one_minus_g)), alignment);
}

BlockRelationParams BlockRelationParams::random(std::size_t d_in, std::span<const std::size_t> kernel_sizes,
                                                std::size_t filters_per_size, Rng& rng) {
  BlockRelationParams p;
  p.bank = CnnFilterBank::random(d_in, kernel_sizes, filters_per_size, rng);
  p.entity_proj = glorot(d_in, p.bank.output_width(), rng);
  return p;
}

std::size_t BlockRelationParams::output_width() const {
  return 4 * bank.output_width() + entity_proj.shape()[0];
}

void BlockRelationParams::collect(ParamList& out, const std::string& prefix) const {
  bank.collect(out, prefix + ".cnn");
  out.push_back({prefix + ".entity_proj", entity_proj});
}

Tensor block_relation_repr(const Tensor& encodings, const BlockSet& blocks, const BlockRelationParams& params) {
  if (encodings.dim() != 2) throw DimensionError("block_relation_repr: encodings must be n x d, got " + shape_str(encodings.shape()));
  if (blocks.block1.empty() || blocks.block2.empty()) throw ContractError("block_relation_repr: empty block");
  if (params.entity_proj.shape()[0] != encodings.shape()[1] || params.entity_proj.shape()[1] != params.bank.output_width())
    throw DimensionError("block_relation_repr: entity projection " + shape_str(params.entity_proj.shape()));
  const std::size_t k = params.bank.max_kernel();
  auto block_vec = [&](const std::vector<std::size_t>& block) {
    return multi_scale_cnn_encode(pad_rows(gather_rows(encodings, to_rows(block)), k), params.bank);
  };
  auto entity_mean = [&](const Span& span) {
    std::vector<std::size_t> rows;
    for (std::size_t t = span.first; t <= span.last; ++t) rows.push_back(t - 1);
    return mean_over_axis(gather_rows(encodings, rows), 0);
  };
  const Tensor b1 = block_vec(blocks.block1);
  const Tensor b2 = block_vec(blocks.block2);
  const Tensor e1 = entity_mean(blocks.e1);
  const Tensor e2 = entity_mean(blocks.e2);
  const Tensor p_sum = add(matmul(e1, params.entity_proj), matmul(e2, params.entity_proj));
  return concat({b1, b2, sub(b1, p_sum), sub(b2, p_sum), mul(e1, e2)}, 0);
}

}  // namespace seqinfer
