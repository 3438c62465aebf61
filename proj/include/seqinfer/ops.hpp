#pragma once

// Differentiable operations over Tensor. Every op validates shapes and
// throws DimensionError naming the offending shapes.

#include <cstddef>
#include <span>
#include <vector>

#include "seqinfer/tensor.hpp"

namespace seqinfer {

// (m x k) * (k x n) -> (m x n). A 1-D left operand is treated as a row vector
// and yields a 1-D result.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a * s where s is a one-element tensor (trainable gates).
Tensor scale_by(const Tensor& a, const Tensor& s);
// Adds a 1-D bias to every row of a 2-D tensor (or to a 1-D tensor).
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);

enum class Activation { identity, sigmoid, tanh, relu };
Tensor activate(const Tensor& a, Activation act);

// Max-subtracted softmax along axis. -inf entries map to exactly 0.
// DegenerateSliceError if a slice has no finite entry.
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);

struct MaxResult {
  Tensor values;
  std::vector<std::size_t> indices;  // first occurrence of the maximum
};
MaxResult max_over_axis(const Tensor& a, std::size_t axis);

Tensor sum(const Tensor& a);
Tensor mean_over_axis(const Tensor& a, std::size_t axis);

// Rows of a 2-D table; repeated indices accumulate in backward.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
// Row i of the result is rows i..i+h-1 of x flattened: (n-h+1) x (h*d).
Tensor unfold_windows(const Tensor& x, std::size_t h);
// Appends zero rows so the result has at least min_rows rows.
Tensor pad_rows(const Tensor& x, std::size_t min_rows);

// Mean negative log-likelihood of targets under row-wise softmax(logits).
// 1-D logits are a single row.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace seqinfer
