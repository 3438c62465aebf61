#include "seqinfer/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "seqinfer/errors.hpp"

namespace seqinfer {

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::vector<double>& TensorImpl::ensure_grad() {
  if (!grad) grad.emplace(data.size(), 0.0);
  return *grad;
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->data.assign(1, 0.0); impl_->shape = {1}; }

Tensor::Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto s : shape)
    if (s == 0) throw DimensionError("tensor shape " + shape_str(shape) + " has a zero axis");
  if (shape_numel(shape) != data.size())
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
  const std::size_t n = data.size();
  return from({n}, std::move(data), requires_grad);
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
  if (rows.empty()) throw DimensionError("matrix needs at least one row");
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return from({rows.size(), cols}, std::move(data), requires_grad);
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return impl_->shape[axis];
}

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw StateError("only leaf tensors may be written in place");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (dim() != 2) throw DimensionError("at(row, col) on tensor of shape " + shape_str(shape()));
  return impl_->data[row * impl_->shape[1] + col];
}

std::span<const double> Tensor::grad() const {
  if (!impl_->grad) throw StateError("tensor has no gradient");
  return *impl_->grad;
}

void Tensor::zero_grad() {
  auto& g = impl_->ensure_grad();
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor::from(shape(), impl_->data, false); }

Tensor Tensor::clone(bool requires_grad) const { return Tensor::from(shape(), impl_->data, requires_grad); }

Tensor make_result(const char* op, Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs_grad) {
    impl->requires_grad = true;
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.impl());
    node->backward = std::move(backward);
    impl->node = std::move(node);
  }
  return Tensor(std::move(impl));
}

Tape Tape::record(const Tensor& loss) {
  Tape tape;
  std::unordered_set<const TensorImpl*> seen;
  // Iterative post-order DFS; inputs land before their consumers.
  std::vector<std::pair<std::shared_ptr<TensorImpl>, std::size_t>> stack;
  stack.emplace_back(loss.impl(), 0);
  seen.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto* node = impl->node.get();
    if (node && next < node->inputs.size()) {
      auto child = node->inputs[next++];
      if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      continue;
    }
    tape.order_.push_back(impl);
    stack.pop_back();
  }
  return tape;
}

std::size_t Tape::run() {
  for (const auto& impl : order_)
    if (impl->node && impl->node->consumed)
      throw StateError("backward through a graph that was already differentiated; rebuild the forward pass");
  auto& root = order_.back();
  root->ensure_grad()[0] += 1.0;
  std::size_t visited = 0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto& impl = *it;
    if (!impl->node) continue;
    for (auto& in : impl->node->inputs)
      if (in->requires_grad) in->ensure_grad();
    impl->ensure_grad();
    impl->node->backward(*impl);
    impl->node->consumed = true;
    ++impl->node->visits;
    ++visited;
  }
  return visited;
}

BackwardStats backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) throw ContractError("loss does not depend on any tensor requiring grad");
  auto tape = Tape::record(loss);
  return BackwardStats{tape.run()};
}

void sgd_step(std::span<const Tensor> params, double learning_rate) {
  for (const auto& p : params)
    if (!p.has_grad()) throw StateError("sgd_step on a parameter without a gradient");
  for (auto p : params) {
    auto& impl = *p.impl();
    auto& g = *impl.grad;
    for (std::size_t i = 0; i < impl.data.size(); ++i) impl.data[i] -= learning_rate * g[i];
    std::fill(g.begin(), g.end(), 0.0);
  }
}

}  // namespace seqinfer
