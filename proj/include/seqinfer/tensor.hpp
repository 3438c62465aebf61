#pragma once

// Dense row-major tensor of doubles with reverse-mode differentiation.
//
// A Tensor is a shared handle. Operations on tensors that require gradients
// record a Node linking the result to its inputs; the graph is rebuilt on
// every forward pass. backward() orders the reachable nodes topologically
// into a Tape and runs each node's local rule exactly once.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqinfer {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorImpl;

struct Node {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  // Reads out.grad and accumulates into the inputs' grads.
  std::function<void(TensorImpl& out)> backward;
  bool consumed = false;
  std::size_t visits = 0;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::optional<std::vector<double>> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor();
  explicit Tensor(std::shared_ptr<TensorImpl> impl);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> data, bool requires_grad = false);
  static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim() const { return impl_->shape.size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  // Leaf-only write access (parameter updates, finite differences).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat) const { return impl_->data[flat]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->node == nullptr; }
  bool has_grad() const { return impl_->grad.has_value(); }
  std::span<const double> grad() const;
  void zero_grad();
  void clear_grad() { impl_->grad.reset(); }

  // Same values, no graph history.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  const Node* node() const { return impl_->node.get(); }
  bool defined() const { return impl_ != nullptr; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Build a result tensor; records a node when any input requires grad.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, std::function<void(TensorImpl&)> backward);

// Topologically ordered view of the graph reachable from a loss.
class Tape {
 public:
  static Tape record(const Tensor& loss);

  std::size_t size() const { return order_.size(); }
  const std::vector<std::shared_ptr<TensorImpl>>& order() const { return order_; }

  // Seeds d(loss)/d(loss) = 1 and runs every node once in reverse order.
  // Returns the number of nodes visited.
  std::size_t run();

 private:
  std::vector<std::shared_ptr<TensorImpl>> order_;
};

struct BackwardStats {
  std::size_t nodes_visited = 0;
};

// Throws ContractError for non-scalar loss and StateError when the graph
// was already consumed by an earlier backward pass.
BackwardStats backward(const Tensor& loss);

// param <- param - lr * grad, then zero the grad. StateError if a grad is missing.
void sgd_step(std::span<const Tensor> params, double learning_rate);

}  // namespace seqinfer
