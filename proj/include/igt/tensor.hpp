#pragma once

// Dense 2-D tensors with a dynamically recorded reverse-mode tape.
//
// Every op result that depends on a requires_grad tensor keeps references to
// its inputs plus a closure that pushes its gradient back into them. The tape
// is therefore the DAG reachable from the loss; backward() sorts it
// topologically, runs each closure once, and then drops the closures of
// intermediate nodes.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "igt/errors.hpp"

namespace igt {

enum class OpKind {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  AddRow,
  Relu,
  Tanh,
  Exp,
  SoftmaxRows,
  Sum,
  SliceCols,
  ConcatCols,
  NeighborSoftmaxAggregate,
  TiledAttention,
  CrossEntropy,
  Custom,
};

constexpr const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::AddRow: return "add_row";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Exp: return "exp";
    case OpKind::SoftmaxRows: return "softmax_rows";
    case OpKind::Sum: return "sum";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::NeighborSoftmaxAggregate: return "neighbor_softmax_aggregate";
    case OpKind::TiledAttention: return "tiled_attention";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::Custom: return "custom";
  }
  return "?";
}

template <typename T>
struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> value;
  std::vector<T> grad;  // sized rows*cols iff requires_grad
  bool requires_grad = false;
  OpKind op = OpKind::Leaf;
  std::string label;  // optional, for Custom ops and diagnostics
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

inline std::string shape_str(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  Tensor() : node_(std::make_shared<Node<T>>()) {}

  Tensor(std::size_t rows, std::size_t cols, bool requires_grad = false)
      : Tensor(rows, cols, std::vector<T>(rows * cols, T(0)), requires_grad) {}

  Tensor(std::size_t rows, std::size_t cols, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    if (data.size() != rows * cols)
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(rows, cols));
    node_->rows = rows;
    node_->cols = cols;
    node_->value = std::move(data);
    set_requires_grad(requires_grad);
  }

  /// Build from nested rows; all rows must have equal length.
  static Tensor from_rows(const std::vector<std::vector<T>>& rows, bool requires_grad = false) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.front().size() : 0;
    std::vector<T> d;
    d.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
      d.insert(d.end(), row.begin(), row.end());
    }
    return Tensor(r, c, std::move(d), requires_grad);
  }

  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = T(1);
    return t;
  }

  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  std::string shape() const { return shape_str(rows(), cols()); }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  T& operator()(std::size_t i, std::size_t j) { return node_->value[i * cols() + j]; }
  T operator()(std::size_t i, std::size_t j) const { return node_->value[i * cols() + j]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) {
    node_->requires_grad = on;
    if (on)
      node_->ensure_grad();
    else
      node_->grad.clear();
  }

  bool has_grad() const { return node_->requires_grad && node_->grad.size() == size(); }
  std::span<T> grad() { return node_->grad; }
  std::span<const T> grad() const { return node_->grad; }
  T grad_at(std::size_t i, std::size_t j) const { return node_->grad[i * cols() + j]; }

  void zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  OpKind op() const { return node_->op; }
  const std::string& label() const { return node_->label; }

  /// A grad-free copy of the values, disconnected from any tape.
  Tensor detach() const { return Tensor(rows(), cols(), node_->value, false); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> d(node_->value.begin(), node_->value.end());
    return Tensor<U>(rows(), cols(), std::move(d), false);
  }

  Node<T>& node() { return *node_; }
  const Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates an op result. If any input requires grad, the result records the
/// inputs and `backward` (called as backward(result_node) once the result's
/// gradient is complete) on the tape; otherwise no tape state is kept.
template <typename T, typename Backward>
Tensor<T> make_result(OpKind op, std::size_t rows, std::size_t cols, std::vector<T> value,
                      std::vector<Tensor<T>> inputs, Backward&& backward,
                      std::string label = {}) {
  auto node = std::make_shared<Node<T>>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(value);
  node->op = op;
  node->label = std::move(label);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node_ptr());
    node->backward_fn = std::forward<Backward>(backward);
  }
  return Tensor<T>(std::move(node));
}

/// Gradient buffer of input `i` of `out`, or nullptr if that input is
/// not differentiable. Allocated on first use.
template <typename T>
T* input_grad(Node<T>& out, std::size_t i) {
  Node<T>& in = *out.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

template <typename T>
const Node<T>& input_node(const Node<T>& out, std::size_t i) {
  return *out.inputs[i];
}

/// Reverse sweep from a scalar loss. Leaf gradients accumulate into their
/// existing buffers; the tape below `loss` is released afterwards.
template <typename T>
void backward(Tensor<T>& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ContractError("backward() requires a 1x1 loss, got " + loss.shape());
  if (!loss.requires_grad()) throw ContractError("backward() on a loss with no tape");

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{&loss.node(), 0}};
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node<T>* child = n->inputs[next++].get();
      if (child->requires_grad && !seen.contains(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order)
    if (n->backward_fn) n->ensure_grad();
  loss.node().ensure_grad();
  loss.node().grad[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
  for (Node<T>* n : order) {
    if (n->op == OpKind::Leaf) continue;
    n->backward_fn = nullptr;
    n->inputs.clear();
  }
}

}  // namespace igt
