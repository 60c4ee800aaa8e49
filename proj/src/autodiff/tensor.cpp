#include "kvlp/autodiff/tensor.hpp"

#include <unordered_set>

namespace kvlp::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  if (!value.allFinite()) throw NonFiniteError("non-finite value in leaf tensor");
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::from_rows(const std::vector<std::vector<Real>>& rows, bool requires_grad) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r == 0 ? 0 : static_cast<Index>(rows.front().size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(rows[i].size()) != c) throw DimensionError("ragged rows");
    for (Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::row(const std::vector<Real>& values, bool requires_grad) {
  Matrix m(1, static_cast<Index>(values.size()));
  for (Index j = 0; j < m.cols(); ++j) m(0, j) = values[j];
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::scalar(Real v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

Matrix& Tensor::mutable_value() {
  if (!node_->is_leaf) throw ContractError("mutable_value on a non-leaf tensor");
  return node_->value;
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.resize(0, 0); }

Real Tensor::item() const {
  if (size() != 1) throw ContractError("item() on a tensor with more than one element");
  return node_->value(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss, Real seed) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss");
  }
  auto root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->is_leaf) n->grad.resize(0, 0);
  }
  root->accumulate(Matrix::Constant(1, 1, seed));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf || n->grad.size() == 0 || !n->backward) continue;
    n->backward(*n);
  }
}

namespace detail {

Tensor make_result(Matrix value, std::vector<Tensor> inputs, const char* op,
                   std::function<void(Node&)> backward) {
  if (!value.allFinite()) {
    throw NonFiniteError(std::string("non-finite output from op '") + op + "'");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  node->is_leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace kvlp::ad
