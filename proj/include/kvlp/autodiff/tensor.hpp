#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace kvlp::ad {

using Real = double;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

// Rank-2 dense array taking part in a reverse-mode graph. Vectors are 1×n.
// Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor from_rows(const std::vector<std::vector<Real>>& rows, bool requires_grad = false);
  static Tensor row(const std::vector<Real>& values, bool requires_grad = false);
  static Tensor scalar(Real v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  Index size() const { return node_->value.size(); }

  const Matrix& value() const { return node_->value; }
  // Only leaves may be mutated in place (optimizer updates, finite-difference probes).
  Matrix& mutable_value();

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  // Zero matrix of the value's shape when nothing has been accumulated.
  Matrix grad() const;
  void zero_grad();

  Real item() const;
  const char* op() const { return node_->op; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Reverse sweep from a 1×1 loss. Leaf gradients accumulate across calls;
// intermediate gradients are reset at the start of each sweep.
void backward(const Tensor& loss, Real seed = 1.0);

bool grad_enabled();

// Disables graph recording within its scope (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds an op result; checks finiteness and wires the backward closure when
// any input requires a gradient.
Tensor make_result(Matrix value, std::vector<Tensor> inputs, const char* op,
                   std::function<void(Node&)> backward);

inline Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

}  // namespace detail

}  // namespace kvlp::ad
