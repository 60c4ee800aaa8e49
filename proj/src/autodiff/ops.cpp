#include "kvlp/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace kvlp::ad {

using detail::in;
using detail::make_result;
using detail::Node;

namespace {

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols()) {
    Matrix out = a.value().rowwise() + b.value().row(0);
    return make_result(std::move(out), {a, b}, "add_row", [](Node& self) {
      in(self, 0).accumulate(self.grad);
      in(self, 1).accumulate(self.grad.colwise().sum());
    });
  }
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, "add", [](Node& self) {
    in(self, 0).accumulate(self.grad);
    in(self, 1).accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, "sub", [](Node& self) {
    in(self, 0).accumulate(self.grad);
    in(self, 1).accumulate(-self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, "mul", [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) x.accumulate(self.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(self.grad.cwiseProduct(x.value));
  });
}

Tensor scale(const Tensor& a, Real s) {
  return make_result(a.value() * s, {a}, "scale",
                     [s](Node& self) { in(self, 0).accumulate(self.grad * s); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a) + " x " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return make_result(std::move(out), {a, b}, "matmul", [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) {
      Matrix gx(x.value.rows(), x.value.cols());
      gx.noalias() = self.grad * y.value.transpose();
      x.accumulate(gx);
    }
    if (y.requires_grad) {
      Matrix gy(y.value.rows(), y.value.cols());
      gy.noalias() = x.value.transpose() * self.grad;
      y.accumulate(gy);
    }
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, "transpose",
                     [](Node& self) { in(self, 0).accumulate(self.grad.transpose()); });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column count differs");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index r = 0;
  for (const auto& p : parts) {
    offsets.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_result(std::move(out), parts, "concat_rows", [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& x = in(self, i);
      if (x.requires_grad) x.accumulate(self.grad.middleRows(offsets[i], x.value.rows()));
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row count differs");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index c = 0;
  for (const auto& p : parts) {
    offsets.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_result(std::move(out), parts, "concat_cols", [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& x = in(self, i);
      if (x.requires_grad) x.accumulate(self.grad.middleCols(offsets[i], x.value.cols()));
    }
  });
}

Tensor slice_rows(const Tensor& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw DimensionError("slice_rows: range out of bounds for " + shape_str(a));
  }
  Matrix out = a.value().middleRows(begin, count);
  return make_result(std::move(out), {a}, "slice_rows", [begin, count](Node& self) {
    Node& x = in(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleRows(begin, count) = self.grad;
    x.accumulate(g);
  });
}

Tensor slice_cols(const Tensor& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw DimensionError("slice_cols: range out of bounds for " + shape_str(a));
  }
  Matrix out = a.value().middleCols(begin, count);
  return make_result(std::move(out), {a}, "slice_cols", [begin, count](Node& self) {
    Node& x = in(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleCols(begin, count) = self.grad;
    x.accumulate(g);
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(ids[i]) + " outside table of " +
                           std::to_string(table.rows()) + " rows");
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return make_result(std::move(out), {table}, "gather_rows", [idx](Node& self) {
    Node& t = in(self, 0);
    Matrix g = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Index>(i));
    t.accumulate(g);
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](Real x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return make_result(out, {a}, "sigmoid", [out](Node& self) {
    in(self, 0).accumulate(
        self.grad.cwiseProduct(out.unaryExpr([](Real s) { return s * (1.0 - s); })));
  });
}

Tensor gelu(const Tensor& a) {
  const Matrix x = a.value();
  Matrix out = x.unaryExpr([](Real v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
  return make_result(std::move(out), {a}, "gelu", [x](Node& self) {
    Matrix d = x.unaryExpr([](Real v) {
      const Real cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const Real pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + v * pdf;
    });
    in(self, 0).accumulate(self.grad.cwiseProduct(d));
  });
}

Tensor leaky_relu(const Tensor& a, Real slope) {
  const Matrix x = a.value();
  Matrix out = x.unaryExpr([slope](Real v) { return v > 0 ? v : slope * v; });
  return make_result(std::move(out), {a}, "leaky_relu", [x, slope](Node& self) {
    in(self, 0).accumulate(
        self.grad.cwiseProduct(x.unaryExpr([slope](Real v) { return v > 0 ? 1.0 : slope; })));
  });
}

Tensor softmax_rows(const Tensor& x, std::span<const bool> key_valid) {
  if (!key_valid.empty() && static_cast<Index>(key_valid.size()) != x.cols()) {
    throw DimensionError("softmax_rows: key mask length differs from column count");
  }
  const Matrix& v = x.value();
  Matrix out(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (Index j = 0; j < v.cols(); ++j) {
      if (key_valid.empty() || key_valid[j]) mx = std::max(mx, v(i, j));
    }
    Real total = 0;
    for (Index j = 0; j < v.cols(); ++j) {
      const Real e = (key_valid.empty() || key_valid[j]) ? std::exp(v(i, j) - mx) : 0.0;
      out(i, j) = e;
      total += e;
    }
    if (total > 0) out.row(i) /= total;
  }
  return make_result(out, {x}, "softmax", [out](Node& self) {
    // dx = y * (g - rowsum(g * y))
    Matrix g = self.grad;
    for (Index i = 0; i < out.rows(); ++i) {
      const Real dot = g.row(i).dot(out.row(i));
      g.row(i) = out.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
    in(self, 0).accumulate(g);
  });
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis == 1) return softmax_rows(x);
  if (axis == 0) return transpose(softmax_rows(transpose(x)));
  throw DimensionError("softmax: axis must be 0 or 1");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
  const Index n = x.cols();
  if (n < 1) throw DimensionError("layer_norm: empty normalized axis");
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(n));
  }
  const Matrix& v = x.value();
  Matrix xhat(v.rows(), n);
  Eigen::VectorXd inv_std(v.rows());
  for (Index i = 0; i < v.rows(); ++i) {
    const Real mu = v.row(i).mean();
    const Real var = (v.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (v.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {x, gain, bias}, "layer_norm",
                     [xhat, inv_std, n](Node& self) {
    Node& xn = in(self, 0);
    Node& gn = in(self, 1);
    Node& bn = in(self, 2);
    const Matrix& g = self.grad;
    if (gn.requires_grad) gn.accumulate(g.cwiseProduct(xhat).colwise().sum());
    if (bn.requires_grad) bn.accumulate(g.colwise().sum());
    if (xn.requires_grad) {
      Matrix dxhat = (g.array().rowwise() * gn.value.row(0).array()).matrix();
      Matrix dx(g.rows(), n);
      for (Index i = 0; i < g.rows(); ++i) {
        const Real m1 = dxhat.row(i).mean();
        const Real m2 = dxhat.row(i).dot(xhat.row(i)) / static_cast<Real>(n);
        dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
      }
      xn.accumulate(dx);
    }
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Index r = a.rows(), c = a.cols();
  return make_result(std::move(out), {a}, "sum", [r, c](Node& self) {
    in(self, 0).accumulate(Matrix::Constant(r, c, self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<Real>(a.size()));
}

Tensor l2_norm(const Tensor& a) {
  const Real norm = a.value().norm();
  Matrix out(1, 1);
  out(0, 0) = norm;
  const Matrix x = a.value();
  return make_result(std::move(out), {a}, "l2_norm", [x, norm](Node& self) {
    if (norm == 0) return;
    in(self, 0).accumulate(x * (self.grad(0, 0) / norm));
  });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  if (pred.size() == 0) throw DimensionError("mse: empty input");
  const Matrix diff = pred.value() - target.value();
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / static_cast<Real>(diff.size());
  return make_result(std::move(out), {pred, target}, "mse", [diff](Node& self) {
    const Matrix g = diff * (2.0 * self.grad(0, 0) / static_cast<Real>(diff.size()));
    in(self, 0).accumulate(g);
    in(self, 1).accumulate(-g);
  });
}

Tensor binary_cross_entropy(const Tensor& probs, const Tensor& targets) {
  require_same_shape(probs, targets, "binary_cross_entropy");
  const Matrix p = probs.value();
  const Matrix y = targets.value();
  if ((p.array() <= 0).any() || (p.array() >= 1).any()) {
    throw NonFiniteError("binary_cross_entropy: probability outside (0,1)");
  }
  Matrix out(1, 1);
  out(0, 0) = -(y.array() * p.array().log() + (1 - y.array()) * (1 - p.array()).log()).sum();
  return make_result(std::move(out), {probs}, "bce", [p, y](Node& self) {
    Matrix d = ((p - y).array() / (p.array() * (1 - p.array()))).matrix();
    in(self, 0).accumulate(d * self.grad(0, 0));
  });
}

Tensor binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "binary_cross_entropy_with_logits");
  const Matrix z = logits.value();
  const Matrix y = targets.value();
  // log(1 + e^z) - y z, written to avoid overflow.
  Real total = 0;
  for (Index i = 0; i < z.size(); ++i) {
    const Real v = z.data()[i];
    total += std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))) - y.data()[i] * v;
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  return make_result(std::move(out), {logits}, "bce_logits", [z, y](Node& self) {
    Matrix s = z.unaryExpr([](Real v) {
      return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    in(self, 0).accumulate((s - y) * self.grad(0, 0));
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (static_cast<Index>(targets.size()) != logits.rows()) {
    throw DimensionError("cross_entropy: one target per logit row required");
  }
  if (targets.empty()) throw DimensionError("cross_entropy: empty batch");
  const Matrix& z = logits.value();
  Matrix probs(z.rows(), z.cols());
  Real total = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= z.cols()) throw DimensionError("cross_entropy: target out of range");
    const Real mx = z.row(i).maxCoeff();
    const Real lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    probs.row(i) = (z.row(i).array() - lse).exp().matrix();
    total += lse - z(i, t);
  }
  const Real n = static_cast<Real>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = total / n;
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(std::move(out), {logits}, "cross_entropy", [probs, tgt, n](Node& self) {
    Matrix g = probs;
    for (std::size_t i = 0; i < tgt.size(); ++i) g(static_cast<Index>(i), tgt[i]) -= 1.0;
    in(self, 0).accumulate(g * (self.grad(0, 0) / n));
  });
}

}  // namespace kvlp::ad
