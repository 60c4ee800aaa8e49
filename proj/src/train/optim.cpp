#include "kvlp/train/optim.hpp"

#include "kvlp/util/binary_io.hpp"

#include <cmath>
#include <stdexcept>

namespace kvlp::train {

int Schedule::warmup_steps() const {
  return static_cast<int>(std::lround(warmup_fraction * total_steps));
}

double Schedule::factor(int step) const {
  if (total_steps <= 0 || step >= total_steps) return 0.0;
  const int w = warmup_steps();
  if (step < w) return static_cast<double>(step) / w;
  return static_cast<double>(total_steps - step) / (total_steps - w);
}

int param_group(const std::string& name) {
  return (name.rfind("vision.", 0) == 0 || name.rfind("text.", 0) == 0) ? 0 : 1;
}

AdamW::AdamW(const model::ParamStore& params, AdamWConfig cfg) : cfg_(cfg) {
  for (const auto& e : params.entries()) {
    if (cfg_.round_to_f32) {
      ad::Tensor p = e.tensor;
      p.mutable_value() = p.value().cast<float>().cast<double>();
    }
    m_.push_back(Matrix::Zero(e.tensor.rows(), e.tensor.cols()));
    v_.push_back(Matrix::Zero(e.tensor.rows(), e.tensor.cols()));
  }
}

void AdamW::step(model::ParamStore& params, double lr_group0, double lr_group1) {
  if (params.size() != m_.size()) throw std::logic_error("AdamW: parameter store changed size");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const auto& e = params.entries()[i];
    ad::Tensor p = e.tensor;
    Matrix& theta = p.mutable_value();
    const double lr = param_group(e.name) == 0 ? lr_group0 : lr_group1;
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    if (p.has_grad()) {
      const Matrix& g = p.node()->grad;
      m = cfg_.beta1 * m + (1 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1 - cfg_.beta2) * g.cwiseProduct(g);
    } else {
      m *= cfg_.beta1;
      v *= cfg_.beta2;
    }
    if (e.decay && cfg_.weight_decay != 0.0) theta *= (1.0 - lr * cfg_.weight_decay);
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
    if (cfg_.round_to_f32) {
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        theta.data()[k] = round_to_f32(theta.data()[k]);
        m.data()[k] = round_to_f32(m.data()[k]);
        v.data()[k] = round_to_f32(v.data()[k]);
      }
    }
  }
}

void AdamW::restore(std::int64_t t, std::vector<Matrix> m, std::vector<Matrix> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw std::invalid_argument("AdamW::restore: moment count");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].rows() != m_[i].rows() || m[i].cols() != m_[i].cols() || v[i].rows() != v_[i].rows() ||
        v[i].cols() != v_[i].cols()) {
      throw std::invalid_argument("AdamW::restore: moment shape");
    }
  }
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

double clip_grad_norm(model::ParamStore& params, double max_norm) {
  double sq = 0;
  for (const auto& e : params.entries()) {
    if (e.tensor.has_grad()) sq += e.tensor.node()->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& e : params.entries()) {
      if (e.tensor.has_grad()) e.tensor.node()->grad *= s;
    }
  }
  return norm;
}

}  // namespace kvlp::train
