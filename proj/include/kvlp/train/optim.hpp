#pragma once

#include "kvlp/model/params.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kvlp::train {

using ad::Matrix;

// Linear warm-up from 0 over the first round(warmup_fraction · total) steps,
// then linear decay to 0 at `total`. Steps are 0-based.
struct Schedule {
  int total_steps = 0;
  double warmup_fraction = 0.1;

  int warmup_steps() const;
  double factor(int step) const;  // in [0, 1]
};

// 0 for encoder parameters (vision.*, text.*), 1 for everything else.
int param_group(const std::string& name);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  bool round_to_f32 = true;
};

class AdamW {
 public:
  // With round_to_f32 the parameters are rounded onto the f32 grid here, so a
  // saved checkpoint reproduces them exactly.
  AdamW(const model::ParamStore& params, AdamWConfig cfg);

  // One update with per-group learning rates; parameters without a gradient
  // are treated as having a zero gradient. Decay is decoupled: θ ← θ(1 − lr·wd)
  // before the Adam step, and skipped for biases and norm parameters.
  void step(model::ParamStore& params, double lr_group0, double lr_group1);

  std::int64_t steps_taken() const { return t_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void restore(std::int64_t t, std::vector<Matrix> m, std::vector<Matrix> v);
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

// Scales every gradient so the global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(model::ParamStore& params, double max_norm);

}  // namespace kvlp::train
