#pragma once

#include <cstdint>
#include <vector>

#include "iohfuse/nn/param.hpp"

namespace iohfuse::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

/// Adam over a fixed parameter list. The learning rate is passed per step so
/// schedules live with the caller.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

  /// Applies one update from the accumulated gradients scaled by grad_scale
  /// (e.g. 1/batch), then zeroes them. Returns the pre-clip gradient norm.
  double step(double lr, double grad_scale = 1.0);

  std::int64_t steps() const { return t_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void load_state(std::int64_t t, std::vector<Matrix> m, std::vector<Matrix> v);

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t t_ = 0;
};

}  // namespace iohfuse::nn
