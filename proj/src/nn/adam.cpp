#include "iohfuse/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace iohfuse::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows, p->value.cols);
    v_.emplace_back(p->value.rows, p->value.cols);
  }
}

double Adam::step(double lr, double grad_scale) {
  double sq = 0.0;
  for (const Parameter* p : params_) {
    for (double g : p->grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq) * std::abs(grad_scale);
  double scale = grad_scale;
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) scale *= cfg_.clip_norm / norm;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      double g = p.grad.data[j] * scale;
      if (cfg_.weight_decay > 0.0) g += cfg_.weight_decay * p.value.data[j];
      m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g;
      v.data[j] = cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.zero_grad();
  }
  return norm;
}

void Adam::load_state(std::int64_t t, std::vector<Matrix> m, std::vector<Matrix> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw std::invalid_argument("Adam::load_state: moment count does not match parameter count");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!m[i].same_shape(params_[i]->value) || !v[i].same_shape(params_[i]->value)) {
      throw std::invalid_argument("Adam::load_state: moment shape mismatch for " + params_[i]->name);
    }
  }
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace iohfuse::nn
