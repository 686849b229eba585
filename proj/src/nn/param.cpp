#include "iohfuse/nn/param.hpp"

#include <cmath>
#include <stdexcept>

#include "iohfuse/kernels/kernels.hpp"

namespace iohfuse::nn {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: shape mismatch " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix c(a.rows, b.cols);
  kernels::gemm_nn(a.rows, b.cols, a.cols, a.data.data(), b.data.data(), c.data.data());
  return c;
}

Parameter& ParamSet::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  index_[name] = params_.size();
  params_.push_back(std::make_unique<Parameter>(name, rows, cols));
  return *params_.back();
}

Parameter& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParamSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParamSet::with_prefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
  }
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::vector<Matrix> ParamSet::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParamSet::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("ParamSet::restore: count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i]->value)) {
      throw std::invalid_argument("ParamSet::restore: shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = values[i];
  }
}

void init_normal(Parameter& p, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : p.value.data) v = dist(rng);
}

void init_uniform(Parameter& p, std::mt19937_64& rng, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : p.value.data) v = dist(rng);
}

void init_constant(Parameter& p, double value) { p.value.fill(value); }

void init_linear(Parameter& p, std::mt19937_64& rng) {
  init_uniform(p, rng, 1.0 / std::sqrt(static_cast<double>(p.value.rows)));
}

}  // namespace iohfuse::nn
