#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "iohfuse/nn/matrix.hpp"

namespace iohfuse::nn {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Ordered, name-addressable parameter collection. Parameter addresses are
/// stable for the lifetime of the set.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> with_prefix(const std::string& prefix);

  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

  /// Copy of every value, in registration order.
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Parameter initializers. All draw from the caller's engine so a model's
/// initial state is a pure function of its seed.
void init_normal(Parameter& p, std::mt19937_64& rng, double stddev);
void init_uniform(Parameter& p, std::mt19937_64& rng, double bound);
void init_constant(Parameter& p, double value);
/// Uniform(+-1/sqrt(fan_in)) for a (fan_in x fan_out) weight.
void init_linear(Parameter& p, std::mt19937_64& rng);

}  // namespace iohfuse::nn
