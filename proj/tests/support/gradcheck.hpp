#pragma once

// Central finite-difference oracle for graph-built losses.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "iohfuse/nn/graph.hpp"
#include "iohfuse/nn/param.hpp"

namespace iohfuse::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;
  std::string worst_name;
};

using LossBuilder = std::function<nn::Tensor(nn::Graph&)>;

inline double eval_loss(const LossBuilder& build) {
  nn::Graph g(false);
  return build(g).value()(0, 0);
}

/// Compares analytic gradients of every listed parameter with central
/// differences. At most `max_per_param` entries per parameter are probed
/// (chosen by `rng`); 0 probes every entry.
inline GradCheckResult grad_check(std::vector<nn::Parameter*> params, const LossBuilder& build, double rel_tol = 1e-4,
                                  double abs_floor = 1e-7, double h = 1e-5, std::size_t max_per_param = 0,
                                  std::uint64_t seed = 1) {
  for (auto* p : params) p->zero_grad();
  {
    nn::Graph g(true);
    g.backward(build(g));
  }
  std::vector<nn::Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckResult r;
  std::mt19937_64 rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto* p = params[pi];
    std::vector<std::size_t> idx(p->value.data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (max_per_param && idx.size() > max_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_param);
    }
    for (std::size_t i : idx) {
      const double orig = p->value.data[i];
      p->value.data[i] = orig + h;
      const double fp = eval_loss(build);
      p->value.data[i] = orig - h;
      const double fm = eval_loss(build);
      p->value.data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi].data[i];
      const double err = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      ++r.checked;
      const double rel = err / std::max(scale, abs_floor / rel_tol);
      if (rel > r.worst_rel) {
        r.worst_rel = rel;
        r.worst_name = p->name + "[" + std::to_string(i) + "]";
      }
      if (err > rel_tol * scale + abs_floor) ++r.failures;
    }
  }
  for (auto* p : params) p->zero_grad();
  return r;
}

}  // namespace iohfuse::testing
