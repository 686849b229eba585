#include "iohfuse/mtrda/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "iohfuse/core/errors.hpp"

namespace iohfuse::mtrda {

ScheduleShape parse_schedule_shape(std::string_view s) {
  if (s == "cosine") return ScheduleShape::cosine;
  if (s == "linear") return ScheduleShape::linear;
  throw ParseError("unknown schedule shape '" + std::string(s) + "'");
}

std::string_view to_string(ScheduleShape s) { return s == ScheduleShape::cosine ? "cosine" : "linear"; }

DiffusionSchedule make_schedule(std::size_t K, double beta_1, double beta_K, ScheduleShape shape) {
  if (K == 0) throw std::invalid_argument("make_schedule: K must be >= 1");
  if (!(beta_1 > 0.0) || beta_K < beta_1 || !(beta_K < 1.0)) {
    throw std::invalid_argument("make_schedule: need 0 < beta_1 <= beta_K < 1");
  }
  DiffusionSchedule s;
  s.K = K;
  s.beta.resize(K);
  if (K == 1) {
    s.beta[0] = beta_1;
  } else if (shape == ScheduleShape::linear) {
    for (std::size_t i = 0; i < K; ++i) {
      s.beta[i] = beta_1 + (beta_K - beta_1) * static_cast<double>(i) / static_cast<double>(K - 1);
    }
  } else {
    constexpr double off = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / static_cast<double>(K) + off) / (1.0 + off) * std::numbers::pi / 2.0);
      return c * c;
    };
    std::vector<double> raw(K);
    for (std::size_t k = 1; k <= K; ++k) {
      raw[k - 1] = std::min(1.0 - f(static_cast<double>(k)) / f(static_cast<double>(k - 1)), 0.999);
    }
    const double lo = raw.front();
    const double hi = raw.back();
    for (std::size_t i = 0; i < K; ++i) s.beta[i] = beta_1 + (raw[i] - lo) * (beta_K - beta_1) / (hi - lo);
  }
  s.beta.front() = beta_1;
  if (K > 1) s.beta.back() = beta_K;
  s.alpha.resize(K);
  s.alpha_bar.assign(K + 1, 1.0);
  for (std::size_t k = 1; k <= K; ++k) {
    s.alpha[k - 1] = 1.0 - s.beta[k - 1];
    s.alpha_bar[k] = s.alpha_bar[k - 1] * s.alpha[k - 1];
  }
  return s;
}

std::vector<double> diffuse_forward(std::span<const double> x0, std::size_t k, std::span<const double> eps,
                                    const DiffusionSchedule& schedule) {
  if (k > schedule.K) throw std::out_of_range("diffuse_forward: step " + std::to_string(k) + " > K");
  if (eps.size() != x0.size()) throw std::invalid_argument("diffuse_forward: noise length differs from input");
  const double a = std::sqrt(schedule.alpha_bar[k]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[k]);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

}  // namespace iohfuse::mtrda
