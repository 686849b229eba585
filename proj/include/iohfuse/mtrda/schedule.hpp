#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace iohfuse::mtrda {

enum class ScheduleShape { cosine, linear };

ScheduleShape parse_schedule_shape(std::string_view s);
std::string_view to_string(ScheduleShape s);

/// beta[k-1], alpha[k-1] for k = 1..K; alpha_bar[k] for k = 0..K with
/// alpha_bar[0] = 1.
struct DiffusionSchedule {
  std::size_t K = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  double beta_at(std::size_t k) const { return beta.at(k - 1); }
  double alpha_at(std::size_t k) const { return alpha.at(k - 1); }
  double alpha_bar_at(std::size_t k) const { return alpha_bar.at(k); }
};

/// Cosine shape: betas of the squared-cosine cumulative schedule (offset
/// 0.008), mapped affinely onto [beta_1, beta_K]. Linear shape: evenly
/// spaced. Throws std::invalid_argument unless K >= 1 and
/// 0 < beta_1 <= beta_K < 1.
DiffusionSchedule make_schedule(std::size_t K, double beta_1, double beta_K,
                                ScheduleShape shape = ScheduleShape::cosine);

/// sqrt(alpha_bar_k) * x0 + sqrt(1 - alpha_bar_k) * eps. Throws
/// std::out_of_range for k > K and std::invalid_argument on length mismatch.
std::vector<double> diffuse_forward(std::span<const double> x0, std::size_t k, std::span<const double> eps,
                                    const DiffusionSchedule& schedule);

}  // namespace iohfuse::mtrda
