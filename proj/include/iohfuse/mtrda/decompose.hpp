#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace iohfuse::mtrda {

/// Odd, strictly increasing window lengths in samples.
struct ScaleSet {
  std::vector<std::size_t> windows{5, 25, 75};

  /// Throws std::invalid_argument unless non-empty, odd, >= 1 and strictly
  /// increasing; with l > 0 also requires every window <= 2l - 1.
  void validate(std::size_t l = 0) const;
};

struct TrendResidual {
  std::vector<double> trend;
  std::vector<double> residual;
};

/// Centered moving average over a symmetric (edge-repeating) padding of
/// floor(w/2) samples per side: x[-1-i] = x[i], x[l+i] = x[l-1-i].
std::vector<double> smooth_scale(std::span<const double> x, std::size_t w);

/// trend = mean over windows of smooth_scale; residual = x - trend.
TrendResidual decompose(std::span<const double> x, const ScaleSet& scales);

}  // namespace iohfuse::mtrda
