#include "iohfuse/mtrda/decompose.hpp"

#include <stdexcept>
#include <string>

namespace iohfuse::mtrda {

void ScaleSet::validate(std::size_t l) const {
  if (windows.empty()) throw std::invalid_argument("scale set is empty");
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t w = windows[i];
    if (w == 0 || w % 2 == 0) throw std::invalid_argument("scale window " + std::to_string(w) + " is not odd and positive");
    if (i > 0 && w <= windows[i - 1]) throw std::invalid_argument("scale windows must be strictly increasing");
    if (l > 0 && w > 2 * l - 1) {
      throw std::invalid_argument("scale window " + std::to_string(w) + " exceeds 2l-1 for l=" + std::to_string(l));
    }
  }
}

std::vector<double> smooth_scale(std::span<const double> x, std::size_t w) {
  const std::size_t l = x.size();
  if (w == 0 || w % 2 == 0) throw std::invalid_argument("smooth_scale: window must be odd, got " + std::to_string(w));
  if (l == 0) return {};
  if (w > 2 * l - 1) throw std::invalid_argument("smooth_scale: window exceeds 2l-1");
  const std::size_t h = w / 2;
  // prefix over the padded sequence of length l + 2h
  std::vector<double> prefix(l + 2 * h + 1, 0.0);
  for (std::size_t j = 0; j < l + 2 * h; ++j) {
    double v;
    if (j < h) {
      v = x[h - 1 - j];
    } else if (j < h + l) {
      v = x[j - h];
    } else {
      v = x[l - 1 - (j - h - l)];
    }
    prefix[j + 1] = prefix[j] + v;
  }
  std::vector<double> out(l);
  const double inv = 1.0 / static_cast<double>(w);
  for (std::size_t i = 0; i < l; ++i) out[i] = (prefix[i + w] - prefix[i]) * inv;
  if (w == 1) out.assign(x.begin(), x.end());
  return out;
}

TrendResidual decompose(std::span<const double> x, const ScaleSet& scales) {
  scales.validate(x.size());
  TrendResidual tr;
  tr.trend.assign(x.size(), 0.0);
  for (std::size_t w : scales.windows) {
    const auto s = smooth_scale(x, w);
    for (std::size_t i = 0; i < x.size(); ++i) tr.trend[i] += s[i];
  }
  const double inv = 1.0 / static_cast<double>(scales.windows.size());
  tr.residual.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    tr.trend[i] *= inv;
    tr.residual[i] = x[i] - tr.trend[i];
  }
  return tr;
}

}  // namespace iohfuse::mtrda
