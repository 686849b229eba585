#include "iohfuse/dataio/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace iohfuse::dataio {

namespace {

bool valid_reading(double v) { return std::isfinite(v) && v > 0.0 && v < 300.0; }

}  // namespace

std::string_view to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

Gender parse_gender(std::string_view s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "male" || lower == "m") return Gender::male;
  if (lower == "female" || lower == "f") return Gender::female;
  throw std::invalid_argument("unknown gender '" + std::string(s) + "'");
}

void validate(const PatientStatic& p, std::span<const std::string> surgery_vocabulary) {
  if (p.patient_id.empty()) throw std::invalid_argument("patient_id is empty");
  if (p.age < 0 || p.age > 130) throw std::invalid_argument("age out of range [0, 130]: " + std::to_string(p.age));
  if (p.surgery_type.empty()) throw std::invalid_argument("surgery_type is empty for " + p.patient_id);
  if (!surgery_vocabulary.empty() &&
      std::find(surgery_vocabulary.begin(), surgery_vocabulary.end(), p.surgery_type) == surgery_vocabulary.end()) {
    throw std::invalid_argument("surgery_type '" + p.surgery_type + "' is not in the vocabulary");
  }
}

double MapSeries::missing_fraction() const {
  if (missing_mask.empty()) return 0.0;
  const auto n = std::count_if(missing_mask.begin(), missing_mask.end(), [](std::uint8_t m) { return m != 0; });
  return static_cast<double>(n) / static_cast<double>(missing_mask.size());
}

bool MapSeries::has_missing() const {
  return std::any_of(missing_mask.begin(), missing_mask.end(), [](std::uint8_t m) { return m != 0; });
}

void validate(const MapSeries& s) {
  if (!(s.sampling_interval_s > 0.0)) throw std::invalid_argument("sampling interval must be positive");
  if (s.missing_mask.size() != s.values.size()) throw std::invalid_argument("missing mask length differs from values");
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (s.missing_mask[i]) continue;
    if (!valid_reading(s.values[i])) {
      throw std::invalid_argument("reading " + std::to_string(i) + " of " + s.patient_id + " outside (0, 300) mmHg");
    }
  }
}

double compute_map(double sbp, double dbp) {
  if (!(dbp > 0.0) || !(sbp >= dbp)) {
    throw std::domain_error("compute_map requires sbp >= dbp > 0 (got sbp=" + std::to_string(sbp) +
                            ", dbp=" + std::to_string(dbp) + ")");
  }
  return (sbp + 2.0 * dbp) / 3.0;
}

std::vector<TimedValue> map_from_pressure(std::span<const RawPressurePoint> points) {
  std::vector<TimedValue> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (!(p.dbp > 0.0) || !(p.sbp >= p.dbp)) continue;
    out.push_back({p.time_s, compute_map(p.sbp, p.dbp)});
  }
  return out;
}

MapSeries resample_map(std::span<const TimedValue> points, double target_interval_s, std::string patient_id) {
  if (points.empty()) throw std::invalid_argument("resample_map: no input points");
  if (!(target_interval_s > 0.0)) throw std::invalid_argument("resample_map: interval must be positive");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].time_s < points[i - 1].time_s) {
      throw std::invalid_argument("resample_map: points are not time-sorted at index " + std::to_string(i));
    }
  }
  const double t0 = points.front().time_s;
  const auto bins = static_cast<std::size_t>(std::floor((points.back().time_s - t0) / target_interval_s)) + 1;
  std::vector<double> sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (const auto& p : points) {
    if (!valid_reading(p.value)) continue;
    auto b = static_cast<std::size_t>(std::floor((p.time_s - t0) / target_interval_s));
    b = std::min(b, bins - 1);
    sum[b] += p.value;
    ++count[b];
  }
  MapSeries s;
  s.patient_id = std::move(patient_id);
  s.start_offset_s = t0;
  s.sampling_interval_s = target_interval_s;
  s.values.resize(bins);
  s.missing_mask.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) {
      s.values[b] = std::numeric_limits<double>::quiet_NaN();
      s.missing_mask[b] = 1;
    } else {
      s.values[b] = sum[b] / static_cast<double>(count[b]);
      s.missing_mask[b] = 0;
    }
  }
  return s;
}

std::string_view to_string(QualityReason r) {
  switch (r) {
    case QualityReason::accepted:
      return "accepted";
    case QualityReason::too_short:
      return "short";
    case QualityReason::too_much_missing:
      return "missing";
  }
  return "unknown";
}

QualityDecision quality_filter(const MapSeries& series, double min_duration_s, double max_missing_frac) {
  if (series.duration_s() < min_duration_s) return {false, QualityReason::too_short};
  if (series.missing_fraction() > max_missing_frac) return {false, QualityReason::too_much_missing};
  return {true, QualityReason::accepted};
}

MapSeries impute_missing(const MapSeries& series) {
  MapSeries out = series;
  if (out.missing_mask.size() != out.values.size()) out.missing_mask.assign(out.values.size(), 0);
  const std::size_t n = out.values.size();
  auto is_missing = [&](std::size_t i) { return out.missing_mask[i] != 0 || !std::isfinite(series.values[i]); };

  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_missing(i)) valid.push_back(i);
  }
  if (valid.empty()) throw std::invalid_argument("impute_missing: series " + series.patient_id + " has no valid readings");

  for (std::size_t i = 0; i < valid.front(); ++i) out.values[i] = series.values[valid.front()];
  for (std::size_t i = valid.back() + 1; i < n; ++i) out.values[i] = series.values[valid.back()];
  for (std::size_t k = 0; k + 1 < valid.size(); ++k) {
    const std::size_t a = valid[k];
    const std::size_t b = valid[k + 1];
    const double va = series.values[a];
    const double vb = series.values[b];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double frac = static_cast<double>(i - a) / static_cast<double>(b - a);
      out.values[i] = va + frac * (vb - va);
    }
  }
  return out;
}

}  // namespace iohfuse::dataio
