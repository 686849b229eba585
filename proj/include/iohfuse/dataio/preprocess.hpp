#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iohfuse/dataio/types.hpp"

namespace iohfuse::dataio {

/// Mean arterial pressure, (SBP + 2 DBP) / 3. Throws std::domain_error unless
/// sbp >= dbp > 0.
double compute_map(double sbp, double dbp);

/// Per-beat pressure pairs to MAP samples. Pairs violating sbp >= dbp > 0
/// are dropped.
std::vector<TimedValue> map_from_pressure(std::span<const RawPressurePoint> points);

/// Bins time-sorted samples into `target_interval_s` buckets anchored at the
/// first timestamp and averages the valid readings in each. Readings that are
/// non-finite or outside (0, 300) mmHg are ignored; empty bins are missing.
MapSeries resample_map(std::span<const TimedValue> points, double target_interval_s,
                       std::string patient_id = {});

enum class QualityReason { accepted, too_short, too_much_missing };

std::string_view to_string(QualityReason r);

struct QualityDecision {
  bool accepted = false;
  QualityReason reason = QualityReason::accepted;
};

inline constexpr double kDefaultMinDurationS = 1000.0;
inline constexpr double kDefaultMaxMissingFraction = 0.20;

QualityDecision quality_filter(const MapSeries& series, double min_duration_s = kDefaultMinDurationS,
                               double max_missing_frac = kDefaultMaxMissingFraction);

/// Linear interpolation across interior gaps, nearest-value fill at the
/// edges. The missing mask is kept as an audit record. Throws
/// std::invalid_argument for an all-missing series.
MapSeries impute_missing(const MapSeries& series);

}  // namespace iohfuse::dataio
