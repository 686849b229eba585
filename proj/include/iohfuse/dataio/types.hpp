#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iohfuse::dataio {

enum class Gender { male, female };

std::string_view to_string(Gender g);
/// Accepts "male"/"female" and the single-letter forms "M"/"F" (any case).
Gender parse_gender(std::string_view s);

struct PatientStatic {
  std::string patient_id;
  int age = 0;
  Gender gender = Gender::male;
  std::string surgery_type;

  friend bool operator==(const PatientStatic&, const PatientStatic&) = default;
};

/// Throws std::invalid_argument when age is outside [0, 130], the surgery type
/// is empty, or (when a vocabulary is given) not one of its entries.
void validate(const PatientStatic& p, std::span<const std::string> surgery_vocabulary = {});

/// Uniformly sampled MAP readings in mmHg. missing_mask[i] != 0 marks a reading
/// with no valid source samples; its value is NaN until imputed.
struct MapSeries {
  std::string patient_id;
  double start_offset_s = 0.0;
  double sampling_interval_s = 10.0;
  std::vector<double> values;
  std::vector<std::uint8_t> missing_mask;

  std::size_t size() const { return values.size(); }
  double duration_s() const { return static_cast<double>(values.size()) * sampling_interval_s; }
  double missing_fraction() const;
  bool has_missing() const;
};

/// Range and shape checks: equal lengths, interval > 0, valid readings finite in (0, 300).
void validate(const MapSeries& s);

struct RawPressurePoint {
  double time_s = 0.0;
  double sbp = 0.0;
  double dbp = 0.0;
};

struct TimedValue {
  double time_s = 0.0;
  double value = 0.0;

  friend bool operator==(const TimedValue&, const TimedValue&) = default;
};

/// Planted or detected hypotension interval, inclusive sample indices.
struct EpisodeSpan {
  std::size_t start_index = 0;
  std::size_t end_index = 0;

  friend bool operator==(const EpisodeSpan&, const EpisodeSpan&) = default;
};

}  // namespace iohfuse::dataio
