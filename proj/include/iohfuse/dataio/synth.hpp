#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "iohfuse/dataio/types.hpp"

namespace iohfuse::dataio {

enum class DeclineStyle { gradual, rapid };

/// Desk-scale cohort generator parameters. Durations are in seconds, pressures
/// in mmHg.
struct SynthConfig {
  std::size_t n_patients = 200;
  std::vector<std::string> surgery_types{"cardiac", "orthopedic", "laparoscopic cholecystectomy", "neurosurgery",
                                         "general"};
  double sampling_interval_s = 10.0;
  double min_duration_s = 3000.0;
  double max_duration_s = 4800.0;
  double baseline_min = 78.0;
  double baseline_max = 98.0;
  /// Expected planted episodes per trace: floor(rate) always, plus one more
  /// with probability frac(rate).
  double ioh_rate = 1.0;
  /// Fraction of planted episodes using the gradual decline style.
  double gradual_fraction = 0.5;
  double min_episode_s = 60.0;
  double max_episode_s = 180.0;
  double gradual_precursor_min_s = 480.0;
  double gradual_precursor_max_s = 900.0;
  double rapid_precursor_min_s = 240.0;
  double rapid_precursor_max_s = 420.0;
  double drift_sd = 0.6;    // per-step innovation of the mean-reverting walk
  double noise_sd = 1.2;    // white reading noise
  double missing_rate = 0.0;  // fraction of readings dropped uniformly at random
  int min_age = 18;
  int max_age = 85;

  /// Throws ValidationError listing every out-of-range field.
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct PlantedEpisode {
  std::string patient_id;
  EpisodeSpan span;
  DeclineStyle style = DeclineStyle::gradual;
};

struct SynthCohort {
  std::vector<PatientStatic> patients;
  std::vector<MapSeries> series;
  /// Ground-truth log of every planted sub-65 episode (>= 60 s each).
  std::vector<PlantedEpisode> episodes;
};

/// Deterministic for a fixed (config, seed). Outside planted episodes every
/// reading stays at or above 66 mmHg; inside them every reading is below
/// 64 mmHg, so the planted log is exactly what episode detection should find.
SynthCohort synth_cohort(const SynthConfig& config, std::uint64_t seed);

}  // namespace iohfuse::dataio
