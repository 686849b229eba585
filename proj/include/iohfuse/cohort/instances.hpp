#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iohfuse/dataio/types.hpp"

namespace iohfuse::cohort {

inline constexpr double kIohThresholdMmHg = 65.0;
inline constexpr double kMinEpisodeS = 60.0;

struct IOHEpisode {
  std::size_t start_index = 0;
  std::size_t end_index = 0;  // inclusive
  double duration_s = 0.0;

  friend bool operator==(const IOHEpisode&, const IOHEpisode&) = default;
};

/// Maximal runs of readings < 65 mmHg lasting at least 60 s (run length times
/// the sampling interval). Requires an imputed series; throws
/// std::invalid_argument on a non-finite reading.
std::vector<IOHEpisode> detect_ioh_episodes(const dataio::MapSeries& series,
                                            double threshold = kIohThresholdMmHg,
                                            double min_duration_s = kMinEpisodeS);

/// Window geometry. l, t and strides are in samples; the two windows are in
/// seconds and convert with ceil(seconds / sampling_interval_s).
struct WindowPolicy {
  std::size_t l = 90;
  std::size_t t = 30;
  std::size_t stride_normal = 20;
  std::size_t stride_ioh = 1;
  double warning_window_s = 120.0;
  double event_window_s = 60.0;
  double sampling_interval_s = 10.0;

  std::size_t warning_samples() const;
  std::size_t event_samples() const;
  /// Collects every violation; empty when valid.
  std::vector<std::string> violations() const;
  void validate() const;
};

nlohmann::json to_json(const WindowPolicy& p);
WindowPolicy window_policy_from_json(const nlohmann::json& j);

/// True iff some event-window run of samples that starts at or after the
/// warning window is entirely below 65 mmHg. Throws std::invalid_argument
/// when the target cannot hold both windows.
bool label_target(std::span<const double> target, const WindowPolicy& policy);

struct ForecastInstance {
  std::string id;
  std::string patient_id;
  std::size_t anchor_index = 0;
  std::vector<double> history;
  std::vector<double> target;
  bool label = false;
  double sampling_interval_s = 10.0;
  /// Per target timestamp: reading < 65 mmHg inside a detected episode.
  std::vector<std::uint8_t> ioh_mask;
  /// "original" or "augmented"; augmented entries name their base instance.
  std::string source = "original";
  std::string base_id;

  friend bool operator==(const ForecastInstance&, const ForecastInstance&) = default;
};

std::string instance_id(const std::string& patient_id, std::size_t anchor);

/// Adaptive slicing. Anchors start at 0; after each candidate the anchor
/// advances by stride_ioh when the candidate's label is positive and by
/// stride_normal otherwise, whether or not the candidate was kept.
/// Candidates whose history intersects an episode are dropped.
std::vector<ForecastInstance> slice_instances(const dataio::MapSeries& series,
                                              std::span<const IOHEpisode> episodes,
                                              const WindowPolicy& policy);

nlohmann::json to_json(const ForecastInstance& x);
ForecastInstance instance_from_json(const nlohmann::json& j);
void write_instances(const std::filesystem::path& path, std::span<const ForecastInstance> xs);
std::vector<ForecastInstance> read_instances(const std::filesystem::path& path);

}  // namespace iohfuse::cohort
