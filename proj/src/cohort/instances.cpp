#include "iohfuse/cohort/instances.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::cohort {

namespace {

std::size_t to_samples(double seconds, double interval) {
  return static_cast<std::size_t>(std::ceil(seconds / interval - 1e-9));
}

}  // namespace

std::vector<IOHEpisode> detect_ioh_episodes(const dataio::MapSeries& series, double threshold,
                                            double min_duration_s) {
  const double dt = series.sampling_interval_s;
  if (!(dt > 0.0)) throw std::invalid_argument("detect_ioh_episodes: sampling interval must be positive");
  std::vector<IOHEpisode> out;
  const auto& v = series.values;
  std::size_t i = 0;
  while (i < v.size()) {
    if (!std::isfinite(v[i])) {
      throw std::invalid_argument("detect_ioh_episodes: non-finite reading at " + std::to_string(i) + " of " +
                                  series.patient_id + " (impute first)");
    }
    if (v[i] >= threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < v.size() && std::isfinite(v[j + 1]) && v[j + 1] < threshold) ++j;
    const double dur = static_cast<double>(j - i + 1) * dt;
    if (dur >= min_duration_s - 1e-9) out.push_back({i, j, dur});
    i = j + 1;
  }
  return out;
}

std::size_t WindowPolicy::warning_samples() const { return to_samples(warning_window_s, sampling_interval_s); }
std::size_t WindowPolicy::event_samples() const {
  return std::max<std::size_t>(1, to_samples(event_window_s, sampling_interval_s));
}

std::vector<std::string> WindowPolicy::violations() const {
  std::vector<std::string> v;
  if (l == 0) v.emplace_back("window.l must be > 0");
  if (t == 0) v.emplace_back("window.t must be > 0");
  if (stride_normal == 0) v.emplace_back("window.stride_normal must be > 0");
  if (stride_ioh == 0) v.emplace_back("window.stride_ioh must be > 0");
  if (!(warning_window_s > 0.0)) v.emplace_back("window.warning_window_s must be > 0");
  if (!(event_window_s > 0.0)) v.emplace_back("window.event_window_s must be > 0");
  if (!(sampling_interval_s > 0.0)) {
    v.emplace_back("window.sampling_interval_s must be > 0");
  } else if (warning_window_s + event_window_s > static_cast<double>(t) * sampling_interval_s + 1e-9) {
    v.emplace_back("window.warning_window_s + event_window_s must not exceed t * sampling_interval_s");
  }
  return v;
}

void WindowPolicy::validate() const {
  auto v = violations();
  if (!v.empty()) throw ValidationError(std::move(v));
}

nlohmann::json to_json(const WindowPolicy& p) {
  return {{"l", p.l},
          {"t", p.t},
          {"stride_normal", p.stride_normal},
          {"stride_ioh", p.stride_ioh},
          {"warning_window_s", p.warning_window_s},
          {"event_window_s", p.event_window_s},
          {"sampling_interval_s", p.sampling_interval_s}};
}

WindowPolicy window_policy_from_json(const nlohmann::json& j) {
  WindowPolicy p;
  p.l = j.value("l", p.l);
  p.t = j.value("t", p.t);
  p.stride_normal = j.value("stride_normal", p.stride_normal);
  p.stride_ioh = j.value("stride_ioh", p.stride_ioh);
  p.warning_window_s = j.value("warning_window_s", p.warning_window_s);
  p.event_window_s = j.value("event_window_s", p.event_window_s);
  p.sampling_interval_s = j.value("sampling_interval_s", p.sampling_interval_s);
  return p;
}

bool label_target(std::span<const double> target, const WindowPolicy& policy) {
  const std::size_t w = policy.warning_samples();
  const std::size_t e = policy.event_samples();
  if (target.size() < w + e) {
    throw std::invalid_argument("label_target: target of " + std::to_string(target.size()) +
                                " samples cannot hold warning + event windows (" + std::to_string(w + e) + ")");
  }
  // Longest sub-65 run ending at i, counted only from offset w onwards.
  std::size_t run = 0;
  for (std::size_t i = w; i < target.size(); ++i) {
    run = target[i] < kIohThresholdMmHg ? run + 1 : 0;
    if (run >= e) return true;
  }
  return false;
}

std::string instance_id(const std::string& patient_id, std::size_t anchor) {
  return patient_id + "@" + std::to_string(anchor);
}

std::vector<ForecastInstance> slice_instances(const dataio::MapSeries& series, std::span<const IOHEpisode> episodes,
                                              const WindowPolicy& policy) {
  policy.validate();
  std::vector<ForecastInstance> out;
  const std::size_t n = series.values.size();
  const std::size_t span = policy.l + policy.t;
  if (n < span) return out;

  std::vector<std::uint8_t> in_episode(n, 0);
  for (const auto& ep : episodes) {
    for (std::size_t i = ep.start_index; i <= ep.end_index && i < n; ++i) in_episode[i] = 1;
  }
  // prefix[i] = episode samples in [0, i)
  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + in_episode[i];

  for (std::size_t a = 0; a + span <= n;) {
    std::span<const double> target(series.values.data() + a + policy.l, policy.t);
    const bool label = label_target(target, policy);
    const bool overlaps = prefix[a + policy.l] - prefix[a] > 0;
    if (!overlaps) {
      ForecastInstance x;
      x.id = instance_id(series.patient_id, a);
      x.patient_id = series.patient_id;
      x.anchor_index = a;
      x.history.assign(series.values.begin() + static_cast<std::ptrdiff_t>(a),
                       series.values.begin() + static_cast<std::ptrdiff_t>(a + policy.l));
      x.target.assign(target.begin(), target.end());
      x.label = label;
      x.sampling_interval_s = series.sampling_interval_s;
      x.ioh_mask.resize(policy.t);
      for (std::size_t k = 0; k < policy.t; ++k) {
        x.ioh_mask[k] = in_episode[a + policy.l + k] && target[k] < kIohThresholdMmHg ? 1 : 0;
      }
      out.push_back(std::move(x));
    }
    a += label ? policy.stride_ioh : policy.stride_normal;
  }
  return out;
}

nlohmann::json to_json(const ForecastInstance& x) {
  nlohmann::json j{{"id", x.id},
                   {"patient_id", x.patient_id},
                   {"anchor", x.anchor_index},
                   {"history", x.history},
                   {"target", x.target},
                   {"label", x.label},
                   {"sampling_interval_s", x.sampling_interval_s},
                   {"ioh_mask", x.ioh_mask},
                   {"source", x.source}};
  if (!x.base_id.empty()) j["base_id"] = x.base_id;
  return j;
}

ForecastInstance instance_from_json(const nlohmann::json& j) {
  ForecastInstance x;
  for (const char* key : {"patient_id", "anchor", "history", "target", "label"}) {
    if (!j.contains(key)) throw SchemaError(std::string("instance missing key '") + key + "'");
  }
  x.patient_id = j.at("patient_id").get<std::string>();
  x.anchor_index = j.at("anchor").get<std::size_t>();
  x.history = j.at("history").get<std::vector<double>>();
  x.target = j.at("target").get<std::vector<double>>();
  x.label = j.at("label").get<bool>();
  x.id = j.value("id", instance_id(x.patient_id, x.anchor_index));
  x.sampling_interval_s = j.value("sampling_interval_s", 10.0);
  x.ioh_mask = j.value("ioh_mask", std::vector<std::uint8_t>(x.target.size(), 0));
  x.source = j.value("source", std::string("original"));
  x.base_id = j.value("base_id", std::string());
  if (x.ioh_mask.size() != x.target.size()) throw SchemaError("ioh_mask length differs from target for " + x.id);
  return x;
}

void write_instances(const std::filesystem::path& path, std::span<const ForecastInstance> xs) {
  std::vector<nlohmann::json> rows;
  rows.reserve(xs.size());
  for (const auto& x : xs) rows.push_back(to_json(x));
  write_jsonl(path, rows);
}

std::vector<ForecastInstance> read_instances(const std::filesystem::path& path) {
  const auto rows = read_jsonl(path);
  std::vector<ForecastInstance> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      out.push_back(instance_from_json(rows[i]));
    } catch (const SchemaError& e) {
      throw SchemaError(e.what(), i + 1);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("instance field has the wrong type: ") + e.what(), i + 1);
    }
  }
  return out;
}

}  // namespace iohfuse::cohort
