#include "iohfuse/dataio/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"

namespace iohfuse::dataio {

namespace {

constexpr double kFloorOutside = 66.0;
constexpr double kCeilInside = 63.5;
constexpr double kPrecursorEnd = 66.5;
constexpr double kReversion = 0.05;

std::size_t samples_for(double seconds, double interval) {
  return static_cast<std::size_t>(std::ceil(seconds / interval - 1e-9));
}

}  // namespace

void SynthConfig::validate() const {
  std::vector<std::string> v;
  if (n_patients == 0) v.emplace_back("n_patients must be >= 1");
  if (surgery_types.empty()) v.emplace_back("surgery_types must be non-empty");
  for (const auto& s : surgery_types) {
    if (s.empty()) v.emplace_back("surgery_types contains an empty entry");
  }
  if (!(sampling_interval_s > 0.0)) v.emplace_back("sampling_interval_s must be > 0");
  if (!(min_duration_s > 0.0) || max_duration_s < min_duration_s) v.emplace_back("duration range invalid");
  if (!(baseline_min > kFloorOutside) || baseline_max < baseline_min || baseline_max >= 300.0) {
    v.emplace_back("baseline range must satisfy 66 < min <= max < 300");
  }
  if (!(ioh_rate >= 0.0) || ioh_rate > 10.0) v.emplace_back("ioh_rate must be in [0, 10]");
  if (gradual_fraction < 0.0 || gradual_fraction > 1.0) v.emplace_back("gradual_fraction must be in [0, 1]");
  if (min_episode_s < 60.0 || max_episode_s < min_episode_s) v.emplace_back("episode duration range must start at >= 60 s");
  if (!(gradual_precursor_min_s > 0.0) || gradual_precursor_max_s < gradual_precursor_min_s) {
    v.emplace_back("gradual precursor range invalid");
  }
  if (!(rapid_precursor_min_s > 0.0) || rapid_precursor_max_s < rapid_precursor_min_s) {
    v.emplace_back("rapid precursor range invalid");
  }
  if (drift_sd < 0.0 || noise_sd < 0.0) v.emplace_back("noise parameters must be non-negative");
  if (missing_rate < 0.0 || missing_rate >= 1.0) v.emplace_back("missing_rate must be in [0, 1)");
  if (min_age < 0 || max_age > 130 || max_age < min_age) v.emplace_back("age range must lie in [0, 130]");
  if (!v.empty()) throw ValidationError(std::move(v));
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_patients", c.n_patients},
          {"surgery_types", c.surgery_types},
          {"sampling_interval_s", c.sampling_interval_s},
          {"min_duration_s", c.min_duration_s},
          {"max_duration_s", c.max_duration_s},
          {"baseline_min", c.baseline_min},
          {"baseline_max", c.baseline_max},
          {"ioh_rate", c.ioh_rate},
          {"gradual_fraction", c.gradual_fraction},
          {"min_episode_s", c.min_episode_s},
          {"max_episode_s", c.max_episode_s},
          {"gradual_precursor_min_s", c.gradual_precursor_min_s},
          {"gradual_precursor_max_s", c.gradual_precursor_max_s},
          {"rapid_precursor_min_s", c.rapid_precursor_min_s},
          {"rapid_precursor_max_s", c.rapid_precursor_max_s},
          {"drift_sd", c.drift_sd},
          {"noise_sd", c.noise_sd},
          {"missing_rate", c.missing_rate},
          {"min_age", c.min_age},
          {"max_age", c.max_age}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_patients", c.n_patients);
  get("surgery_types", c.surgery_types);
  get("sampling_interval_s", c.sampling_interval_s);
  get("min_duration_s", c.min_duration_s);
  get("max_duration_s", c.max_duration_s);
  get("baseline_min", c.baseline_min);
  get("baseline_max", c.baseline_max);
  get("ioh_rate", c.ioh_rate);
  get("gradual_fraction", c.gradual_fraction);
  get("min_episode_s", c.min_episode_s);
  get("max_episode_s", c.max_episode_s);
  get("gradual_precursor_min_s", c.gradual_precursor_min_s);
  get("gradual_precursor_max_s", c.gradual_precursor_max_s);
  get("rapid_precursor_min_s", c.rapid_precursor_min_s);
  get("rapid_precursor_max_s", c.rapid_precursor_max_s);
  get("drift_sd", c.drift_sd);
  get("noise_sd", c.noise_sd);
  get("missing_rate", c.missing_rate);
  get("min_age", c.min_age);
  get("max_age", c.max_age);
  return c;
}

SynthCohort synth_cohort(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  SynthCohort out;
  const double dt = config.sampling_interval_s;

  for (std::size_t pi = 0; pi < config.n_patients; ++pi) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "P%05zu", pi + 1);
    const std::string pid = idbuf;
    std::mt19937_64 rng(derive_seed(seed, pid));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unif(rng); };

    PatientStatic ps;
    ps.patient_id = pid;
    ps.age = config.min_age + static_cast<int>(std::floor(unif(rng) * (config.max_age - config.min_age + 1)));
    ps.age = std::min(ps.age, config.max_age);
    ps.gender = unif(rng) < 0.5 ? Gender::male : Gender::female;
    const auto si = std::min(config.surgery_types.size() - 1,
                             static_cast<std::size_t>(unif(rng) * static_cast<double>(config.surgery_types.size())));
    ps.surgery_type = config.surgery_types[si];

    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                       std::llround(uniform(config.min_duration_s, config.max_duration_s) / dt)));
    double baseline = uniform(config.baseline_min, config.baseline_max);
    if (ps.age > 65) baseline = std::max(config.baseline_min, baseline - 3.0);

    // Background: mean-reverting walk plus reading noise, kept above the floor.
    std::vector<double> level(n);
    double lvl = baseline;
    for (std::size_t t = 0; t < n; ++t) {
      lvl += kReversion * (baseline - lvl) + config.drift_sd * gauss(rng);
      level[t] = lvl;
    }
    std::vector<double> values(n);
    for (std::size_t t = 0; t < n; ++t) {
      values[t] = std::clamp(level[t] + config.noise_sd * gauss(rng), kFloorOutside, 160.0);
    }
    std::vector<std::uint8_t> protect(n, 0);

    // Episodes: one slot per planned episode, placed inside equal segments.
    std::size_t k = static_cast<std::size_t>(std::floor(config.ioh_rate));
    if (unif(rng) < config.ioh_rate - std::floor(config.ioh_rate)) ++k;
    const std::size_t min_ep = std::max<std::size_t>(1, samples_for(60.0, dt));
    for (std::size_t e = 0; e < k; ++e) {
      const DeclineStyle style = unif(rng) < config.gradual_fraction ? DeclineStyle::gradual : DeclineStyle::rapid;
      const double pre_s = style == DeclineStyle::gradual
                               ? uniform(config.gradual_precursor_min_s, config.gradual_precursor_max_s)
                               : uniform(config.rapid_precursor_min_s, config.rapid_precursor_max_s);
      const std::size_t pre = std::max<std::size_t>(1, samples_for(pre_s, dt));
      const std::size_t len =
          std::max(min_ep, samples_for(uniform(config.min_episode_s, config.max_episode_s), dt));
      const std::size_t rec = std::max<std::size_t>(1, samples_for(uniform(120.0, 300.0), dt));
      const double depth = uniform(52.0, 60.0);

      const std::size_t seg_begin = e * n / k;
      const std::size_t seg_end = (e + 1) * n / k;
      const std::size_t need = pre + len + rec;
      if (seg_end - seg_begin < need + 1) continue;
      const std::size_t slack = seg_end - seg_begin - need;
      const std::size_t offset = static_cast<std::size_t>(unif(rng) * static_cast<double>(slack + 1));
      const std::size_t start = seg_begin + std::min(offset, slack) + pre;
      const std::size_t end = start + len - 1;

      const double from = level[start - pre];
      for (std::size_t j = 0; j < pre; ++j) {
        const double u = static_cast<double>(j + 1) / static_cast<double>(pre);
        const double w = style == DeclineStyle::gradual ? u : u * u;
        const double base = from + w * (kPrecursorEnd - from);
        values[start - pre + j] = std::clamp(base + 0.5 * config.noise_sd * gauss(rng), 65.5, 160.0);
      }
      for (std::size_t t = start; t <= end; ++t) {
        values[t] = std::clamp(depth + config.noise_sd * gauss(rng), 35.0, kCeilInside);
        protect[t] = 1;
      }
      const double to = level[std::min(n - 1, end + rec)];
      for (std::size_t j = 0; j < rec; ++j) {
        const double u = static_cast<double>(j + 1) / static_cast<double>(rec);
        const double base = depth + u * (to - depth);
        values[end + 1 + j] = std::clamp(base + config.noise_sd * gauss(rng), kFloorOutside, 160.0);
      }
      protect[start - 1] = 1;
      protect[end + 1] = 1;
      out.episodes.push_back({pid, {start, end}, style});
    }

    MapSeries s;
    s.patient_id = pid;
    s.start_offset_s = 0.0;
    s.sampling_interval_s = dt;
    s.values = std::move(values);
    s.missing_mask.assign(n, 0);
    if (config.missing_rate > 0.0) {
      for (std::size_t t = 0; t < n; ++t) {
        if (!protect[t] && unif(rng) < config.missing_rate) {
          s.values[t] = std::numeric_limits<double>::quiet_NaN();
          s.missing_mask[t] = 1;
        }
      }
    }
    out.patients.push_back(std::move(ps));
    out.series.push_back(std::move(s));
  }
  return out;
}

}  // namespace iohfuse::dataio
