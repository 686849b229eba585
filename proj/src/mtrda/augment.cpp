#include "iohfuse/mtrda/augment.hpp"

#include <map>
#include <stdexcept>

#include "iohfuse/core/hash.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::mtrda {

namespace {

std::string variant_id(const std::string& base, std::size_t j) { return base + "#aug" + std::to_string(j); }

}  // namespace

std::vector<DenoiserSample> residual_dataset(std::span<const cohort::ForecastInstance> xs, const ScaleSet& scales,
                                             bool positives_only, bool keep_trend) {
  std::vector<DenoiserSample> out;
  for (const auto& x : xs) {
    if (positives_only && !x.label) continue;
    auto tr = decompose(x.history, scales);
    DenoiserSample s;
    s.residual = std::move(tr.residual);
    if (keep_trend) s.trend = std::move(tr.trend);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AugmentedInstance> augment_instances(std::span<const cohort::ForecastInstance> xs, Denoiser& model,
                                                 const DiffusionSchedule& schedule, const ScaleSet& scales,
                                                 const AugmentOptions& opts, std::uint64_t seed) {
  std::vector<AugmentedInstance> out;
  if (opts.H == 0) return out;
  for (const auto& x : xs) {
    if (!opts.augment_all && !x.label) continue;
    const auto tr = decompose(x.history, scales);
    AugmentedInstance a;
    a.base_id = x.id;
    a.variants = sample_augmented(tr.trend, model, schedule, opts.H, derive_seed(seed, x.id), opts.sampling);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<cohort::ForecastInstance> assemble_x2(std::span<const cohort::ForecastInstance> x1,
                                                  std::span<const AugmentedInstance> augmentations) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < x1.size(); ++i) index[x1[i].id] = i;
  std::vector<cohort::ForecastInstance> out(x1.begin(), x1.end());
  for (const auto& a : augmentations) {
    auto it = index.find(a.base_id);
    if (it == index.end()) throw std::invalid_argument("assemble_x2: unknown base instance '" + a.base_id + "'");
    const auto& base = x1[it->second];
    for (std::size_t j = 0; j < a.variants.size(); ++j) {
      if (a.variants[j].size() != base.history.size()) {
        throw std::invalid_argument("assemble_x2: variant length differs from history of '" + a.base_id + "'");
      }
      cohort::ForecastInstance v = base;
      v.id = variant_id(base.id, j);
      v.history = a.variants[j];
      v.source = "augmented";
      v.base_id = base.id;
      out.push_back(std::move(v));
    }
  }
  return out;
}

void write_augmentation_manifest(const std::filesystem::path& path, std::span<const AugmentedInstance> augs,
                                 const std::string& variant_file) {
  std::vector<nlohmann::json> rows;
  for (const auto& a : augs) {
    std::vector<std::string> ids;
    for (std::size_t j = 0; j < a.variants.size(); ++j) ids.push_back(variant_id(a.base_id, j));
    rows.push_back({{"base_id", a.base_id}, {"variant_ids", ids}, {"file", variant_file}});
  }
  write_jsonl(path, rows);
}

}  // namespace iohfuse::mtrda
