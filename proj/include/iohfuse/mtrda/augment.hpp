#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "iohfuse/cohort/instances.hpp"
#include "iohfuse/mtrda/decompose.hpp"
#include "iohfuse/mtrda/denoiser.hpp"

namespace iohfuse::mtrda {

struct AugmentedInstance {
  std::string base_id;
  std::vector<std::vector<double>> variants;  // each of length l
};

struct AugmentOptions {
  std::size_t H = 4;
  /// Augment every instance, not only positives.
  bool augment_all = false;
  SampleOptions sampling;
};

/// Residual training set from instance histories.
std::vector<DenoiserSample> residual_dataset(std::span<const cohort::ForecastInstance> xs, const ScaleSet& scales,
                                             bool positives_only, bool keep_trend);

/// H variants per selected instance, seeded per instance id.
std::vector<AugmentedInstance> augment_instances(std::span<const cohort::ForecastInstance> xs, Denoiser& model,
                                                 const DiffusionSchedule& schedule, const ScaleSet& scales,
                                                 const AugmentOptions& opts, std::uint64_t seed);

/// X1 followed by one entry per variant (id "<base>#aug<j>", source
/// "augmented", target and labels copied from the base). Throws
/// std::invalid_argument on a reference to an id not in X1 or on a variant
/// whose length differs from the base history.
std::vector<cohort::ForecastInstance> assemble_x2(std::span<const cohort::ForecastInstance> x1,
                                                  std::span<const AugmentedInstance> augmentations);

/// JSONL rows {"base_id", "variant_ids", "file"} linking bases to variants.
void write_augmentation_manifest(const std::filesystem::path& path, std::span<const AugmentedInstance> augs,
                                 const std::string& variant_file);

}  // namespace iohfuse::mtrda
