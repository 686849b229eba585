#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "iohfuse/cohort/instances.hpp"
#include "iohfuse/cohort/split.hpp"
#include "iohfuse/dataio/external.hpp"
#include "iohfuse/dataio/synth.hpp"
#include "iohfuse/fusemodel/model.hpp"
#include "iohfuse/mtrda/decompose.hpp"
#include "iohfuse/mtrda/denoiser.hpp"
#include "iohfuse/mtrda/schedule.hpp"
#include "iohfuse/pcdg/describe.hpp"
#include "iohfuse/trainer/trainer.hpp"

namespace iohfuse::cli {

struct ExternalSource {
  std::string url_template = "http://localhost:8080/cases/{case_id}/tracks/{track}";
  std::string cache_dir;  // empty: default cache location
  std::vector<std::string> case_ids;
  /// Fetch MAP directly when set; otherwise derive it from the pressure pair.
  std::string map_track;
  std::string sbp_track = "SBP";
  std::string dbp_track = "DBP";
  /// JSONL patient attributes, one row per case id.
  std::string static_path;
};

struct DatasetSection {
  /// "synth" (generator), "files" (stored cohort directory) or "external".
  std::string source = "synth";
  dataio::SynthConfig synth;
  std::string cohort_dir;
  ExternalSource external;
  double sampling_interval_s = 10.0;
  double min_duration_s = 1000.0;
  double max_missing_fraction = 0.2;
};

struct PcdgSection {
  std::string rules_path;  // empty: built-in rule table
  std::size_t eta = 64;
  bool domain_terms = true;
  pcdg::LlmClientConfig llm;
};

struct MtrdaSection {
  bool enabled = true;
  mtrda::ScaleSet scales;
  std::size_t K = 50;
  double beta_1 = 1e-4;
  double beta_K = 0.5;
  mtrda::ScheduleShape shape = mtrda::ScheduleShape::cosine;
  std::size_t H = 4;
  bool augment_all = false;
  bool single_shot = false;
  mtrda::DenoiserConfig denoiser;
  mtrda::DenoiserTrainConfig train;
};

struct TrainSection {
  bool pretrain_enabled = true;
  trainer::TrainConfig pretrain = trainer::TrainConfig::defaults_for(trainer::Stage::pretrain);
  trainer::TrainConfig finetune = trainer::TrainConfig::defaults_for(trainer::Stage::finetune);
};

struct EvalSection {
  std::size_t overlays = 6;
  std::size_t bench_repetitions = 100;
  std::size_t bench_instances = 16;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  trainer::Ablation ablation = trainer::Ablation::full;
  DatasetSection dataset;
  cohort::WindowPolicy window;
  cohort::SplitOptions split;
  PcdgSection pcdg;
  MtrdaSection mtrda;
  fusemodel::ModelConfig model;
  TrainSection train;
  EvalSection eval;

  /// Every field and cross-field violation; empty when valid. vocab_size is
  /// derived at run time and not checked here.
  std::vector<std::string> violations() const;
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& c);
/// Unknown keys and type errors are collected and thrown as one
/// ValidationError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// sha256 of the canonical JSON form.
std::string config_hash(const PipelineConfig& c);

/// Rewrites the configuration for an ablation variant and records it.
PipelineConfig apply_ablation(trainer::Ablation variant, PipelineConfig c);

}  // namespace iohfuse::cli
