#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "iohfuse/cli/config.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::testing {

/// Seconds-scale pipeline: short traces, width-8 networks, one epoch per stage.
inline cli::PipelineConfig tiny_pipeline_config(std::uint64_t seed = 3) {
  cli::PipelineConfig c;
  c.seed = seed;
  c.dataset.source = "synth";
  c.dataset.synth.n_patients = 30;
  c.dataset.synth.min_duration_s = 1500.0;
  c.dataset.synth.max_duration_s = 2100.0;
  c.dataset.synth.gradual_precursor_min_s = 200.0;
  c.dataset.synth.gradual_precursor_max_s = 300.0;
  c.dataset.synth.rapid_precursor_min_s = 100.0;
  c.dataset.synth.rapid_precursor_max_s = 200.0;
  c.window.l = 30;
  c.window.t = 30;
  c.window.stride_normal = 10;
  c.window.stride_ioh = 3;
  c.pcdg.eta = 16;
  c.mtrda.scales.windows = {3, 9, 15};
  c.mtrda.K = 10;
  c.mtrda.H = 2;
  c.mtrda.denoiser.l = 30;
  c.mtrda.denoiser.width = 8;
  c.mtrda.denoiser.blocks = 1;
  c.mtrda.train.epochs = 2;
  c.model.p = 6;
  c.model.d = 8;
  c.model.E = 1;
  c.model.n_heads = 2;
  c.model.eta = 16;
  c.model.l = 30;
  c.model.t = 30;
  c.model.mlp_ratio = 2;
  c.train.pretrain.epochs = 1;
  c.train.finetune.epochs = 1;
  c.eval.bench_repetitions = 3;
  c.eval.bench_instances = 2;
  c.eval.overlays = 2;
  return c;
}

/// Every manifests/*.json of a run directory keyed by file name.
inline std::map<std::string, nlohmann::json> read_manifests(const std::filesystem::path& out_dir) {
  std::map<std::string, nlohmann::json> out;
  const auto dir = out_dir / "manifests";
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    out[e.path().filename().string()] = nlohmann::json::parse(read_text(e.path()));
  }
  return out;
}

}  // namespace iohfuse::testing
