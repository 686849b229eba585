#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iohfuse/cli/config.hpp"
#include "iohfuse/core/http.hpp"
#include "iohfuse/fusemodel/model.hpp"
#include "iohfuse/trainer/trainer.hpp"

namespace iohfuse::cli {

/// Pipeline order.
const std::vector<std::string>& command_names();

struct RunOptions {
  std::filesystem::path out_dir = "run";
  /// Shared by the external data source and the text client; created on
  /// demand when null.
  std::shared_ptr<HttpTransport> transport;
  std::ostream* log = nullptr;
};

/// Applies the configured ablation, validates (throwing ValidationError before
/// any file is written), runs one command and writes manifests/<command>.json.
/// Missing inputs throw PrerequisiteError naming the command to run first.
/// Returns the manifest: command, config hash, seed, ablation, and the
/// SHA-256 of every input and output artifact by path relative to out_dir.
nlohmann::json run_command(const std::string& command, const PipelineConfig& config, const RunOptions& opts);

/// Runs commands in the given order.
std::vector<nlohmann::json> run_pipeline(const std::vector<std::string>& commands, const PipelineConfig& config,
                                         const RunOptions& opts);

/// Tokenized per-patient descriptions from a prepared run directory.
std::map<std::string, fusemodel::TextInput> load_text_inputs(const std::filesystem::path& out_dir, std::size_t eta);

/// Instances of one prepared partition ("train", "val", "test") or of the
/// augmented pretraining set ("x2") joined with their text.
std::vector<trainer::Sample> load_samples(const std::filesystem::path& out_dir, const std::string& set,
                                          std::size_t eta);

}  // namespace iohfuse::cli
