#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "iohfuse/cohort/instances.hpp"
#include "iohfuse/fusemodel/model.hpp"
#include "iohfuse/nn/adam.hpp"

namespace iohfuse::trainer {

enum class Stage { pretrain, finetune };
enum class Ablation { full, no_text, no_vocab_ext, no_augmentation, no_pretrain };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);
std::string_view to_string(Ablation a);
/// Throws std::invalid_argument naming the accepted variants.
Ablation parse_ablation(std::string_view s);

/// Pipeline switches implied by an ablation variant.
struct StageToggles {
  bool use_text = true;
  bool domain_terms = true;
  bool augmentation = true;
  bool pretrain = true;
};

StageToggles toggles_for(Ablation a);

struct TrainConfig {
  Stage stage = Stage::pretrain;
  double learning_rate = 1e-4;
  double decay_factor = 0.75;
  std::size_t batch_size = 4;
  std::size_t epochs = 60;
  double rho = 10.0;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::full;
  /// Epochs without a validation improvement before stopping; 0 disables.
  std::size_t patience = 10;
  double clip_norm = 1.0;
  /// Per-timestamp IOH mask source for fine-tuning: the instance mask
  /// (episode-aware) or any target reading < 65 mmHg.
  bool strict_ioh_mask = false;

  static TrainConfig defaults_for(Stage s);
  std::vector<std::string> violations() const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, Stage stage);

/// lr0 * decay^n once n epochs have completed.
double learning_rate_after(const TrainConfig& c, std::size_t completed_epochs);
/// Rate used while training 1-based `epoch`: learning_rate_after(epoch - 1).
double learning_rate_at(const TrainConfig& c, std::size_t epoch);

/// One model input: normalized-space values are derived on the fly.
struct Sample {
  std::string id;
  std::vector<double> history;
  std::vector<double> target;
  std::vector<std::uint8_t> ioh_mask;
  fusemodel::TextInput text;
};

/// Joins instances with per-patient text; patients without text get an
/// all-padding input of length eta (eta == 0 leaves text empty).
std::vector<Sample> make_samples(std::span<const cohort::ForecastInstance> xs,
                                 const std::map<std::string, fusemodel::TextInput>& text_by_patient, std::size_t eta);

/// MSE over mask-false timestamps plus rho times MSE over mask-true ones;
/// an empty partition contributes 0. Throws on length mismatch.
double compute_ioh_loss(std::span<const double> pred, std::span<const double> target,
                        std::span<const std::uint8_t> ioh_mask, double rho);

/// Graph form of compute_ioh_loss over a 1 x t prediction.
nn::Tensor ioh_loss_graph(nn::Graph& g, nn::Tensor pred, std::span<const double> target,
                          std::span<const std::uint8_t> ioh_mask, double rho);

/// Mask positions for a sample in a given epoch; pure in (seed, id, epoch).
std::vector<std::size_t> pretrain_mask(const fusemodel::ModelConfig& c, std::uint64_t seed, const std::string& id,
                                       std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;
  Stage stage = Stage::pretrain;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  std::int64_t optimizer_steps = 0;
};

struct TrainHooks {
  /// Called after each epoch.
  std::function<void(const EpochRecord&)> on_epoch;
  /// When set, the best-validation state (parameters and optimizer moments)
  /// is written here whenever it improves.
  std::optional<std::filesystem::path> checkpoint_path;
};

/// Masked reconstruction over full (l + t) windows. Leaves the model at the
/// best-validation epoch (training loss when val is empty). A non-finite loss
/// restores the last good state and throws DivergenceError.
TrainResult pretrain(fusemodel::FusionModel& model, std::span<const Sample> train, std::span<const Sample> val,
                     const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Fresh fine-tuning start from a pretrained model. Throws
/// std::invalid_argument when the configurations differ.
fusemodel::FusionModel prepare_finetune(const fusemodel::FusionModel& pretrained,
                                        const fusemodel::ModelConfig& requested, std::uint64_t seed);

/// Forecast training with the rho-weighted loss; same selection and
/// divergence policy as pretrain.
TrainResult finetune(fusemodel::FusionModel& model, std::span<const Sample> train, std::span<const Sample> val,
                     const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Mean validation losses under the stage objective, with fixed masks.
double pretrain_eval_loss(fusemodel::FusionModel& model, std::span<const Sample> xs, std::uint64_t seed);
double finetune_eval_loss(fusemodel::FusionModel& model, std::span<const Sample> xs, const TrainConfig& cfg);

struct CheckpointMeta {
  Stage stage = Stage::pretrain;
  std::size_t epoch = 0;
  nlohmann::json train_config = nlohmann::json::object();
  std::vector<EpochRecord> history;
};

/// Loadable by fusemodel::load_model; optimizer moments ride along.
void save_checkpoint(const std::filesystem::path& path, const fusemodel::FusionModel& model, const nn::Adam* opt,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  fusemodel::FusionModel model;
  CheckpointMeta meta;
  std::int64_t optimizer_steps = 0;
  std::vector<nn::Matrix> first_moments;
  std::vector<nn::Matrix> second_moments;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// CSV with header epoch,stage,train_loss,val_loss,lr.
void write_training_log(const std::filesystem::path& path, std::span<const EpochRecord> rows);

nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

}  // namespace iohfuse::trainer
