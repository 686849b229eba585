#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "iohfuse/mtrda/schedule.hpp"
#include "iohfuse/nn/graph.hpp"
#include "iohfuse/nn/param.hpp"

namespace iohfuse::mtrda {

struct DenoiserConfig {
  std::size_t l = 90;
  std::size_t width = 128;
  std::size_t blocks = 3;
  /// Feed the (normalized) trend as a second input channel.
  bool condition_on_trend = false;
  double trend_center = 80.0;
  double trend_scale = 15.0;

  std::vector<std::string> violations() const;
};

nlohmann::json to_json(const DenoiserConfig& c);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

/// x0-predicting denoiser. Per-timestep input projection plus learnable
/// positions; a sinusoidal step embedding passed through a two-layer
/// projection drives per-block adaptive layer-norm scale and shift; each
/// block adds W_t * GELU(AdaLN(H) W_c + b_c) with W_t mixing across time;
/// a final layer norm and linear map return one value per timestep.
struct Denoiser {
  DenoiserConfig config;
  nn::ParamSet params;
  /// Residuals are divided by this before diffusion (1 unless standardized).
  double residual_scale = 1.0;

  Denoiser() = default;
  Denoiser(const DenoiserConfig& cfg, std::uint64_t seed);
};

/// Sinusoidal embedding of step k with `dim` entries (sin half, cos half).
nn::Matrix step_embedding(std::size_t k, std::size_t dim);

/// Builds the forward pass on `g`; x_k and trend are l x 1 (trend ignored
/// unless conditioning is on). Returns l x 1.
nn::Tensor denoiser_graph(nn::Graph& g, Denoiser& model, const nn::Matrix& x_k, std::size_t k,
                          const nn::Matrix* trend = nullptr);

/// Inference forward. Throws std::invalid_argument on length mismatch.
std::vector<double> denoiser_forward(std::span<const double> x_k, std::size_t k, Denoiser& model,
                                     std::span<const double> trend = {});

/// Mean over timesteps of (x0 - f(x_k, k))^2 with x_k = diffuse_forward(x0, k, eps).
nn::Tensor denoiser_loss(nn::Graph& g, Denoiser& model, std::span<const double> x0, std::size_t k,
                         std::span<const double> eps, const DiffusionSchedule& schedule,
                         std::span<const double> trend = {});

struct DenoiserTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool standardize = false;
  double clip_norm = 5.0;
};

struct DenoiserSample {
  std::vector<double> residual;
  std::vector<double> trend;  // may be empty when conditioning is off
};

struct DenoiserTrainResult {
  std::vector<double> loss_history;  // mean per-sample loss per epoch
};

/// Adam on uniformly drawn (sample, k in 1..K, eps). Throws
/// DivergenceError on a non-finite loss and std::invalid_argument on an
/// empty dataset.
DenoiserTrainResult train_denoiser(Denoiser& model, std::span<const DenoiserSample> data,
                                   const DiffusionSchedule& schedule, const DenoiserTrainConfig& cfg,
                                   const std::function<void(std::size_t, double)>& on_epoch = {});

struct SampleOptions {
  bool single_shot = false;
};

/// H histories: start from N(0, I), run ancestral x0-parameterized reverse
/// steps K..1 (posterior mean plus sqrt(beta_tilde) noise, none at k = 1),
/// rescale, add the trend. single_shot applies f once at k = K instead.
std::vector<std::vector<double>> sample_augmented(std::span<const double> trend, Denoiser& model,
                                                  const DiffusionSchedule& schedule, std::size_t H,
                                                  std::uint64_t seed, SampleOptions opts = {});

void save_denoiser(const std::filesystem::path& path, const Denoiser& model, const DiffusionSchedule& schedule);
/// Returns the model and writes the stored schedule into `schedule` when given.
Denoiser load_denoiser(const std::filesystem::path& path, DiffusionSchedule* schedule = nullptr);

}  // namespace iohfuse::mtrda
