#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iohfuse/nn/graph.hpp"
#include "iohfuse/nn/param.hpp"

namespace iohfuse::fusemodel {

enum class Mode { pretrain, forecast };

struct ModelConfig {
  std::size_t p = 6;
  std::size_t d = 128;
  std::size_t E = 3;
  std::size_t n_heads = 4;
  std::size_t eta = 64;
  double lambda = 1e4;
  double R = 0.2;
  std::size_t l = 90;
  std::size_t t = 30;
  std::size_t vocab_size = 0;
  bool use_text = true;
  std::size_t mlp_ratio = 4;
  std::size_t max_seq_len = 512;
  /// Fixed standardization applied to MAP values before patching.
  double norm_center = 80.0;
  double norm_scale = 15.0;

  std::size_t n_pretrain() const { return (l + t) / p; }
  std::size_t n_history() const { return l / p; }
  std::vector<std::string> violations() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Text tokens and their validity mask, both of length eta.
struct TextInput {
  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> mask;
};

/// Parameter names are grouped by prefix: "series." (patch projection and
/// positions, reinitialized for fine-tuning), "mask_token", "text." and
/// "xattn." (the text pathway, absent when use_text is false), "block<i>."
/// and "lnf." (backbone), "head." (output projections, reinitialized).
class FusionModel {
 public:
  FusionModel() = default;
  FusionModel(const ModelConfig& cfg, std::uint64_t seed);

  ModelConfig config;
  nn::ParamSet params;

  /// Redraws the "series." and "head." parameters from `seed`.
  void reinit_series_and_heads(std::uint64_t seed);
  std::size_t text_param_count() const;
  std::size_t series_param_count() const;

 private:
  void init_group(const std::string& prefix, std::uint64_t seed);
};

/// Contiguous patches as rows of an n_s x p matrix. Throws
/// std::invalid_argument unless p divides the length.
nn::Matrix patchify(std::span<const double> series, std::size_t p);

/// Right-pads with the last value up to a multiple of p.
std::vector<double> pad_to_multiple(std::span<const double> series, std::size_t p);

/// Affine patch projection shared over positions plus positions 0..n_s-1.
nn::Tensor embed_patches(nn::Graph& g, FusionModel& m, nn::Tensor patches);

/// round(R * n) distinct positions drawn uniformly, sorted; pure in seed.
std::vector<std::size_t> choose_mask_positions(std::size_t n, double R, std::uint64_t seed);

/// Replaces the listed rows with the learned mask token.
nn::Tensor mask_tokens(nn::Graph& g, FusionModel& m, nn::Tensor tokens, std::span<const std::size_t> positions);

/// M[r][c] = 1 - m[c] for every row r < n_s.
nn::Matrix build_attention_mask(std::span<const std::uint8_t> m, std::size_t n_s);

/// softmax((Q K^T) / sqrt(d_k) - lambda * flags) V, where flags is
/// rows(Q) x rows(K). Rows with every key flagged output zeros.
nn::Tensor penalized_attention(nn::Graph& g, nn::Tensor q, nn::Tensor k, nn::Tensor v, const nn::Matrix& flags,
                               double lambda);

/// Text-query cross-attention over series keys/values. The n_s x eta mask M
/// is applied transposed (query orientation).
nn::Tensor masked_cross_attention(nn::Graph& g, FusionModel& m, nn::Tensor text_tokens, nn::Tensor series_tokens,
                                  const nn::Matrix& M);

/// Token embedding plus text positions, eta x d.
nn::Tensor embed_text(nn::Graph& g, FusionModel& m, const TextInput& text);

/// (T + CrossAttn(T, S)) with padded text rows zeroed, eta x d.
nn::Tensor fuse_text(nn::Graph& g, FusionModel& m, nn::Tensor series_tokens, const TextInput& text);

/// E pre-norm causal blocks then the final norm. key_valid[i] == 0 removes
/// position i as a key for every other query.
nn::Tensor backbone(nn::Graph& g, FusionModel& m, nn::Tensor sequence, std::span<const std::uint8_t> key_valid);

/// Hidden states at the series positions (n_s x d) for a normalized window.
/// With text, the sequence is [fused text || series]; `masked` rows of the
/// series tokens are replaced by the mask token first.
nn::Tensor encode_series(nn::Graph& g, FusionModel& m, std::span<const double> window_norm, const TextInput* text,
                         std::span<const std::size_t> masked = {});

/// Per-token affine R^d -> R^p.
nn::Tensor project_reconstruction(nn::Graph& g, FusionModel& m, nn::Tensor series_hidden);

/// Mean squared error over the masked patches (p values each) of the
/// normalized (l + t) window; 0 when nothing is masked.
nn::Tensor pretrain_loss(nn::Graph& g, FusionModel& m, std::span<const double> window_norm, const TextInput* text,
                         std::span<const std::size_t> masked);

/// Normalized 1 x t forecast from a normalized history of length l.
nn::Tensor forecast_graph(nn::Graph& g, FusionModel& m, std::span<const double> history_norm, const TextInput* text);

/// Forecast in mmHg. Throws std::invalid_argument when history length != l.
std::vector<double> forecast(std::span<const double> history_mmhg, const TextInput* text, FusionModel& m);

std::vector<double> normalize(std::span<const double> x, const ModelConfig& c);
std::vector<double> denormalize(std::span<const double> x, const ModelConfig& c);

void save_model(const std::filesystem::path& path, const FusionModel& m, const nlohmann::json& extra = {});
FusionModel load_model(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

}  // namespace iohfuse::fusemodel
