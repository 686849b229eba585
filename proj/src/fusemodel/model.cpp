#include "iohfuse/fusemodel/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"
#include "iohfuse/nn/archive.hpp"

namespace iohfuse::fusemodel {

using nn::Graph;
using nn::Matrix;
using nn::Tensor;

namespace {

constexpr const char* kArchiveKind = "fusion_model";
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string block_name(std::size_t b, const char* leaf) { return "block" + std::to_string(b) + "." + leaf; }

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

/// Every parameter draws from its own stream so regrouping never shifts the
/// values of another group.
void init_param(nn::Parameter& p, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, p.name));
  const std::string& n = p.name;
  if (ends_with(n, ".g")) {
    nn::init_constant(p, 1.0);
  } else if (ends_with(n, ".b") || ends_with(n, "b1") || ends_with(n, "b2")) {
    nn::init_constant(p, 0.0);
  } else if (ends_with(n, "pos") || ends_with(n, "embed") || n == "mask_token") {
    nn::init_normal(p, rng, 0.02);
  } else {
    nn::init_linear(p, rng);
  }
}

Tensor linear(Graph& g, nn::ParamSet& P, Tensor x, const std::string& w, const std::string& b) {
  return g.add_row(g.matmul(x, g.param(P.get(w))), g.param(P.get(b)));
}

Tensor affine_norm(Graph& g, nn::ParamSet& P, Tensor x, const std::string& prefix) {
  return g.add_row(g.mul_row(g.layer_norm(x), g.param(P.get(prefix + ".g"))), g.param(P.get(prefix + ".b")));
}

/// Multi-head attention with an additive penalty shared across heads.
Tensor multi_head(Graph& g, Tensor q, Tensor k, Tensor v, std::size_t heads, const Matrix& penalty) {
  const std::size_t d = q.cols();
  const std::size_t dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = heads == 1 ? q : g.slice_cols(q, h * dh, dh);
    Tensor kh = heads == 1 ? k : g.slice_cols(k, h * dh, dh);
    Tensor vh = heads == 1 ? v : g.slice_cols(v, h * dh, dh);
    Tensor w = g.softmax_rows(g.scale(g.matmul_nt(qh, kh), inv), &penalty);
    outs.push_back(g.matmul(w, vh));
  }
  return heads == 1 ? outs.front() : g.concat_cols(outs);
}

Matrix row_mask(std::span<const std::uint8_t> keep, std::size_t cols) {
  Matrix m(keep.size(), cols);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (keep[r]) std::fill_n(m.data.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, 1.0);
  }
  return m;
}

}  // namespace

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> v;
  if (p == 0) v.emplace_back("model.p must be >= 1");
  if (d == 0) v.emplace_back("model.d must be >= 1");
  if (n_heads == 0 || (d > 0 && d % n_heads != 0)) v.emplace_back("model.n_heads must divide model.d");
  if (l == 0 || t == 0) v.emplace_back("model.l and model.t must be >= 1");
  if (p > 0 && l % p != 0) v.emplace_back("model.l must be divisible by model.p");
  if (p > 0 && (l + t) % p != 0) v.emplace_back("model.l + model.t must be divisible by model.p");
  if (!(R >= 0.0 && R < 1.0)) v.emplace_back("model.R must be in [0, 1)");
  if (!(lambda > 0.0)) v.emplace_back("model.lambda must be > 0");
  if (mlp_ratio == 0) v.emplace_back("model.mlp_ratio must be >= 1");
  if (!(norm_scale > 0.0)) v.emplace_back("model.norm_scale must be > 0");
  if (use_text) {
    if (eta == 0) v.emplace_back("model.eta must be >= 1 with text enabled");
    if (vocab_size < 2) v.emplace_back("model.vocab_size must be >= 2 with text enabled");
  }
  if (p > 0 && (use_text ? eta : 0) + (l + t) / p > max_seq_len) {
    v.emplace_back("model.max_seq_len is shorter than eta + (l + t) / p");
  }
  return v;
}

void ModelConfig::validate() const {
  if (auto v = violations(); !v.empty()) throw ValidationError(std::move(v));
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"p", c.p},
          {"d", c.d},
          {"E", c.E},
          {"n_heads", c.n_heads},
          {"eta", c.eta},
          {"lambda", c.lambda},
          {"R", c.R},
          {"l", c.l},
          {"t", c.t},
          {"vocab_size", c.vocab_size},
          {"use_text", c.use_text},
          {"mlp_ratio", c.mlp_ratio},
          {"max_seq_len", c.max_seq_len},
          {"norm_center", c.norm_center},
          {"norm_scale", c.norm_scale}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.p = j.value("p", c.p);
  c.d = j.value("d", c.d);
  c.E = j.value("E", c.E);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.eta = j.value("eta", c.eta);
  c.lambda = j.value("lambda", c.lambda);
  c.R = j.value("R", c.R);
  c.l = j.value("l", c.l);
  c.t = j.value("t", c.t);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.use_text = j.value("use_text", c.use_text);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.norm_center = j.value("norm_center", c.norm_center);
  c.norm_scale = j.value("norm_scale", c.norm_scale);
  return c;
}

FusionModel::FusionModel(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
  cfg.validate();
  const std::size_t d = cfg.d;
  const std::size_t hidden = cfg.mlp_ratio * d;
  params.add("series.patch.w", cfg.p, d);
  params.add("series.patch.b", 1, d);
  params.add("series.pos", cfg.n_pretrain(), d);
  params.add("mask_token", 1, d);
  if (cfg.use_text) {
    params.add("text.embed", cfg.vocab_size, d);
    params.add("text.pos", cfg.eta, d);
    for (const char* w : {"xattn.wq", "xattn.wk", "xattn.wv", "xattn.wo"}) params.add(w, d, d);
  }
  for (std::size_t b = 0; b < cfg.E; ++b) {
    params.add(block_name(b, "ln1.g"), 1, d);
    params.add(block_name(b, "ln1.b"), 1, d);
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) params.add(block_name(b, w), d, d);
    params.add(block_name(b, "ln2.g"), 1, d);
    params.add(block_name(b, "ln2.b"), 1, d);
    params.add(block_name(b, "mlp.w1"), d, hidden);
    params.add(block_name(b, "mlp.b1"), 1, hidden);
    params.add(block_name(b, "mlp.w2"), hidden, d);
    params.add(block_name(b, "mlp.b2"), 1, d);
  }
  params.add("lnf.g", 1, d);
  params.add("lnf.b", 1, d);
  params.add("head.recon.w", d, cfg.p);
  params.add("head.recon.b", 1, cfg.p);
  params.add("head.forecast.w", cfg.n_history() * d, cfg.t);
  params.add("head.forecast.b", 1, cfg.t);
  for (auto* p : params.all()) init_param(*p, seed);
}

void FusionModel::init_group(const std::string& prefix, std::uint64_t seed) {
  for (auto* p : params.with_prefix(prefix)) init_param(*p, seed);
}

void FusionModel::reinit_series_and_heads(std::uint64_t seed) {
  init_group("series.", seed);
  init_group("head.", seed);
}

std::size_t FusionModel::text_param_count() const {
  std::size_t n = 0;
  for (const auto* p : params.all()) {
    if (starts_with(p->name, "text.") || starts_with(p->name, "xattn.")) n += p->value.data.size();
  }
  return n;
}

std::size_t FusionModel::series_param_count() const {
  std::size_t n = 0;
  for (const auto* p : params.all()) {
    if (starts_with(p->name, "series.")) n += p->value.data.size();
  }
  return n;
}

Matrix patchify(std::span<const double> series, std::size_t p) {
  if (p == 0 || series.empty() || series.size() % p != 0) {
    throw std::invalid_argument("patchify: length " + std::to_string(series.size()) + " is not a positive multiple of " +
                                std::to_string(p));
  }
  return Matrix(series.size() / p, p, std::vector<double>(series.begin(), series.end()));
}

std::vector<double> pad_to_multiple(std::span<const double> series, std::size_t p) {
  if (p == 0 || series.empty()) throw std::invalid_argument("pad_to_multiple: empty series or p == 0");
  std::vector<double> out(series.begin(), series.end());
  while (out.size() % p != 0) out.push_back(series.back());
  return out;
}

Tensor embed_patches(Graph& g, FusionModel& m, Tensor patches) {
  auto& P = m.params;
  const std::size_t n_s = patches.rows();
  const auto& pos = P.get("series.pos");
  if (n_s > pos.value.rows) throw std::invalid_argument("embed_patches: more patches than positional rows");
  if (patches.cols() != m.config.p) throw std::invalid_argument("embed_patches: patch width differs from p");
  Tensor tokens = linear(g, P, patches, "series.patch.w", "series.patch.b");
  Tensor pe = g.param(P.get("series.pos"));
  if (n_s < pos.value.rows) pe = g.slice_rows(pe, 0, n_s);
  return g.add(tokens, pe);
}

std::vector<std::size_t> choose_mask_positions(std::size_t n, double R, std::uint64_t seed) {
  if (!(R >= 0.0 && R < 1.0)) throw std::invalid_argument("choose_mask_positions: R must be in [0, 1)");
  const auto k = static_cast<std::size_t>(std::llround(R * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Tensor mask_tokens(Graph& g, FusionModel& m, Tensor tokens, std::span<const std::size_t> positions) {
  if (positions.empty()) return tokens;
  return g.replace_rows(tokens, positions, g.param(m.params.get("mask_token")));
}

Matrix build_attention_mask(std::span<const std::uint8_t> m, std::size_t n_s) {
  Matrix M(n_s, m.size());
  for (std::size_t r = 0; r < n_s; ++r) {
    for (std::size_t c = 0; c < m.size(); ++c) M(r, c) = m[c] ? 0.0 : 1.0;
  }
  return M;
}

Tensor penalized_attention(Graph& g, Tensor q, Tensor k, Tensor v, const Matrix& flags, double lambda) {
  if (flags.rows != q.rows() || flags.cols != k.rows()) {
    throw std::invalid_argument("penalized_attention: flags " + flags.shape_string() + " do not match logits");
  }
  Matrix penalty(flags.rows, flags.cols);
  std::vector<std::uint8_t> live(flags.rows, 0);
  for (std::size_t r = 0; r < flags.rows; ++r) {
    for (std::size_t c = 0; c < flags.cols; ++c) {
      const bool flagged = flags(r, c) != 0.0;
      penalty(r, c) = flagged ? lambda : 0.0;
      if (!flagged) live[r] = 1;
    }
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor w = g.softmax_rows(g.scale(g.matmul_nt(q, k), inv), &penalty);
  Tensor out = g.matmul(w, v);
  if (std::all_of(live.begin(), live.end(), [](std::uint8_t x) { return x != 0; })) return out;
  return g.mul_const(out, row_mask(live, out.cols()));
}

Tensor masked_cross_attention(Graph& g, FusionModel& m, Tensor text_tokens, Tensor series_tokens, const Matrix& M) {
  auto& P = m.params;
  if (M.rows != series_tokens.rows() || M.cols != text_tokens.rows()) {
    throw std::invalid_argument("masked_cross_attention: mask " + M.shape_string() + " does not match tokens");
  }
  Matrix flags(M.cols, M.rows);
  for (std::size_t r = 0; r < M.rows; ++r) {
    for (std::size_t c = 0; c < M.cols; ++c) flags(c, r) = M(r, c);
  }
  Tensor q = g.matmul(text_tokens, g.param(P.get("xattn.wq")));
  Tensor k = g.matmul(series_tokens, g.param(P.get("xattn.wk")));
  Tensor v = g.matmul(series_tokens, g.param(P.get("xattn.wv")));
  Tensor a = penalized_attention(g, q, k, v, flags, m.config.lambda);
  return g.matmul(a, g.param(P.get("xattn.wo")));
}

Tensor embed_text(Graph& g, FusionModel& m, const TextInput& text) {
  const auto& c = m.config;
  if (!c.use_text) throw std::logic_error("embed_text: model has no text pathway");
  if (text.ids.size() != c.eta || text.mask.size() != c.eta) {
    throw std::invalid_argument("embed_text: expected " + std::to_string(c.eta) + " token ids and mask entries");
  }
  for (std::size_t id : text.ids) {
    if (id >= c.vocab_size) throw std::invalid_argument("embed_text: token id " + std::to_string(id) + " out of vocabulary");
  }
  Tensor e = g.gather_rows(g.param(m.params.get("text.embed")), text.ids);
  return g.add(e, g.param(m.params.get("text.pos")));
}

Tensor fuse_text(Graph& g, FusionModel& m, Tensor series_tokens, const TextInput& text) {
  Tensor T = embed_text(g, m, text);
  const Matrix M = build_attention_mask(text.mask, series_tokens.rows());
  Tensor fused = g.add(T, masked_cross_attention(g, m, T, series_tokens, M));
  return g.mul_const(fused, row_mask(text.mask, fused.cols()));
}

Tensor backbone(Graph& g, FusionModel& m, Tensor x, std::span<const std::uint8_t> key_valid) {
  const auto& c = m.config;
  auto& P = m.params;
  const std::size_t n = x.rows();
  if (n > c.max_seq_len) {
    throw std::invalid_argument("backbone: sequence length " + std::to_string(n) + " exceeds max_seq_len " +
                                std::to_string(c.max_seq_len));
  }
  if (!key_valid.empty() && key_valid.size() != n) throw std::invalid_argument("backbone: key mask length differs");
  Matrix penalty(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool blocked = j > i || (j != i && !key_valid.empty() && !key_valid[j]);
      penalty(i, j) = blocked ? kInf : 0.0;
    }
  }
  for (std::size_t b = 0; b < c.E; ++b) {
    Tensor h = affine_norm(g, P, x, block_name(b, "ln1"));
    Tensor q = g.matmul(h, g.param(P.get(block_name(b, "attn.wq"))));
    Tensor k = g.matmul(h, g.param(P.get(block_name(b, "attn.wk"))));
    Tensor v = g.matmul(h, g.param(P.get(block_name(b, "attn.wv"))));
    Tensor a = multi_head(g, q, k, v, c.n_heads, penalty);
    x = g.add(x, g.matmul(a, g.param(P.get(block_name(b, "attn.wo")))));
    h = affine_norm(g, P, x, block_name(b, "ln2"));
    h = g.gelu(linear(g, P, h, block_name(b, "mlp.w1"), block_name(b, "mlp.b1")));
    x = g.add(x, linear(g, P, h, block_name(b, "mlp.w2"), block_name(b, "mlp.b2")));
  }
  return affine_norm(g, P, x, "lnf");
}

Tensor encode_series(Graph& g, FusionModel& m, std::span<const double> window_norm, const TextInput* text,
                     std::span<const std::size_t> masked) {
  const auto& c = m.config;
  Tensor s = embed_patches(g, m, g.constant(patchify(window_norm, c.p)));
  const std::size_t n_s = s.rows();
  for (std::size_t i : masked) {
    if (i >= n_s) throw std::invalid_argument("encode_series: masked position out of range");
  }
  s = mask_tokens(g, m, s, masked);
  if (!c.use_text) return backbone(g, m, s, {});
  if (!text) throw std::invalid_argument("encode_series: model expects a text input");
  Tensor fused = fuse_text(g, m, s, *text);
  std::vector<std::uint8_t> valid(text->mask.begin(), text->mask.end());
  valid.resize(c.eta + n_s, 1);
  Tensor h = backbone(g, m, g.concat_rows(fused, s), valid);
  return g.slice_rows(h, c.eta, n_s);
}

Tensor project_reconstruction(Graph& g, FusionModel& m, Tensor series_hidden) {
  return linear(g, m.params, series_hidden, "head.recon.w", "head.recon.b");
}

Tensor pretrain_loss(Graph& g, FusionModel& m, std::span<const double> window_norm, const TextInput* text,
                     std::span<const std::size_t> masked) {
  const auto& c = m.config;
  if (window_norm.size() != c.l + c.t) {
    throw std::invalid_argument("pretrain_loss: window length " + std::to_string(window_norm.size()) + " != l + t");
  }
  Tensor recon = project_reconstruction(g, m, encode_series(g, m, window_norm, text, masked));
  const Matrix target = patchify(window_norm, c.p);
  Matrix w(target.rows, target.cols);
  if (!masked.empty()) {
    const double wt = 1.0 / static_cast<double>(masked.size() * c.p);
    for (std::size_t r : masked) std::fill_n(w.data.begin() + static_cast<std::ptrdiff_t>(r * c.p), c.p, wt);
  }
  return g.weighted_sq_error(recon, target, w);
}

Tensor forecast_graph(Graph& g, FusionModel& m, std::span<const double> history_norm, const TextInput* text) {
  const auto& c = m.config;
  if (history_norm.size() != c.l) {
    throw std::invalid_argument("forecast: history length " + std::to_string(history_norm.size()) + " != l = " +
                                std::to_string(c.l));
  }
  Tensor h = encode_series(g, m, history_norm, text);
  Tensor flat = g.reshape(h, 1, h.rows() * h.cols());
  return linear(g, m.params, flat, "head.forecast.w", "head.forecast.b");
}

std::vector<double> forecast(std::span<const double> history_mmhg, const TextInput* text, FusionModel& m) {
  Graph g(false);
  const auto hn = normalize(history_mmhg, m.config);
  Tensor y = forecast_graph(g, m, hn, text);
  return denormalize(y.value().data, m.config);
}

std::vector<double> normalize(std::span<const double> x, const ModelConfig& c) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - c.norm_center) / c.norm_scale;
  return out;
}

std::vector<double> denormalize(std::span<const double> x, const ModelConfig& c) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * c.norm_scale + c.norm_center;
  return out;
}

void save_model(const std::filesystem::path& path, const FusionModel& m, const nlohmann::json& extra) {
  nn::Archive a;
  a.kind = kArchiveKind;
  a.meta = {{"config", to_json(m.config)}, {"extra", extra.is_null() ? nlohmann::json::object() : extra}};
  nn::append_params(a, m.params);
  nn::write_archive(path, a);
}

FusionModel load_model(const std::filesystem::path& path, nlohmann::json* extra) {
  const nn::Archive a = nn::read_archive(path);
  if (a.kind != kArchiveKind) throw SchemaError("checkpoint kind '" + a.kind + "' is not a fusion model");
  FusionModel m(model_config_from_json(a.meta.at("config")), 0);
  nn::load_params(a, m.params);
  if (extra) *extra = a.meta.value("extra", nlohmann::json::object());
  return m;
}

}  // namespace iohfuse::fusemodel
