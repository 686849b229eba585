#include "iohfuse/mtrda/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"
#include "iohfuse/nn/adam.hpp"
#include "iohfuse/nn/archive.hpp"

namespace iohfuse::mtrda {

using nn::Graph;
using nn::Matrix;
using nn::Tensor;

namespace {

std::string block_name(std::size_t b, const char* leaf) { return "block" + std::to_string(b) + "." + leaf; }

Matrix column(std::span<const double> v) { return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end())); }

}  // namespace

std::vector<std::string> DenoiserConfig::violations() const {
  std::vector<std::string> v;
  if (l == 0) v.emplace_back("denoiser.l must be > 0");
  if (width < 2 || width % 2 != 0) v.emplace_back("denoiser.width must be even and >= 2");
  if (!(trend_scale > 0.0)) v.emplace_back("denoiser.trend_scale must be > 0");
  return v;
}

nlohmann::json to_json(const DenoiserConfig& c) {
  return {{"l", c.l},
          {"width", c.width},
          {"blocks", c.blocks},
          {"condition_on_trend", c.condition_on_trend},
          {"trend_center", c.trend_center},
          {"trend_scale", c.trend_scale}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  c.l = j.value("l", c.l);
  c.width = j.value("width", c.width);
  c.blocks = j.value("blocks", c.blocks);
  c.condition_on_trend = j.value("condition_on_trend", c.condition_on_trend);
  c.trend_center = j.value("trend_center", c.trend_center);
  c.trend_scale = j.value("trend_scale", c.trend_scale);
  return c;
}

Denoiser::Denoiser(const DenoiserConfig& cfg, std::uint64_t seed) : config(cfg) {
  if (auto v = cfg.violations(); !v.empty()) throw ValidationError(std::move(v));
  std::mt19937_64 rng(derive_seed(seed, "denoiser"));
  const std::size_t D = cfg.width;
  const std::size_t cin = cfg.condition_on_trend ? 2 : 1;
  nn::init_linear(params.add("in.w", cin, D), rng);
  nn::init_constant(params.add("in.b", 1, D), 0.0);
  nn::init_normal(params.add("pos", cfg.l, D), rng, 0.02);
  nn::init_linear(params.add("step.w1", D, D), rng);
  nn::init_constant(params.add("step.b1", 1, D), 0.0);
  nn::init_linear(params.add("step.w2", D, D), rng);
  nn::init_constant(params.add("step.b2", 1, D), 0.0);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    nn::init_normal(params.add(block_name(b, "ada.w"), D, 2 * D), rng, 0.02);
    nn::init_constant(params.add(block_name(b, "ada.b"), 1, 2 * D), 0.0);
    nn::init_linear(params.add(block_name(b, "wc"), D, D), rng);
    nn::init_constant(params.add(block_name(b, "bc"), 1, D), 0.0);
    nn::init_linear(params.add(block_name(b, "wt"), cfg.l, cfg.l), rng);
  }
  nn::init_linear(params.add("out.w", D, 1), rng);
  nn::init_constant(params.add("out.b", 1, 1), 0.0);
}

Matrix step_embedding(std::size_t k, std::size_t dim) {
  Matrix e(1, dim);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    e(0, i) = std::sin(static_cast<double>(k) * freq);
    e(0, half + i) = std::cos(static_cast<double>(k) * freq);
  }
  return e;
}

Tensor denoiser_graph(Graph& g, Denoiser& model, const Matrix& x_k, std::size_t k, const Matrix* trend) {
  const auto& cfg = model.config;
  auto& P = model.params;
  if (x_k.rows != cfg.l || x_k.cols != 1) {
    throw std::invalid_argument("denoiser: expected " + std::to_string(cfg.l) + " x 1 input, got " + x_k.shape_string());
  }
  const std::size_t D = cfg.width;
  Matrix input = x_k;
  if (cfg.condition_on_trend) {
    if (!trend || trend->rows != cfg.l) throw std::invalid_argument("denoiser: trend conditioning needs an l x 1 trend");
    input = Matrix(cfg.l, 2);
    for (std::size_t i = 0; i < cfg.l; ++i) {
      input(i, 0) = x_k(i, 0);
      input(i, 1) = ((*trend)(i, 0) - cfg.trend_center) / cfg.trend_scale;
    }
  }
  Tensor h = g.add(g.add_row(g.matmul(g.constant(std::move(input)), g.param(P.get("in.w"))), g.param(P.get("in.b"))),
                   g.param(P.get("pos")));
  Tensor c = g.constant(step_embedding(k, D));
  c = g.silu(g.add_row(g.matmul(c, g.param(P.get("step.w1"))), g.param(P.get("step.b1"))));
  c = g.add_row(g.matmul(c, g.param(P.get("step.w2"))), g.param(P.get("step.b2")));
  Tensor act = g.silu(c);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    Tensor mod = g.add_row(g.matmul(act, g.param(P.get(block_name(b, "ada.w")))), g.param(P.get(block_name(b, "ada.b"))));
    Tensor scale = g.add_scalar(g.slice_cols(mod, 0, D), 1.0);
    Tensor shift = g.slice_cols(mod, D, D);
    Tensor u = g.add_row(g.mul_row(g.layer_norm(h), scale), shift);
    Tensor z = g.gelu(g.add_row(g.matmul(u, g.param(P.get(block_name(b, "wc")))), g.param(P.get(block_name(b, "bc")))));
    h = g.add(h, g.matmul(g.param(P.get(block_name(b, "wt"))), z));
  }
  return g.add_row(g.matmul(g.layer_norm(h), g.param(P.get("out.w"))), g.param(P.get("out.b")));
}

std::vector<double> denoiser_forward(std::span<const double> x_k, std::size_t k, Denoiser& model,
                                     std::span<const double> trend) {
  if (x_k.size() != model.config.l) throw std::invalid_argument("denoiser_forward: input length differs from l");
  Graph g(false);
  const Matrix tr = column(trend);
  Tensor y = denoiser_graph(g, model, column(x_k), k, trend.empty() ? nullptr : &tr);
  return y.value().data;
}

Tensor denoiser_loss(Graph& g, Denoiser& model, std::span<const double> x0, std::size_t k,
                     std::span<const double> eps, const DiffusionSchedule& schedule, std::span<const double> trend) {
  const auto xk = diffuse_forward(x0, k, eps, schedule);
  const Matrix tr = column(trend);
  Tensor pred = denoiser_graph(g, model, column(xk), k, trend.empty() ? nullptr : &tr);
  Matrix w(x0.size(), 1, 1.0 / static_cast<double>(x0.size()));
  return g.weighted_sq_error(pred, column(x0), w);
}

DenoiserTrainResult train_denoiser(Denoiser& model, std::span<const DenoiserSample> data,
                                   const DiffusionSchedule& schedule, const DenoiserTrainConfig& cfg,
                                   const std::function<void(std::size_t, double)>& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train_denoiser: empty residual dataset");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_denoiser: batch_size must be >= 1");
  const std::size_t l = model.config.l;
  for (const auto& s : data) {
    if (s.residual.size() != l) throw std::invalid_argument("train_denoiser: residual length differs from l");
  }
  model.residual_scale = 1.0;
  if (cfg.standardize) {
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& s : data) {
      for (double r : s.residual) ss += r * r;
      n += s.residual.size();
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    model.residual_scale = sd > 1e-12 ? sd : 1.0;
  }

  nn::AdamConfig acfg;
  acfg.clip_norm = cfg.clip_norm;
  nn::Adam opt(model.params.all(), acfg);
  std::mt19937_64 rng(derive_seed(cfg.seed, "denoiser-train"));
  std::uniform_int_distribution<std::size_t> kdist(1, schedule.K);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  DenoiserTrainResult result;
  std::vector<double> x0(l), eps(l);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data[order[i]];
        for (std::size_t t = 0; t < l; ++t) {
          x0[t] = s.residual[t] / model.residual_scale;
          eps[t] = gauss(rng);
        }
        const std::size_t k = kdist(rng);
        Graph g;
        Tensor loss = denoiser_loss(g, model, x0, k, eps, schedule, s.trend);
        const double v = loss.value()(0, 0);
        if (!std::isfinite(v)) {
          throw DivergenceError("denoiser loss became non-finite at epoch " + std::to_string(epoch + 1));
        }
        total += v;
        g.backward(loss);
      }
      opt.step(cfg.learning_rate, 1.0 / static_cast<double>(end - start));
    }
    const double mean = total / static_cast<double>(order.size());
    result.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

std::vector<std::vector<double>> sample_augmented(std::span<const double> trend, Denoiser& model,
                                                  const DiffusionSchedule& schedule, std::size_t H,
                                                  std::uint64_t seed, SampleOptions opts) {
  const std::size_t l = model.config.l;
  if (trend.size() != l) throw std::invalid_argument("sample_augmented: trend length differs from l");
  std::vector<std::vector<double>> out;
  out.reserve(H);
  std::mt19937_64 rng(derive_seed(seed, "sample"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::span<const double> cond = model.config.condition_on_trend ? trend : std::span<const double>{};
  const std::size_t K = schedule.K;
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<double> x(l);
    for (auto& v : x) v = gauss(rng);
    if (opts.single_shot) {
      x = denoiser_forward(x, K, model, cond);
    } else {
      for (std::size_t k = K; k >= 1; --k) {
        const auto x0 = denoiser_forward(x, k, model, cond);
        if (k == 1) {
          x = x0;
          break;
        }
        const double ab = schedule.alpha_bar[k];
        const double ab_prev = schedule.alpha_bar[k - 1];
        const double beta = schedule.beta_at(k);
        const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
        const double ck = std::sqrt(schedule.alpha_at(k)) * (1.0 - ab_prev) / (1.0 - ab);
        const double sd = std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta);
        for (std::size_t t = 0; t < l; ++t) x[t] = c0 * x0[t] + ck * x[t] + sd * gauss(rng);
      }
    }
    for (std::size_t t = 0; t < l; ++t) x[t] = trend[t] + model.residual_scale * x[t];
    out.push_back(std::move(x));
  }
  return out;
}

void save_denoiser(const std::filesystem::path& path, const Denoiser& model, const DiffusionSchedule& schedule) {
  nn::Archive a;
  a.kind = "denoiser";
  a.meta = {{"config", to_json(model.config)},
            {"residual_scale", model.residual_scale},
            {"schedule", {{"K", schedule.K}, {"beta", schedule.beta}}}};
  nn::append_params(a, model.params);
  nn::write_archive(path, a);
}

Denoiser load_denoiser(const std::filesystem::path& path, DiffusionSchedule* schedule) {
  const auto a = nn::read_archive(path);
  if (a.kind != "denoiser") throw SchemaError(path.string() + " is a '" + a.kind + "' archive, not a denoiser");
  Denoiser m(denoiser_config_from_json(a.meta.at("config")), 0);
  m.residual_scale = a.meta.at("residual_scale").get<double>();
  nn::load_params(a, m.params);
  if (schedule) {
    const auto beta = a.meta.at("schedule").at("beta").get<std::vector<double>>();
    DiffusionSchedule s;
    s.K = beta.size();
    s.beta = beta;
    s.alpha.resize(s.K);
    s.alpha_bar.assign(s.K + 1, 1.0);
    for (std::size_t k = 1; k <= s.K; ++k) {
      s.alpha[k - 1] = 1.0 - beta[k - 1];
      s.alpha_bar[k] = s.alpha_bar[k - 1] * s.alpha[k - 1];
    }
    *schedule = std::move(s);
  }
  return m;
}

}  // namespace iohfuse::mtrda
