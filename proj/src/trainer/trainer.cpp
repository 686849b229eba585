#include "iohfuse/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"
#include "iohfuse/core/textio.hpp"
#include "iohfuse/nn/archive.hpp"

namespace iohfuse::trainer {

using fusemodel::FusionModel;
using nn::Graph;
using nn::Matrix;
using nn::Tensor;

namespace {

constexpr const char* kCheckpointKind = "fusion_model";
constexpr const char* kFirstMoment = "adam.m.";
constexpr const char* kSecondMoment = "adam.v.";

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

const fusemodel::TextInput* text_of(const FusionModel& m, const Sample& s) {
  return m.config.use_text ? &s.text : nullptr;
}

std::vector<std::uint8_t> loss_mask(const Sample& s, const TrainConfig& cfg) {
  if (!cfg.strict_ioh_mask) return s.ioh_mask;
  std::vector<std::uint8_t> m(s.target.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = s.target[i] < cohort::kIohThresholdMmHg ? 1 : 0;
  return m;
}

Tensor pretrain_sample_loss(Graph& g, FusionModel& m, const Sample& s, std::uint64_t seed, std::size_t epoch) {
  const auto window = fusemodel::normalize(concat(s.history, s.target), m.config);
  const auto masked = pretrain_mask(m.config, seed, s.id, epoch);
  return fusemodel::pretrain_loss(g, m, window, text_of(m, s), masked);
}

Tensor finetune_sample_loss(Graph& g, FusionModel& m, const Sample& s, const TrainConfig& cfg) {
  const auto hist = fusemodel::normalize(s.history, m.config);
  const auto target = fusemodel::normalize(s.target, m.config);
  Tensor pred = fusemodel::forecast_graph(g, m, hist, text_of(m, s));
  return ioh_loss_graph(g, pred, target, loss_mask(s, cfg), cfg.rho);
}

std::string stage_label(Stage s) { return std::string(to_string(s)); }

using SampleLoss = std::function<Tensor(Graph&, const Sample&, std::size_t epoch)>;
using EvalLoss = std::function<double()>;

TrainResult run_loop(FusionModel& model, std::span<const Sample> train, std::span<const Sample> val,
                     const TrainConfig& cfg, const TrainHooks& hooks, const SampleLoss& loss_of,
                     const EvalLoss& eval) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument(stage_label(cfg.stage) + ": empty training set");
  nn::AdamConfig acfg;
  acfg.clip_norm = cfg.clip_norm;
  nn::Adam opt(model.params.all(), acfg);
  std::mt19937_64 rng(derive_seed(cfg.seed, "order:" + stage_label(cfg.stage)));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Matrix> best = model.params.snapshot();
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  auto diverge = [&](std::size_t epoch, const char* what) {
    model.params.restore(best);
    throw DivergenceError(stage_label(cfg.stage) + " " + what + " became non-finite at epoch " + std::to_string(epoch));
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        Graph g;
        Tensor loss = loss_of(g, train[order[i]], epoch);
        const double v = loss.value()(0, 0);
        if (!std::isfinite(v)) diverge(epoch, "training loss");
        total += v;
        g.backward(loss);
      }
      const double norm = opt.step(lr, 1.0 / static_cast<double>(end - start));
      if (!std::isfinite(norm)) diverge(epoch, "gradient norm");
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = cfg.stage;
    rec.lr = lr;
    rec.train_loss = total / static_cast<double>(train.size());
    rec.val_loss = val.empty() ? rec.train_loss : eval();
    if (!std::isfinite(rec.val_loss)) diverge(epoch, "validation loss");
    result.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      best = model.params.snapshot();
      result.best_epoch = epoch;
      since_best = 0;
      if (hooks.checkpoint_path) {
        CheckpointMeta meta{cfg.stage, epoch, to_json(cfg), result.history};
        save_checkpoint(*hooks.checkpoint_path, model, &opt, meta);
      }
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  model.params.restore(best);
  result.best_val_loss = best_loss;
  result.optimizer_steps = opt.steps();
  return result;
}

}  // namespace

std::string_view to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

Stage parse_stage(std::string_view s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "finetune") return Stage::finetune;
  throw std::invalid_argument("unknown stage '" + std::string(s) + "' (expected pretrain or finetune)");
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::full:
      return "full";
    case Ablation::no_text:
      return "no_text";
    case Ablation::no_vocab_ext:
      return "no_vocab_ext";
    case Ablation::no_augmentation:
      return "no_augmentation";
    case Ablation::no_pretrain:
      return "no_pretrain";
  }
  return "full";
}

Ablation parse_ablation(std::string_view s) {
  for (Ablation a : {Ablation::full, Ablation::no_text, Ablation::no_vocab_ext, Ablation::no_augmentation,
                     Ablation::no_pretrain}) {
    if (s == to_string(a)) return a;
  }
  throw std::invalid_argument("unknown ablation '" + std::string(s) +
                              "' (expected full, no_text, no_vocab_ext, no_augmentation or no_pretrain)");
}

StageToggles toggles_for(Ablation a) {
  StageToggles t;
  t.use_text = a != Ablation::no_text;
  t.domain_terms = a != Ablation::no_vocab_ext;
  t.augmentation = a != Ablation::no_augmentation;
  t.pretrain = a != Ablation::no_pretrain;
  return t;
}

TrainConfig TrainConfig::defaults_for(Stage s) {
  TrainConfig c;
  c.stage = s;
  c.batch_size = s == Stage::pretrain ? 4 : 8;
  return c;
}

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> v;
  const std::string p = "train." + stage_label(stage) + ".";
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) v.push_back(p + "learning_rate must be > 0");
  if (!(decay_factor > 0.0) || decay_factor > 1.0) v.push_back(p + "decay_factor must be in (0, 1]");
  if (batch_size == 0) v.push_back(p + "batch_size must be >= 1");
  if (!(rho >= 0.0)) v.push_back(p + "rho must be >= 0");
  if (clip_norm < 0.0) v.push_back(p + "clip_norm must be >= 0");
  return v;
}

void TrainConfig::validate() const {
  if (auto v = violations(); !v.empty()) throw ValidationError(std::move(v));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"stage", to_string(c.stage)},
          {"learning_rate", c.learning_rate},
          {"decay_factor", c.decay_factor},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"rho", c.rho},
          {"seed", c.seed},
          {"ablation", to_string(c.ablation)},
          {"patience", c.patience},
          {"clip_norm", c.clip_norm},
          {"strict_ioh_mask", c.strict_ioh_mask}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, Stage stage) {
  TrainConfig c = TrainConfig::defaults_for(stage);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.rho = j.value("rho", c.rho);
  c.seed = j.value("seed", c.seed);
  if (j.contains("ablation")) c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  c.patience = j.value("patience", c.patience);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.strict_ioh_mask = j.value("strict_ioh_mask", c.strict_ioh_mask);
  return c;
}

double learning_rate_after(const TrainConfig& c, std::size_t completed_epochs) {
  return c.learning_rate * std::pow(c.decay_factor, static_cast<double>(completed_epochs));
}

double learning_rate_at(const TrainConfig& c, std::size_t epoch) {
  if (epoch == 0) throw std::invalid_argument("learning_rate_at: epochs are 1-based");
  return learning_rate_after(c, epoch - 1);
}

std::vector<Sample> make_samples(std::span<const cohort::ForecastInstance> xs,
                                 const std::map<std::string, fusemodel::TextInput>& text_by_patient, std::size_t eta) {
  std::vector<Sample> out;
  out.reserve(xs.size());
  fusemodel::TextInput blank{std::vector<std::size_t>(eta, 0), std::vector<std::uint8_t>(eta, 0)};
  for (const auto& x : xs) {
    Sample s{x.id, x.history, x.target, x.ioh_mask, blank};
    if (auto it = text_by_patient.find(x.patient_id); it != text_by_patient.end()) s.text = it->second;
    out.push_back(std::move(s));
  }
  return out;
}

double compute_ioh_loss(std::span<const double> pred, std::span<const double> target,
                        std::span<const std::uint8_t> ioh_mask, double rho) {
  if (pred.size() != target.size() || pred.size() != ioh_mask.size()) {
    throw std::invalid_argument("compute_ioh_loss: pred, target and mask lengths differ");
  }
  double s0 = 0.0, s1 = 0.0;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = (pred[i] - target[i]) * (pred[i] - target[i]);
    if (ioh_mask[i]) {
      s1 += e;
      ++n1;
    } else {
      s0 += e;
      ++n0;
    }
  }
  const double normal = n0 ? s0 / static_cast<double>(n0) : 0.0;
  const double ioh = n1 ? s1 / static_cast<double>(n1) : 0.0;
  return normal + rho * ioh;
}

Tensor ioh_loss_graph(Graph& g, Tensor pred, std::span<const double> target, std::span<const std::uint8_t> ioh_mask,
                      double rho) {
  const std::size_t t = target.size();
  if (pred.rows() * pred.cols() != t || ioh_mask.size() != t) {
    throw std::invalid_argument("ioh_loss_graph: prediction, target and mask lengths differ");
  }
  const auto n1 = static_cast<std::size_t>(std::count_if(ioh_mask.begin(), ioh_mask.end(), [](auto m) { return m != 0; }));
  const std::size_t n0 = t - n1;
  Matrix w(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < t; ++i) {
    w.data[i] = ioh_mask[i] ? rho / static_cast<double>(n1) : 1.0 / static_cast<double>(n0);
  }
  return g.weighted_sq_error(pred, Matrix(pred.rows(), pred.cols(), std::vector<double>(target.begin(), target.end())), w);
}

std::vector<std::size_t> pretrain_mask(const fusemodel::ModelConfig& c, std::uint64_t seed, const std::string& id,
                                       std::size_t epoch) {
  return fusemodel::choose_mask_positions(c.n_pretrain(), c.R, derive_seed(seed, "mask:" + id + ":" + std::to_string(epoch)));
}

double pretrain_eval_loss(FusionModel& model, std::span<const Sample> xs, std::uint64_t seed) {
  if (xs.empty()) throw std::invalid_argument("pretrain_eval_loss: empty set");
  double total = 0.0;
  for (const auto& s : xs) {
    Graph g(false);
    total += pretrain_sample_loss(g, model, s, seed, 0).value()(0, 0);
  }
  return total / static_cast<double>(xs.size());
}

double finetune_eval_loss(FusionModel& model, std::span<const Sample> xs, const TrainConfig& cfg) {
  if (xs.empty()) throw std::invalid_argument("finetune_eval_loss: empty set");
  double total = 0.0;
  for (const auto& s : xs) {
    Graph g(false);
    total += finetune_sample_loss(g, model, s, cfg).value()(0, 0);
  }
  return total / static_cast<double>(xs.size());
}

TrainResult pretrain(FusionModel& model, std::span<const Sample> train, std::span<const Sample> val,
                     const TrainConfig& cfg, const TrainHooks& hooks) {
  if (cfg.stage != Stage::pretrain) throw std::invalid_argument("pretrain: config stage is not pretrain");
  return run_loop(
      model, train, val, cfg, hooks,
      [&](Graph& g, const Sample& s, std::size_t epoch) { return pretrain_sample_loss(g, model, s, cfg.seed, epoch); },
      [&] { return pretrain_eval_loss(model, val, cfg.seed); });
}

FusionModel prepare_finetune(const FusionModel& pretrained, const fusemodel::ModelConfig& requested,
                             std::uint64_t seed) {
  if (!(pretrained.config == requested)) {
    std::ostringstream os;
    os << "checkpoint config " << fusemodel::to_json(pretrained.config).dump() << " differs from requested "
       << fusemodel::to_json(requested).dump();
    throw std::invalid_argument(os.str());
  }
  FusionModel m(requested, seed);
  m.params.restore(pretrained.params.snapshot());
  m.reinit_series_and_heads(derive_seed(seed, "finetune-reinit"));
  return m;
}

TrainResult finetune(FusionModel& model, std::span<const Sample> train, std::span<const Sample> val,
                     const TrainConfig& cfg, const TrainHooks& hooks) {
  if (cfg.stage != Stage::finetune) throw std::invalid_argument("finetune: config stage is not finetune");
  return run_loop(
      model, train, val, cfg, hooks,
      [&](Graph& g, const Sample& s, std::size_t) { return finetune_sample_loss(g, model, s, cfg); },
      [&] { return finetune_eval_loss(model, val, cfg); });
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"stage", to_string(r.stage)},
          {"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"lr", r.lr}};
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.stage = parse_stage(j.at("stage").get<std::string>());
  r.train_loss = j.at("train_loss").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  r.lr = j.at("lr").get<double>();
  return r;
}

void save_checkpoint(const std::filesystem::path& path, const FusionModel& model, const nn::Adam* opt,
                     const CheckpointMeta& meta) {
  nn::Archive a;
  a.kind = kCheckpointKind;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : meta.history) hist.push_back(to_json(r));
  a.meta = {{"config", fusemodel::to_json(model.config)},
            {"extra",
             {{"stage", to_string(meta.stage)},
              {"epoch", meta.epoch},
              {"train_config", meta.train_config},
              {"history", hist},
              {"optimizer_steps", opt ? opt->steps() : 0}}}};
  nn::append_params(a, model.params);
  if (opt) {
    const auto params = model.params.all();
    for (std::size_t i = 0; i < params.size(); ++i) {
      a.arrays.emplace_back(kFirstMoment + params[i]->name, opt->first_moments()[i]);
      a.arrays.emplace_back(kSecondMoment + params[i]->name, opt->second_moments()[i]);
    }
  }
  nn::write_archive(path, a);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const nn::Archive a = nn::read_archive(path);
  if (a.kind != kCheckpointKind) throw SchemaError("checkpoint kind '" + a.kind + "' is not a fusion model");
  LoadedCheckpoint out{FusionModel(fusemodel::model_config_from_json(a.meta.at("config")), 0), {}, 0, {}, {}};
  nn::load_params(a, out.model.params);
  const auto extra = a.meta.value("extra", nlohmann::json::object());
  out.meta.stage = parse_stage(extra.value("stage", std::string("pretrain")));
  out.meta.epoch = extra.value("epoch", std::size_t{0});
  out.meta.train_config = extra.value("train_config", nlohmann::json::object());
  for (const auto& r : extra.value("history", nlohmann::json::array())) out.meta.history.push_back(epoch_record_from_json(r));
  out.optimizer_steps = extra.value("optimizer_steps", std::int64_t{0});
  for (const auto* p : out.model.params.all()) {
    if (!a.has_array(kFirstMoment + p->name)) {
      out.first_moments.clear();
      out.second_moments.clear();
      break;
    }
    out.first_moments.push_back(a.array(kFirstMoment + p->name));
    out.second_moments.push_back(a.array(kSecondMoment + p->name));
  }
  return out;
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochRecord> rows) {
  std::string out = "epoch,stage,train_loss,val_loss,lr\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + std::string(to_string(r.stage)) + "," + format_double(r.train_loss) + "," +
           format_double(r.val_loss) + "," + format_double(r.lr) + "\n";
  }
  write_text(path, out);
}

}  // namespace iohfuse::trainer
