#include "iohfuse/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "iohfuse/cohort/instances.hpp"
#include "iohfuse/cohort/split.hpp"
#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"
#include "iohfuse/core/textio.hpp"
#include "iohfuse/dataio/external.hpp"
#include "iohfuse/dataio/preprocess.hpp"
#include "iohfuse/dataio/store.hpp"
#include "iohfuse/dataio/synth.hpp"
#include "iohfuse/evalreport/metrics.hpp"
#include "iohfuse/mtrda/augment.hpp"
#include "iohfuse/pcdg/describe.hpp"
#include "iohfuse/pcdg/rules.hpp"
#include "iohfuse/pcdg/vocab.hpp"

namespace iohfuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRaw = "raw";
const fs::path kClean = "clean";
const fs::path kPrepared = "prepared";
const fs::path kAugment = "augment";
const fs::path kPretrain = "pretrain";
const fs::path kFinetune = "finetune";
const fs::path kEval = "eval";
const fs::path kReport = "report";
const fs::path kBench = "bench";
const fs::path kManifests = "manifests";

/// What a command touched, as paths relative to the run directory.
struct StageIO {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  json notes = json::object();
};

struct Ctx {
  PipelineConfig cfg;
  RunOptions opts;
  fs::path root;

  fs::path at(const fs::path& rel) const { return root / rel; }

  void log(const std::string& command, const std::string& msg) const {
    if (opts.log) *opts.log << "[" << command << "] " << msg << "\n";
  }

  std::shared_ptr<HttpTransport> transport(double timeout_s) const {
    return opts.transport ? opts.transport : make_http_transport(timeout_s);
  }

  void require(const fs::path& rel, const std::string& producer) const {
    if (!fs::exists(at(rel))) {
      throw PrerequisiteError("missing " + at(rel).string() + "; run `iohfuse " + producer + "` first");
    }
  }
};

std::vector<dataio::PatientStatic> read_statics(const fs::path& path) {
  std::vector<dataio::PatientStatic> out;
  std::size_t line = 0;
  for (const auto& r : read_jsonl(path)) {
    ++line;
    try {
      dataio::PatientStatic p;
      p.patient_id = r.at("patient_id").get<std::string>();
      p.age = r.at("age").get<int>();
      p.gender = dataio::parse_gender(r.at("gender").get<std::string>());
      p.surgery_type = r.at("surgery_type").get<std::string>();
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw SchemaError(path.string() + ": " + e.what(), line);
    }
  }
  return out;
}

std::map<std::string, fusemodel::TextInput> text_inputs(const fs::path& prepared, std::size_t eta) {
  const auto vocab = pcdg::Vocabulary::from_json(json::parse(read_text(prepared / "vocab.json")));
  std::map<std::string, fusemodel::TextInput> out;
  for (const auto& d : pcdg::read_corpus(prepared / "corpus.jsonl")) {
    auto tok = pcdg::tokenize_description(d.text, vocab, eta);
    out[d.patient_id] = {std::move(tok.ids), std::move(tok.mask)};
  }
  return out;
}

std::size_t vocab_size(const fs::path& prepared) {
  return pcdg::Vocabulary::from_json(json::parse(read_text(prepared / "vocab.json"))).size();
}

fusemodel::ModelConfig model_config(const Ctx& c) {
  auto m = c.cfg.model;
  m.vocab_size = m.use_text ? vocab_size(c.at(kPrepared)) : 0;
  return m;
}

std::vector<trainer::Sample> samples_of(const Ctx& c, const fs::path& rel) {
  const auto xs = cohort::read_instances(c.at(rel));
  return trainer::make_samples(xs, text_inputs(c.at(kPrepared), c.cfg.pcdg.eta), c.cfg.pcdg.eta);
}

std::string count_summary(std::span<const cohort::ForecastInstance> xs) {
  const auto pos = std::count_if(xs.begin(), xs.end(), [](const auto& x) { return x.label; });
  return std::to_string(xs.size()) + " instances (" + std::to_string(pos) + " positive)";
}

json label_counts(std::span<const cohort::ForecastInstance> xs) {
  std::size_t pos = 0;
  for (const auto& x : xs) pos += x.label;
  return {{"instances", xs.size()}, {"positives", pos}, {"negatives", xs.size() - pos}};
}

// --- commands -------------------------------------------------------------

StageIO cmd_synth(const Ctx& c) {
  if (c.cfg.dataset.source != "synth") {
    throw ValidationError({"synth requires dataset.source = synth (got " + c.cfg.dataset.source + ")"});
  }
  const auto syn = dataio::synth_cohort(c.cfg.dataset.synth, c.cfg.seed);
  dataio::store_cohort(c.at(kRaw), {syn.patients, syn.series});
  std::vector<json> rows;
  for (const auto& e : syn.episodes) {
    rows.push_back({{"patient_id", e.patient_id},
                    {"start_index", e.span.start_index},
                    {"end_index", e.span.end_index},
                    {"style", e.style == dataio::DeclineStyle::gradual ? "gradual" : "rapid"}});
  }
  write_jsonl(c.at(kRaw / "planted.jsonl"), rows);
  c.log("synth", std::to_string(syn.patients.size()) + " patients, " + std::to_string(syn.episodes.size()) +
                     " planted episodes");
  return {{},
          {kRaw / dataio::kStaticFile, kRaw / dataio::kSeriesFile, kRaw / "planted.jsonl"},
          {{"patients", syn.patients.size()}, {"planted_episodes", syn.episodes.size()}}};
}

dataio::Cohort fetch_external(const Ctx& c) {
  const auto& e = c.cfg.dataset.external;
  dataio::ExternalClientConfig ecfg;
  ecfg.url_template = e.url_template;
  if (!e.cache_dir.empty()) ecfg.cache_dir = e.cache_dir;
  dataio::ExternalClient client(ecfg, c.transport(20.0));
  dataio::Cohort out;
  std::map<std::string, dataio::PatientStatic> statics;
  for (auto& p : read_statics(e.static_path)) statics[p.patient_id] = p;
  for (const auto& id : e.case_ids) {
    auto it = statics.find(id);
    if (it == statics.end()) throw SchemaError("case " + id + " has no row in " + e.static_path);
    std::vector<dataio::TimedValue> map;
    if (!e.map_track.empty()) {
      map = client.fetch(id, e.map_track);
    } else {
      const auto sbp = client.fetch(id, e.sbp_track);
      const auto dbp = client.fetch(id, e.dbp_track);
      std::map<double, double> dia;
      for (const auto& v : dbp) dia[v.time_s] = v.value;
      std::vector<dataio::RawPressurePoint> pts;
      for (const auto& v : sbp) {
        if (auto d = dia.find(v.time_s); d != dia.end()) pts.push_back({v.time_s, v.value, d->second});
      }
      map = dataio::map_from_pressure(pts);
    }
    if (map.empty()) continue;
    out.patients.push_back(it->second);
    out.series.push_back(dataio::resample_map(map, c.cfg.dataset.sampling_interval_s, id));
  }
  return out;
}

StageIO cmd_ingest(const Ctx& c) {
  const auto& ds = c.cfg.dataset;
  StageIO io;
  dataio::Cohort raw;
  if (ds.source == "synth") {
    c.require(kRaw / dataio::kStaticFile, "synth");
    raw = dataio::load_cohort(c.at(kRaw));
    io.inputs = {kRaw / dataio::kStaticFile, kRaw / dataio::kSeriesFile};
  } else if (ds.source == "files") {
    const fs::path dir = ds.cohort_dir;
    if (!fs::exists(dir / dataio::kStaticFile)) throw PrerequisiteError("missing " + (dir / dataio::kStaticFile).string());
    raw = dataio::load_cohort(dir);
    io.notes["cohort_sha256"] = {{"static", sha256_file(dir / dataio::kStaticFile)},
                                 {"series", sha256_file(dir / dataio::kSeriesFile)}};
  } else {
    raw = fetch_external(c);
    io.notes["cases_requested"] = ds.external.case_ids.size();
  }

  std::map<std::string, const dataio::MapSeries*> series_of;
  for (const auto& s : raw.series) series_of[s.patient_id] = &s;
  dataio::Cohort clean;
  std::vector<json> quality;
  std::map<std::string, std::size_t> reasons;
  for (const auto& p : raw.patients) {
    auto it = series_of.find(p.patient_id);
    if (it == series_of.end()) {
      quality.push_back({{"patient_id", p.patient_id}, {"accepted", false}, {"reason", "no_series"}});
      ++reasons["no_series"];
      continue;
    }
    const auto& s = *it->second;
    if (std::abs(s.sampling_interval_s - ds.sampling_interval_s) > 1e-9) {
      throw SchemaError("series " + s.patient_id + " is sampled every " + format_double(s.sampling_interval_s) +
                        " s, expected " + format_double(ds.sampling_interval_s) + " s");
    }
    dataio::validate(p);
    const auto q = dataio::quality_filter(s, ds.min_duration_s, ds.max_missing_fraction);
    const std::string reason(dataio::to_string(q.reason));
    quality.push_back({{"patient_id", p.patient_id},
                       {"accepted", q.accepted},
                       {"reason", reason},
                       {"missing_fraction", s.missing_fraction()}});
    ++reasons[reason];
    if (!q.accepted) continue;
    clean.patients.push_back(p);
    clean.series.push_back(dataio::impute_missing(s));
  }
  if (clean.patients.empty()) throw std::runtime_error("ingest: no series passed the quality filter");
  dataio::store_cohort(c.at(kClean), clean);
  write_jsonl(c.at(kClean / "quality.jsonl"), quality);
  io.outputs = {kClean / dataio::kStaticFile, kClean / dataio::kSeriesFile, kClean / "quality.jsonl"};
  io.notes["accepted"] = clean.patients.size();
  io.notes["reasons"] = reasons;
  c.log("ingest", std::to_string(clean.patients.size()) + " of " + std::to_string(raw.patients.size()) +
                      " series accepted");
  return io;
}

StageIO cmd_prepare(const Ctx& c) {
  c.require(kClean / dataio::kStaticFile, "ingest");
  const auto cohort = dataio::load_cohort(c.at(kClean));
  const auto& policy = c.cfg.window;
  const auto split = cohort::split_by_surgery(cohort.patients, c.cfg.seed, c.cfg.split);

  std::map<std::string, const dataio::MapSeries*> series_of;
  for (const auto& s : cohort.series) series_of[s.patient_id] = &s;
  std::array<std::vector<cohort::ForecastInstance>, 3> parts;
  std::vector<json> episodes;
  std::size_t n_episodes = 0;
  for (const auto& p : cohort.patients) {
    const auto& s = *series_of.at(p.patient_id);
    const auto eps = cohort::detect_ioh_episodes(s);
    n_episodes += eps.size();
    for (const auto& e : eps) {
      episodes.push_back({{"patient_id", p.patient_id},
                          {"start_index", e.start_index},
                          {"end_index", e.end_index},
                          {"duration_s", e.duration_s}});
    }
    auto xs = cohort::slice_instances(s, eps, policy);
    auto& dst = parts[static_cast<std::size_t>(split.at(p.patient_id))];
    dst.insert(dst.end(), std::make_move_iterator(xs.begin()), std::make_move_iterator(xs.end()));
  }

  const auto rules = c.cfg.pcdg.rules_path.empty() ? pcdg::default_rules() : pcdg::load_rules(c.cfg.pcdg.rules_path);
  auto llm = c.cfg.pcdg.llm;
  if (llm.enabled) llm.log_path = c.at(kPrepared / "llm_calls.jsonl");
  pcdg::Describer describer(rules, llm, llm.enabled ? c.transport(llm.timeout_s) : nullptr);
  std::vector<pcdg::ClinicalDescription> corpus;
  std::vector<std::string> train_texts;
  std::size_t external = 0;
  for (const auto& p : cohort.patients) {
    auto d = describer.describe(p);
    external += d.source == "external";
    if (split.at(p.patient_id) == cohort::Partition::train) train_texts.push_back(d.text);
    corpus.push_back(std::move(d));
  }
  if (train_texts.empty()) throw std::runtime_error("prepare: the train partition has no patients");
  const auto terms = c.cfg.pcdg.domain_terms ? rules.domain_terms() : std::vector<std::string>{};
  const auto vocab = pcdg::build_vocabulary(train_texts, terms);

  write_jsonl(c.at(kPrepared / "episodes.jsonl"), episodes);
  write_text(c.at(kPrepared / "split.json"), cohort::to_json(split).dump(2) + "\n");
  const char* names[] = {"train", "val", "test"};
  json stats = json::object();
  StageIO io;
  io.inputs = {kClean / dataio::kStaticFile, kClean / dataio::kSeriesFile};
  io.outputs = {kPrepared / "episodes.jsonl", kPrepared / "split.json"};
  for (std::size_t k = 0; k < 3; ++k) {
    const fs::path rel = kPrepared / (std::string(names[k]) + ".jsonl");
    cohort::write_instances(c.at(rel), parts[k]);
    io.outputs.push_back(rel);
    stats[names[k]] = label_counts(parts[k]);
    c.log("prepare", std::string(names[k]) + ": " + count_summary(parts[k]));
  }
  pcdg::write_corpus(c.at(kPrepared / "corpus.jsonl"), corpus);
  write_text(c.at(kPrepared / "vocab.json"), vocab.to_json().dump() + "\n");
  stats["episodes"] = n_episodes;
  stats["patients"] = {{"train", split.counts()[0]}, {"val", split.counts()[1]}, {"test", split.counts()[2]}};
  stats["vocab_size"] = vocab.size();
  stats["external_descriptions"] = external;
  write_text(c.at(kPrepared / "stats.json"), stats.dump(2) + "\n");
  io.outputs.insert(io.outputs.end(),
                    {kPrepared / "corpus.jsonl", kPrepared / "vocab.json", kPrepared / "stats.json"});
  io.notes = stats;
  return io;
}

StageIO cmd_augment(const Ctx& c) {
  c.require(kPrepared / "train.jsonl", "prepare");
  const auto x1 = cohort::read_instances(c.at(kPrepared / "train.jsonl"));
  StageIO io;
  io.inputs = {kPrepared / "train.jsonl"};
  const auto& m = c.cfg.mtrda;
  auto finish = [&](const std::vector<cohort::ForecastInstance>& x2, const std::string& note) {
    cohort::write_instances(c.at(kAugment / "x2.jsonl"), x2);
    io.outputs.push_back(kAugment / "x2.jsonl");
    io.notes["x1"] = x1.size();
    io.notes["x2"] = x2.size();
    if (!note.empty()) io.notes["note"] = note;
    c.log("augment", "|X1| = " + std::to_string(x1.size()) + ", |X2| = " + std::to_string(x2.size()) +
                         (note.empty() ? "" : " (" + note + ")"));
    return io;
  };
  if (!m.enabled) return finish(x1, "augmentation disabled");
  const auto data = mtrda::residual_dataset(x1, m.scales, !m.augment_all, m.denoiser.condition_on_trend);
  if (data.empty()) return finish(x1, "no instances to augment");

  const auto schedule = mtrda::make_schedule(m.K, m.beta_1, m.beta_K, m.shape);
  mtrda::Denoiser model(m.denoiser, derive_seed(c.cfg.seed, "denoiser"));
  auto tcfg = m.train;
  tcfg.seed = derive_seed(c.cfg.seed, "denoiser-train");
  const auto r = mtrda::train_denoiser(model, data, schedule, tcfg);
  mtrda::save_denoiser(c.at(kAugment / "denoiser.bin"), model, schedule);
  std::string csv = "epoch,loss\n";
  for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
    csv += std::to_string(i + 1) + "," + format_double(r.loss_history[i]) + "\n";
  }
  write_text(c.at(kAugment / "denoiser_loss.csv"), csv);

  mtrda::AugmentOptions aopt;
  aopt.H = m.H;
  aopt.augment_all = m.augment_all;
  aopt.sampling.single_shot = m.single_shot;
  const auto augs = mtrda::augment_instances(x1, model, schedule, m.scales, aopt, derive_seed(c.cfg.seed, "augment"));
  const auto x2 = mtrda::assemble_x2(x1, augs);
  mtrda::write_augmentation_manifest(c.at(kAugment / "variants.jsonl"), augs, "x2.jsonl");
  io.outputs = {kAugment / "denoiser.bin", kAugment / "denoiser_loss.csv", kAugment / "variants.jsonl"};
  io.notes["denoiser_loss_first"] = r.loss_history.front();
  io.notes["denoiser_loss_last"] = r.loss_history.back();
  io.notes["augmented_bases"] = augs.size();
  return finish(x2, "");
}

StageIO cmd_pretrain(const Ctx& c) {
  StageIO io;
  if (!c.cfg.train.pretrain_enabled) {
    io.notes["skipped"] = "pretraining disabled by ablation " + std::string(trainer::to_string(c.cfg.ablation));
    c.log("pretrain", "skipped");
    return io;
  }
  c.require(kAugment / "x2.jsonl", "augment");
  c.require(kPrepared / "val.jsonl", "prepare");
  const auto mcfg = model_config(c);
  const auto train = samples_of(c, kAugment / "x2.jsonl");
  const auto val = samples_of(c, kPrepared / "val.jsonl");
  fusemodel::FusionModel model(mcfg, derive_seed(c.cfg.seed, "model"));
  auto tcfg = c.cfg.train.pretrain;
  tcfg.seed = derive_seed(c.cfg.seed, "pretrain");
  trainer::TrainHooks hooks;
  hooks.checkpoint_path = c.at(kPretrain / "checkpoint.bin");
  hooks.on_epoch = [&](const trainer::EpochRecord& r) {
    c.log("pretrain", "epoch " + std::to_string(r.epoch) + " train " + format_double(r.train_loss) + " val " +
                          format_double(r.val_loss));
  };
  const auto r = trainer::pretrain(model, train, val, tcfg, hooks);
  trainer::write_training_log(c.at(kPretrain / "log.csv"), r.history);
  io.inputs = {kAugment / "x2.jsonl", kPrepared / "val.jsonl", kPrepared / "vocab.json", kPrepared / "corpus.jsonl"};
  io.outputs = {kPretrain / "checkpoint.bin", kPretrain / "log.csv"};
  io.notes = {{"best_epoch", r.best_epoch},
              {"best_val_loss", r.best_val_loss},
              {"epochs_run", r.history.size()},
              {"stopped_early", r.stopped_early},
              {"first_train_loss", r.history.front().train_loss},
              {"last_train_loss", r.history.back().train_loss}};
  return io;
}

StageIO cmd_finetune(const Ctx& c) {
  c.require(kPrepared / "train.jsonl", "prepare");
  StageIO io;
  const auto mcfg = model_config(c);
  fusemodel::FusionModel model;
  if (c.cfg.train.pretrain_enabled) {
    c.require(kPretrain / "checkpoint.bin", "pretrain");
    auto ck = trainer::load_checkpoint(c.at(kPretrain / "checkpoint.bin"));
    if (ck.meta.stage != trainer::Stage::pretrain) {
      throw PrerequisiteError(c.at(kPretrain / "checkpoint.bin").string() + " is not a pretrain checkpoint");
    }
    model = trainer::prepare_finetune(ck.model, mcfg, derive_seed(c.cfg.seed, "finetune-init"));
    io.inputs.push_back(kPretrain / "checkpoint.bin");
  } else {
    model = fusemodel::FusionModel(mcfg, derive_seed(c.cfg.seed, "model"));
    io.notes["initialization"] = "fresh";
  }
  const auto train = samples_of(c, kPrepared / "train.jsonl");
  const auto val = samples_of(c, kPrepared / "val.jsonl");
  auto tcfg = c.cfg.train.finetune;
  tcfg.seed = derive_seed(c.cfg.seed, "finetune");
  trainer::TrainHooks hooks;
  hooks.checkpoint_path = c.at(kFinetune / "checkpoint.bin");
  hooks.on_epoch = [&](const trainer::EpochRecord& r) {
    c.log("finetune", "epoch " + std::to_string(r.epoch) + " train " + format_double(r.train_loss) + " val " +
                          format_double(r.val_loss));
  };
  const auto r = trainer::finetune(model, train, val, tcfg, hooks);
  if (r.history.empty()) {
    trainer::save_checkpoint(c.at(kFinetune / "checkpoint.bin"), model, nullptr,
                             {trainer::Stage::finetune, 0, trainer::to_json(tcfg), {}});
  }
  trainer::write_training_log(c.at(kFinetune / "log.csv"), r.history);
  io.inputs.insert(io.inputs.end(), {kPrepared / "train.jsonl", kPrepared / "val.jsonl", kPrepared / "vocab.json",
                                     kPrepared / "corpus.jsonl"});
  io.outputs = {kFinetune / "checkpoint.bin", kFinetune / "log.csv"};
  io.notes["best_epoch"] = r.best_epoch;
  io.notes["best_val_loss"] = r.best_val_loss;
  io.notes["epochs_run"] = r.history.size();
  return io;
}

StageIO cmd_evaluate(const Ctx& c) {
  c.require(kFinetune / "checkpoint.bin", "finetune");
  c.require(kPrepared / "test.jsonl", "prepare");
  auto model = fusemodel::load_model(c.at(kFinetune / "checkpoint.bin"));
  const auto test = samples_of(c, kPrepared / "test.jsonl");
  const auto rep = evalreport::evaluate_model(model, test, c.cfg.window, "model");
  const auto base = evalreport::evaluate(evalreport::persistence_predictor(c.cfg.window.t), test, c.cfg.window,
                                         "persistence");
  json full = {{"model", evalreport::report_to_json(rep)}, {"baselines", {evalreport::report_to_json(base)}}};
  write_text(c.at(kEval / "report.json"), full.dump() + "\n");
  json summary = {{"model", evalreport::summary_json(rep)}, {"persistence", evalreport::summary_json(base)}};
  write_text(c.at(kEval / "summary.json"), summary.dump(2) + "\n");
  auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  c.log("evaluate", "model auc " + show(rep.auc) + " recall " + show(rep.recall) + " mse_ioh " + show(rep.mse_ioh) +
                        "; persistence auc " + show(base.auc) + " recall " + show(base.recall));
  return {{kFinetune / "checkpoint.bin", kPrepared / "test.jsonl"},
          {kEval / "report.json", kEval / "summary.json"},
          summary};
}

StageIO cmd_report(const Ctx& c) {
  c.require(kEval / "report.json", "evaluate");
  const auto j = json::parse(read_text(c.at(kEval / "report.json")));
  std::vector<evalreport::EvalReport> reps{evalreport::report_from_json(j.at("model"))};
  for (const auto& b : j.at("baselines")) reps.push_back(evalreport::report_from_json(b));
  const auto files = evalreport::render_report(reps, c.at(kReport), c.cfg.eval.overlays);
  StageIO io;
  io.inputs = {kEval / "report.json"};
  for (const auto& f : files) io.outputs.push_back(fs::relative(f, c.root));
  c.log("report", std::to_string(files.size()) + " files written");
  return io;
}

StageIO cmd_bench(const Ctx& c) {
  c.require(kFinetune / "checkpoint.bin", "finetune");
  c.require(kPrepared / "test.jsonl", "prepare");
  auto model = fusemodel::load_model(c.at(kFinetune / "checkpoint.bin"));
  auto xs = samples_of(c, kPrepared / "test.jsonl");
  if (xs.size() > c.cfg.eval.bench_instances) xs.resize(c.cfg.eval.bench_instances);
  const auto b = evalreport::bench_inference(model, xs, c.cfg.eval.bench_repetitions);
  json j = evalreport::to_json(b);
  j["d"] = model.config.d;
  j["E"] = model.config.E;
  j["l"] = model.config.l;
  write_text(c.at(kBench / "bench.json"), j.dump(2) + "\n");
  c.log("bench", "median " + format_double(b.median_ms) + " ms, p95 " + format_double(b.p95_ms) + " ms");
  // Timings vary run to run, so the output is reported but not hashed.
  return {{kFinetune / "checkpoint.bin"}, {}, j};
}

json hashes(const Ctx& c, const std::vector<fs::path>& rels) {
  json out = json::object();
  for (const auto& r : rels) out[r.generic_string()] = sha256_file(c.at(r));
  return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"synth",    "ingest",   "prepare", "augment", "pretrain",
                                              "finetune", "evaluate", "report",  "bench"};
  return names;
}

json run_command(const std::string& command, const PipelineConfig& config, const RunOptions& opts) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw ValidationError({"unknown command '" + command + "'"});
  }
  Ctx c{apply_ablation(config.ablation, config), opts, opts.out_dir};
  c.cfg.validate();

  StageIO io;
  if (command == "synth") io = cmd_synth(c);
  if (command == "ingest") io = cmd_ingest(c);
  if (command == "prepare") io = cmd_prepare(c);
  if (command == "augment") io = cmd_augment(c);
  if (command == "pretrain") io = cmd_pretrain(c);
  if (command == "finetune") io = cmd_finetune(c);
  if (command == "evaluate") io = cmd_evaluate(c);
  if (command == "report") io = cmd_report(c);
  if (command == "bench") io = cmd_bench(c);

  json manifest = {{"command", command},
                   {"config_sha256", config_hash(c.cfg)},
                   {"seed", c.cfg.seed},
                   {"ablation", trainer::to_string(c.cfg.ablation)},
                   {"inputs", hashes(c, io.inputs)},
                   {"outputs", hashes(c, io.outputs)},
                   {"notes", command == "bench" ? json::object() : io.notes}};
  write_text(c.at(kManifests / (command + ".json")), manifest.dump(2) + "\n");
  return manifest;
}

std::vector<json> run_pipeline(const std::vector<std::string>& commands, const PipelineConfig& config,
                               const RunOptions& opts) {
  apply_ablation(config.ablation, config).validate();
  std::vector<json> out;
  for (const auto& cmd : commands) out.push_back(run_command(cmd, config, opts));
  return out;
}

std::map<std::string, fusemodel::TextInput> load_text_inputs(const fs::path& out_dir, std::size_t eta) {
  return text_inputs(out_dir / kPrepared, eta);
}

std::vector<trainer::Sample> load_samples(const fs::path& out_dir, const std::string& set, std::size_t eta) {
  const fs::path rel = set == "x2" ? kAugment / "x2.jsonl" : kPrepared / (set + ".jsonl");
  if (!fs::exists(out_dir / rel)) throw PrerequisiteError("missing " + (out_dir / rel).string());
  const auto xs = cohort::read_instances(out_dir / rel);
  return trainer::make_samples(xs, text_inputs(out_dir / kPrepared, eta), eta);
}

}  // namespace iohfuse::cli
