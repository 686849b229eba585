#include "iohfuse/cli/config.hpp"

#include <set>
#include <stdexcept>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::cli {

namespace {

using nlohmann::json;

std::set<std::string> keys_of(const json& j) {
  std::set<std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.insert(it.key());
  return out;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& path,
                std::vector<std::string>& v) {
  if (!j.is_object()) {
    v.push_back(path + " must be an object");
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) v.push_back("unknown key " + path + "." + it.key());
  }
}

/// Runs a section parser, turning type errors into violations.
template <class F>
void guarded(const std::string& path, std::vector<std::string>& v, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    for (const auto& x : e.violations()) v.push_back(path + ": " + x);
  } catch (const std::exception& e) {
    v.push_back(path + ": " + e.what());
  }
}

json split_json(const cohort::SplitOptions& s) {
  return {{"ratios", s.ratios}, {"min_group_size", s.min_group_size}, {"group_exclusive", s.group_exclusive}};
}

json llm_json(const pcdg::LlmClientConfig& c) {
  return {{"enabled", c.enabled}, {"url", c.url}, {"fallback", c.fallback}, {"timeout_s", c.timeout_s}};
}

json denoiser_train_json(const mtrda::DenoiserTrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"standardize", c.standardize},
          {"clip_norm", c.clip_norm}};
}

json train_stage_json(const trainer::TrainConfig& c) {
  json j = trainer::to_json(c);
  j.erase("stage");
  j.erase("seed");
  j.erase("ablation");
  return j;
}

json external_json(const ExternalSource& e) {
  return {{"url_template", e.url_template}, {"cache_dir", e.cache_dir}, {"case_ids", e.case_ids},
          {"map_track", e.map_track},       {"sbp_track", e.sbp_track}, {"dbp_track", e.dbp_track},
          {"static_path", e.static_path}};
}

}  // namespace

std::vector<std::string> PipelineConfig::violations() const {
  std::vector<std::string> v;
  const auto& d = dataset;
  if (d.source != "synth" && d.source != "files" && d.source != "external") {
    v.push_back("dataset.source must be synth, files or external");
  }
  if (d.source == "synth") {
    guarded("dataset.synth", v, [&] { d.synth.validate(); });
    if (d.synth.sampling_interval_s != d.sampling_interval_s) {
      v.push_back("dataset.synth.sampling_interval_s differs from dataset.sampling_interval_s");
    }
  }
  if (d.source == "files" && d.cohort_dir.empty()) v.push_back("dataset.cohort_dir is required for source files");
  if (d.source == "external") {
    if (d.external.case_ids.empty()) v.push_back("dataset.external.case_ids must be non-empty");
    if (d.external.static_path.empty()) v.push_back("dataset.external.static_path is required");
    if (d.external.map_track.empty() && (d.external.sbp_track.empty() || d.external.dbp_track.empty())) {
      v.push_back("dataset.external needs map_track or both sbp_track and dbp_track");
    }
  }
  if (!(d.sampling_interval_s > 0.0)) v.push_back("dataset.sampling_interval_s must be > 0");
  if (d.min_duration_s < 0.0) v.push_back("dataset.min_duration_s must be >= 0");
  if (d.max_missing_fraction < 0.0 || d.max_missing_fraction > 1.0) {
    v.push_back("dataset.max_missing_fraction must be in [0, 1]");
  }

  for (const auto& x : window.violations()) v.push_back("window: " + x);
  if (window.sampling_interval_s != d.sampling_interval_s) {
    v.push_back("window.sampling_interval_s differs from dataset.sampling_interval_s");
  }
  for (double r : split.ratios) {
    if (!(r >= 0.0)) v.push_back("split.ratios must be non-negative");
  }
  if (split.ratios[0] + split.ratios[1] + split.ratios[2] <= 0.0) v.push_back("split.ratios must not all be zero");

  if (pcdg.eta == 0) v.push_back("pcdg.eta must be >= 1");
  if (pcdg.llm.enabled && pcdg.llm.url.empty()) v.push_back("pcdg.llm.url is required when enabled");

  if (mtrda.enabled) {
    guarded("mtrda.scales", v, [&] { mtrda.scales.validate(window.l); });
    if (mtrda.K == 0) v.push_back("mtrda.K must be >= 1");
    if (!(mtrda.beta_1 > 0.0 && mtrda.beta_1 <= mtrda.beta_K && mtrda.beta_K < 1.0)) {
      v.push_back("mtrda betas must satisfy 0 < beta_1 <= beta_K < 1");
    }
    if (mtrda.H == 0) v.push_back("mtrda.H must be >= 1 when augmentation is enabled");
    for (const auto& x : mtrda.denoiser.violations()) v.push_back("mtrda: " + x);
    if (mtrda.denoiser.l != window.l) v.push_back("mtrda.denoiser.l must equal window.l");
    if (mtrda.train.batch_size == 0) v.push_back("mtrda.train.batch_size must be >= 1");
    if (!(mtrda.train.learning_rate > 0.0)) v.push_back("mtrda.train.learning_rate must be > 0");
  }

  fusemodel::ModelConfig m = model;
  if (m.use_text && m.vocab_size < 2) m.vocab_size = 2;
  for (const auto& x : m.violations()) v.push_back(x);
  if (model.l != window.l) v.push_back("model.l must equal window.l");
  if (model.t != window.t) v.push_back("model.t must equal window.t");
  if (model.use_text && model.eta != pcdg.eta) v.push_back("model.eta must equal pcdg.eta");

  for (const auto& x : train.pretrain.violations()) v.push_back(x);
  for (const auto& x : train.finetune.violations()) v.push_back(x);
  return v;
}

void PipelineConfig::validate() const {
  if (auto v = violations(); !v.empty()) throw ValidationError(std::move(v));
}

json to_json(const PipelineConfig& c) {
  json model = fusemodel::to_json(c.model);
  model.erase("vocab_size");
  return {{"seed", c.seed},
          {"ablation", trainer::to_string(c.ablation)},
          {"dataset",
           {{"source", c.dataset.source},
            {"synth", dataio::to_json(c.dataset.synth)},
            {"cohort_dir", c.dataset.cohort_dir},
            {"external", external_json(c.dataset.external)},
            {"sampling_interval_s", c.dataset.sampling_interval_s},
            {"min_duration_s", c.dataset.min_duration_s},
            {"max_missing_fraction", c.dataset.max_missing_fraction}}},
          {"window", cohort::to_json(c.window)},
          {"split", split_json(c.split)},
          {"pcdg",
           {{"rules_path", c.pcdg.rules_path},
            {"eta", c.pcdg.eta},
            {"domain_terms", c.pcdg.domain_terms},
            {"llm", llm_json(c.pcdg.llm)}}},
          {"mtrda",
           {{"enabled", c.mtrda.enabled},
            {"scales", c.mtrda.scales.windows},
            {"K", c.mtrda.K},
            {"beta_1", c.mtrda.beta_1},
            {"beta_K", c.mtrda.beta_K},
            {"shape", mtrda::to_string(c.mtrda.shape)},
            {"H", c.mtrda.H},
            {"augment_all", c.mtrda.augment_all},
            {"single_shot", c.mtrda.single_shot},
            {"denoiser", mtrda::to_json(c.mtrda.denoiser)},
            {"train", denoiser_train_json(c.mtrda.train)}}},
          {"model", model},
          {"train",
           {{"pretrain_enabled", c.train.pretrain_enabled},
            {"pretrain", train_stage_json(c.train.pretrain)},
            {"finetune", train_stage_json(c.train.finetune)}}},
          {"eval",
           {{"overlays", c.eval.overlays},
            {"bench_repetitions", c.eval.bench_repetitions},
            {"bench_instances", c.eval.bench_instances}}}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  std::vector<std::string> v;
  const json defaults = to_json(c);
  if (!j.is_object()) throw ValidationError({"config must be a JSON object"});
  check_keys(j, keys_of(defaults), "config", v);

  guarded("seed", v, [&] { c.seed = j.value("seed", c.seed); });
  guarded("ablation", v, [&] {
    if (j.contains("ablation")) c.ablation = trainer::parse_ablation(j.at("ablation").get<std::string>());
  });
  auto section = [&](const char* name) -> json {
    if (!j.contains(name)) return json::object();
    const json& s = j.at(name);
    check_keys(s, keys_of(defaults.at(name)), name, v);
    return s.is_object() ? s : json::object();
  };

  const json ds = section("dataset");
  guarded("dataset", v, [&] {
    auto& d = c.dataset;
    d.source = ds.value("source", d.source);
    if (ds.contains("synth")) {
      check_keys(ds.at("synth"), keys_of(defaults["dataset"]["synth"]), "dataset.synth", v);
      d.synth = dataio::synth_config_from_json(ds.at("synth"));
    }
    d.cohort_dir = ds.value("cohort_dir", d.cohort_dir);
    if (ds.contains("external")) {
      const json& e = ds.at("external");
      check_keys(e, keys_of(defaults["dataset"]["external"]), "dataset.external", v);
      auto& x = d.external;
      x.url_template = e.value("url_template", x.url_template);
      x.cache_dir = e.value("cache_dir", x.cache_dir);
      x.case_ids = e.value("case_ids", x.case_ids);
      x.map_track = e.value("map_track", x.map_track);
      x.sbp_track = e.value("sbp_track", x.sbp_track);
      x.dbp_track = e.value("dbp_track", x.dbp_track);
      x.static_path = e.value("static_path", x.static_path);
    }
    d.sampling_interval_s = ds.value("sampling_interval_s", d.sampling_interval_s);
    d.min_duration_s = ds.value("min_duration_s", d.min_duration_s);
    d.max_missing_fraction = ds.value("max_missing_fraction", d.max_missing_fraction);
  });

  const json ws = section("window");
  guarded("window", v, [&] { c.window = cohort::window_policy_from_json(ws); });
  const json ss = section("split");
  guarded("split", v, [&] {
    c.split.ratios = ss.value("ratios", c.split.ratios);
    c.split.min_group_size = ss.value("min_group_size", c.split.min_group_size);
    c.split.group_exclusive = ss.value("group_exclusive", c.split.group_exclusive);
  });

  const json ps = section("pcdg");
  guarded("pcdg", v, [&] {
    c.pcdg.rules_path = ps.value("rules_path", c.pcdg.rules_path);
    c.pcdg.eta = ps.value("eta", c.pcdg.eta);
    c.pcdg.domain_terms = ps.value("domain_terms", c.pcdg.domain_terms);
    if (ps.contains("llm")) {
      const json& l = ps.at("llm");
      check_keys(l, keys_of(defaults["pcdg"]["llm"]), "pcdg.llm", v);
      c.pcdg.llm.enabled = l.value("enabled", c.pcdg.llm.enabled);
      c.pcdg.llm.url = l.value("url", c.pcdg.llm.url);
      c.pcdg.llm.fallback = l.value("fallback", c.pcdg.llm.fallback);
      c.pcdg.llm.timeout_s = l.value("timeout_s", c.pcdg.llm.timeout_s);
    }
  });

  const json ms = section("mtrda");
  guarded("mtrda", v, [&] {
    auto& m = c.mtrda;
    m.enabled = ms.value("enabled", m.enabled);
    m.scales.windows = ms.value("scales", m.scales.windows);
    m.K = ms.value("K", m.K);
    m.beta_1 = ms.value("beta_1", m.beta_1);
    m.beta_K = ms.value("beta_K", m.beta_K);
    if (ms.contains("shape")) m.shape = mtrda::parse_schedule_shape(ms.at("shape").get<std::string>());
    m.H = ms.value("H", m.H);
    m.augment_all = ms.value("augment_all", m.augment_all);
    m.single_shot = ms.value("single_shot", m.single_shot);
    if (ms.contains("denoiser")) {
      check_keys(ms.at("denoiser"), keys_of(defaults["mtrda"]["denoiser"]), "mtrda.denoiser", v);
      m.denoiser = mtrda::denoiser_config_from_json(ms.at("denoiser"));
    }
    if (ms.contains("train")) {
      const json& t = ms.at("train");
      check_keys(t, keys_of(defaults["mtrda"]["train"]), "mtrda.train", v);
      m.train.epochs = t.value("epochs", m.train.epochs);
      m.train.batch_size = t.value("batch_size", m.train.batch_size);
      m.train.learning_rate = t.value("learning_rate", m.train.learning_rate);
      m.train.standardize = t.value("standardize", m.train.standardize);
      m.train.clip_norm = t.value("clip_norm", m.train.clip_norm);
    }
  });

  const json mo = section("model");
  guarded("model", v, [&] { c.model = fusemodel::model_config_from_json(mo); });

  const json ts = section("train");
  guarded("train", v, [&] {
    c.train.pretrain_enabled = ts.value("pretrain_enabled", c.train.pretrain_enabled);
    for (auto stage : {trainer::Stage::pretrain, trainer::Stage::finetune}) {
      const std::string name(trainer::to_string(stage));
      if (!ts.contains(name)) continue;
      check_keys(ts.at(name), keys_of(defaults["train"][name]), "train." + name, v);
      auto cfg = trainer::train_config_from_json(ts.at(name), stage);
      (stage == trainer::Stage::pretrain ? c.train.pretrain : c.train.finetune) = cfg;
    }
  });

  const json es = section("eval");
  guarded("eval", v, [&] {
    c.eval.overlays = es.value("overlays", c.eval.overlays);
    c.eval.bench_repetitions = es.value("bench_repetitions", c.eval.bench_repetitions);
    c.eval.bench_instances = es.value("bench_instances", c.eval.bench_instances);
  });

  if (!v.empty()) throw ValidationError(std::move(v));
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
  return pipeline_config_from_json(j);
}

std::string config_hash(const PipelineConfig& c) { return sha256_hex(to_json(c).dump()); }

PipelineConfig apply_ablation(trainer::Ablation variant, PipelineConfig c) {
  const auto t = trainer::toggles_for(variant);
  c.ablation = variant;
  c.train.pretrain.ablation = variant;
  c.train.finetune.ablation = variant;
  if (!t.use_text) c.model.use_text = false;
  if (!t.domain_terms) c.pcdg.domain_terms = false;
  if (!t.augmentation) c.mtrda.enabled = false;
  if (!t.pretrain) c.train.pretrain_enabled = false;
  return c;
}

}  // namespace iohfuse::cli
