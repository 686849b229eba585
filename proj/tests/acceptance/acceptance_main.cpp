// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "iohfuse/cli/config.hpp"
#include "iohfuse/cli/pipeline.hpp"
#include "iohfuse/cohort/instances.hpp"
#include "iohfuse/cohort/split.hpp"
#include "iohfuse/core/textio.hpp"
#include "iohfuse/dataio/preprocess.hpp"
#include "iohfuse/evalreport/metrics.hpp"
#include "iohfuse/fusemodel/model.hpp"
#include "iohfuse/mtrda/augment.hpp"
#include "iohfuse/mtrda/schedule.hpp"
#include "iohfuse/trainer/trainer.hpp"
#include "oracles.hpp"
#include "pipeline_fixture.hpp"

#ifndef IOHFUSE_CONFIG_DIR
#define IOHFUSE_CONFIG_DIR "configs"
#endif

using namespace iohfuse;
namespace fs = std::filesystem;
namespace t = iohfuse::testing;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;
};

/// Accumulates failures and keeps the first few messages.
class Tally {
 public:
  void check(bool cond, const std::string& what) {
    ++checks_;
    if (cond) return;
    ++failures_;
    if (messages_.size() < 3) messages_.push_back(what);
  }
  std::size_t checks() const { return checks_; }
  std::size_t failures() const { return failures_; }
  Verdict verdict(const std::string& summary) const {
    std::string d = summary;
    for (const auto& m : messages_) d += "; " + m;
    return {failures_ == 0, d};
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::vector<std::string> messages_;
};

bool rel_close(double got, double want, double tol = 1e-9) {
  return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::vector<double> randn(std::mt19937_64& rng, std::size_t n, double sd = 1.0, double mean = 0.0) {
  std::normal_distribution<double> g(mean, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

dataio::MapSeries series_of(std::vector<double> v, double dt) {
  dataio::MapSeries s;
  s.patient_id = "P";
  s.sampling_interval_s = dt;
  s.missing_mask.assign(v.size(), 0);
  s.values = std::move(v);
  return s;
}

// Criterion 1 -----------------------------------------------------------------

Verdict formula_exactness() {
  Tally tally;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  for (int i = 0; i < 200; ++i) {
    const double dbp = 20.0 + 100.0 * u(rng);
    const double sbp = dbp + 120.0 * u(rng);
    // Pulse-pressure form of the same quantity.
    tally.check(rel_close(dataio::compute_map(sbp, dbp), dbp + (sbp - dbp) / 3.0), "compute_map");
  }

  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<double> p(n), y(n);
    std::vector<std::uint8_t> m(n);
    double sn = 0.0, si = 0.0;
    std::size_t nn = 0, ni = 0;
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = 40.0 + 60.0 * u(rng);
      y[k] = 40.0 + 60.0 * u(rng);
      m[k] = u(rng) < 0.4 ? 1 : 0;
      const double e = (p[k] - y[k]) * (p[k] - y[k]);
      if (m[k]) {
        si += e;
        ++ni;
      } else {
        sn += e;
        ++nn;
      }
    }
    const double rho = 20.0 * u(rng);
    const double want = (nn ? sn / static_cast<double>(nn) : 0.0) + rho * (ni ? si / static_cast<double>(ni) : 0.0);
    tally.check(rel_close(trainer::compute_ioh_loss(p, y, m, rho), want), "ioh loss");
    nn::Graph g(false);
    const double graph = trainer::ioh_loss_graph(g, g.constant(nn::Matrix(1, n, p)), y, m, rho).value()(0, 0);
    tally.check(rel_close(graph, want), "ioh loss graph");
  }

  for (int i = 0; i < 200; ++i) {
    const std::size_t eta = 1 + rng() % 64;
    const std::size_t ns = 1 + rng() % 50;
    std::vector<std::uint8_t> mask(eta);
    for (auto& v : mask) v = u(rng) < 0.6 ? 1 : 0;
    const auto M = fusemodel::build_attention_mask(mask, ns);
    bool ok = M.rows == ns && M.cols == eta;
    for (std::size_t r = 0; ok && r < ns; ++r) {
      for (std::size_t c = 0; c < eta; ++c) ok = ok && M(r, c) == 1.0 - static_cast<double>(mask[c]);
    }
    tally.check(ok, "attention mask");
  }

  const auto sched = mtrda::make_schedule(50, 1e-4, 0.5);
  tally.check(std::abs(sched.beta.front() - 1e-4) <= 1e-12 && std::abs(sched.beta.back() - 0.5) <= 1e-12,
              "schedule endpoints");
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng() % 300;
    const std::size_t k = rng() % 51;
    auto x = randn(rng, n, 5.0);
    auto e = randn(rng, n);
    double abar = 1.0;
    for (std::size_t j = 0; j < k; ++j) abar *= 1.0 - sched.beta[j];
    const auto z = mtrda::diffuse_forward(x, k, e, sched);
    bool ok = z.size() == n;
    for (std::size_t j = 0; ok && j < n; ++j) {
      ok = rel_close(z[j], std::sqrt(abar) * x[j] + std::sqrt(1.0 - abar) * e[j]);
    }
    tally.check(ok, "diffuse_forward k=" + std::to_string(k));
  }
  return tally.verdict(std::to_string(tally.checks()) + " fixtures, " + std::to_string(tally.failures()) + " off");
}

// Criterion 2 -----------------------------------------------------------------

std::vector<double> brute_smooth(const std::vector<double>& x, std::size_t w) {
  const long l = static_cast<long>(x.size());
  const long h = static_cast<long>(w / 2);
  auto at = [&](long i) {
    if (i < 0) return x[static_cast<std::size_t>(-1 - i)];
    if (i >= l) return x[static_cast<std::size_t>(2 * l - 1 - i)];
    return x[static_cast<std::size_t>(i)];
  };
  std::vector<double> out(x.size());
  for (long i = 0; i < l; ++i) {
    double s = 0.0;
    for (long j = -h; j <= h; ++j) s += at(i + j);
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(w);
  }
  return out;
}

Verdict decomposition_identity() {
  Tally tally;
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t l = 30 + rng() % 271;
    auto x = randn(rng, l, 8.0, 80.0);
    mtrda::ScaleSet scales;
    scales.windows.clear();
    for (std::size_t w : {5u, 25u, 75u}) {
      if (w <= 2 * l - 1) scales.windows.push_back(w);
    }
    const auto d = mtrda::decompose(x, scales);
    double xmax = 0.0, err = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      xmax = std::max(xmax, std::abs(x[j]));
      err = std::max(err, std::abs(x[j] - (d.trend[j] + d.residual[j])));
    }
    worst = std::max(worst, err / xmax);
    tally.check(err <= 1e-9 * xmax, "identity l=" + std::to_string(l));

    std::vector<double> mean(l, 0.0);
    for (std::size_t w : scales.windows) {
      const auto got = mtrda::smooth_scale(x, w);
      const auto want = brute_smooth(x, w);
      bool ok = got.size() == l;
      for (std::size_t j = 0; ok && j < l; ++j) ok = rel_close(got[j], want[j]);
      tally.check(ok, "smooth_scale w=" + std::to_string(w) + " l=" + std::to_string(l));
      for (std::size_t j = 0; j < l; ++j) mean[j] += want[j] / static_cast<double>(scales.windows.size());
    }
    bool ok = true;
    for (std::size_t j = 0; j < l; ++j) ok = ok && rel_close(d.trend[j], mean[j]);
    tally.check(ok, "trend is the scale mean");
  }
  return tally.verdict("1000 series, worst relative identity error " + fmt(worst, 3));
}

// Criterion 3 -----------------------------------------------------------------

Verdict event_oracles() {
  Tally tally;
  std::mt19937_64 rng(303);
  std::size_t boundary_runs = 0;
  const double dts[] = {3.0, 6.0, 10.0};
  for (int trace = 0; trace < 1000; ++trace) {
    const double dt = dts[trace % 3];
    cohort::WindowPolicy p;
    p.sampling_interval_s = dt;
    p.l = 20 + rng() % 20;
    p.t = t::secs_to_samples(180.0, dt) + rng() % 8;
    p.stride_normal = 3 + rng() % 6;
    p.stride_ioh = 1 + rng() % 2;
    auto v = t::random_trace(rng, 240, dt);

    const auto want_eps = t::brute_episodes(v, dt);
    const auto s = series_of(v, dt);
    const auto eps = cohort::detect_ioh_episodes(s);
    bool same = eps.size() == want_eps.size();
    for (std::size_t i = 0; same && i < eps.size(); ++i) {
      same = eps[i].start_index == want_eps[i].start && eps[i].end_index == want_eps[i].end;
      if (static_cast<double>(eps[i].end_index - eps[i].start_index + 1) * dt == 60.0) ++boundary_runs;
    }
    tally.check(same, "episodes trace " + std::to_string(trace));

    const auto got = cohort::slice_instances(s, eps, p);
    const auto want = t::brute_slice(v, want_eps, p.l, p.t, p.stride_normal, p.stride_ioh, dt);
    bool sl = got.size() == want.size();
    for (std::size_t i = 0; sl && i < got.size(); ++i) {
      sl = got[i].anchor_index == want[i].anchor && got[i].label == want[i].label &&
           got[i].label == t::brute_label(got[i].target, dt);
    }
    tally.check(sl, "slicing trace " + std::to_string(trace));

    // Forecast-shaped inputs hovering around the threshold.
    std::vector<double> pred(p.t);
    std::uniform_real_distribution<double> near(58.0, 72.0);
    for (auto& x : pred) x = near(rng);
    const auto oracle = t::brute_predict(pred, dt);
    const auto d = evalreport::predict_event(pred, p);
    tally.check(d.event == oracle.first && d.score == oracle.second, "predict_event trace " + std::to_string(trace));
  }

  // Exactly 60 % below is not an event; one more reading below is.
  for (double dt : dts) {
    cohort::WindowPolicy p;
    p.sampling_interval_s = dt;
    const std::size_t w = t::secs_to_samples(120.0, dt);
    const std::size_t e = t::secs_to_samples(60.0, dt);
    p.t = w + 2 * e;
    if (e % 5 != 0) continue;
    std::vector<double> pred(p.t, 80.0);
    for (std::size_t i = 0; i < 3 * e / 5; ++i) pred[w + i] = 60.0;
    const auto at60 = evalreport::predict_event(pred, p);
    tally.check(!at60.event && at60.score == 0.6, "exactly 60 % dt=" + fmt(dt));
    tally.check(at60.event == t::brute_predict(pred, dt).first, "oracle at 60 %");
    pred[w + 3 * e / 5] = 60.0;
    tally.check(evalreport::predict_event(pred, p).event, "above 60 % dt=" + fmt(dt));

    // A sub-65 run of exactly 60 s is an episode; one sample shorter is not.
    std::vector<double> v(3 * e, 80.0);
    for (std::size_t i = e; i < 2 * e; ++i) v[i] = 60.0;
    tally.check(cohort::detect_ioh_episodes(series_of(v, dt)).size() == 1, "60 s episode dt=" + fmt(dt));
    v[2 * e - 1] = 80.0;
    tally.check(cohort::detect_ioh_episodes(series_of(v, dt)).empty(), "59 s run dt=" + fmt(dt));
  }
  tally.check(boundary_runs > 0, "random traces exercised 60 s runs");
  return tally.verdict("1000 traces, " + std::to_string(boundary_runs) + " exact-60 s episodes, " +
                       std::to_string(tally.failures()) + " disagreements");
}

// Criterion 4 -----------------------------------------------------------------

Verdict split_integrity() {
  Tally tally;
  std::mt19937_64 rng(404);
  std::vector<dataio::PatientStatic> ps;
  for (int i = 0; i < 500; ++i) {
    dataio::PatientStatic p;
    p.patient_id = "S" + std::to_string(i);
    p.age = 20 + static_cast<int>(rng() % 60);
    p.gender = rng() % 2 ? dataio::Gender::male : dataio::Gender::female;
    p.surgery_type = "type" + std::to_string(rng() % 10);
    ps.push_back(p);
  }
  const auto s = cohort::split_by_surgery(ps, 7);
  tally.check(s.of.size() == ps.size(), "every patient assigned once");
  std::map<std::string, std::array<std::size_t, 3>> per;
  std::map<std::string, std::size_t> sizes;
  std::array<std::set<std::string>, 3> parts;
  for (const auto& p : ps) {
    const auto k = static_cast<std::size_t>(s.at(p.patient_id));
    ++per[p.surgery_type][k];
    ++sizes[p.surgery_type];
    parts[k].insert(p.patient_id);
  }
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      std::vector<std::string> both;
      std::set_intersection(parts[a].begin(), parts[a].end(), parts[b].begin(), parts[b].end(),
                            std::back_inserter(both));
      tally.check(both.empty(), "partitions disjoint");
    }
  }
  tally.check(parts[0].size() + parts[1].size() + parts[2].size() == ps.size(), "partitions cover the cohort");
  for (const auto& [type, c] : per) {
    const double n = static_cast<double>(sizes[type]);
    const double targets[3] = {0.6 * n, 0.2 * n, 0.2 * n};
    for (int k = 0; k < 3; ++k) {
      tally.check(std::abs(static_cast<double>(c[k]) - targets[k]) <= 1.0, type + " within +-1");
    }
  }
  auto shuffled = ps;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  tally.check(cohort::split_by_surgery(ps, 7).of == s.of, "same seed reproduces");
  tally.check(cohort::split_by_surgery(shuffled, 7).of == s.of, "input order irrelevant");
  tally.check(cohort::split_by_surgery(ps, 8).of != s.of, "seed matters");
  return tally.verdict(std::to_string(per.size()) + " types, sizes " + std::to_string(parts[0].size()) + "/" +
                       std::to_string(parts[1].size()) + "/" + std::to_string(parts[2].size()));
}

// Criterion 5 -----------------------------------------------------------------

Verdict diffusion_moments() {
  Tally tally;
  const auto sched = mtrda::make_schedule(50, 1e-4, 0.5, mtrda::ScheduleShape::cosine);
  const std::vector<double> x{2.0, -1.5, 0.25, 4.0};
  const std::size_t N = 40000;
  std::mt19937_64 rng(505);
  std::normal_distribution<double> g(0.0, 1.0);
  std::string detail;
  for (std::size_t k : {1u, 25u, 50u}) {
    const double ab = sched.alpha_bar_at(k);
    const double var = 1.0 - ab;
    double worst_z = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      double s1 = 0.0, s2 = 0.0;
      std::vector<double> e(1);
      const std::vector<double> xj{x[j]};
      for (std::size_t n = 0; n < N; ++n) {
        e[0] = g(rng);
        const double z = mtrda::diffuse_forward(xj, k, e, sched)[0];
        s1 += z;
        s2 += z * z;
      }
      const double mean = s1 / static_cast<double>(N);
      const double sv = (s2 - static_cast<double>(N) * mean * mean) / static_cast<double>(N - 1);
      const double zm = std::abs(mean - std::sqrt(ab) * x[j]) / std::sqrt(var / static_cast<double>(N));
      const double zv = std::abs(sv - var) / (var * std::sqrt(2.0 / static_cast<double>(N - 1)));
      worst_z = std::max({worst_z, zm, zv});
      tally.check(zm <= 3.0, "mean k=" + std::to_string(k));
      tally.check(zv <= 3.0, "variance k=" + std::to_string(k));
    }
    detail += " k=" + std::to_string(k) + " max|z| " + fmt(worst_z, 3);
  }
  return tally.verdict("K=50 cosine [1e-4, 0.5];" + detail);
}

// Criterion 6 -----------------------------------------------------------------

Verdict gradient_checks() {
  Tally tally;
  std::string detail;
  std::mt19937_64 rng(606);

  {
    mtrda::DenoiserConfig dc;
    dc.l = 16;
    dc.width = 16;
    dc.blocks = 2;
    mtrda::Denoiser m(dc, 3);
    for (auto* p : m.params.all()) {
      for (auto& v : p->value.data) v += 0.05 * std::normal_distribution<double>(0, 1)(rng);
    }
    const auto s = mtrda::make_schedule(50, 1e-4, 0.5);
    auto x0 = randn(rng, 16);
    auto eps = randn(rng, 16);
    auto r = t::grad_check(
        m.params.all(), [&](nn::Graph& g) { return mtrda::denoiser_loss(g, m, x0, 23, eps, s); }, 1e-4, 1e-8, 1e-5,
        0);
    tally.check(r.failures == 0, "denoiser " + r.worst_name);
    detail += "denoiser " + fmt(r.worst_rel, 2);
  }

  fusemodel::ModelConfig c;
  c.p = 4;
  c.d = 16;
  c.E = 1;
  c.n_heads = 2;
  c.eta = 6;
  c.l = 12;
  c.t = 4;
  c.vocab_size = 13;
  c.mlp_ratio = 2;
  fusemodel::FusionModel m(c, 5);
  for (auto* p : m.params.all()) {
    for (auto& v : p->value.data) v += 0.1 * std::normal_distribution<double>(0, 1)(rng);
  }
  const fusemodel::TextInput text{{3, 9, 4, 1, 0, 0}, {1, 1, 1, 1, 0, 0}};
  auto window = randn(rng, c.l + c.t, 0.7);
  auto hist = randn(rng, c.l, 0.7);
  auto target = randn(rng, c.t);
  const std::vector<std::uint8_t> ioh{1, 0, 1, 0};
  const std::vector<std::size_t> masked{1, 2};
  const t::LossBuilder pre = [&](nn::Graph& g) { return fusemodel::pretrain_loss(g, m, window, &text, masked); };
  const t::LossBuilder fine = [&](nn::Graph& g) {
    return trainer::ioh_loss_graph(g, fusemodel::forecast_graph(g, m, hist, &text), target, ioh, 10.0);
  };
  const std::vector<std::pair<std::string, std::vector<std::string>>> groups{
      {"patch embedding", {"series.patch", "series.pos", "mask_token"}},
      {"cross-attention", {"xattn", "text."}},
      {"backbone block", {"block0", "lnf"}},
      {"heads", {"head."}}};
  for (const auto& [label, prefixes] : groups) {
    std::vector<nn::Parameter*> ps;
    for (const auto& pre_name : prefixes) {
      for (auto* p : m.params.with_prefix(pre_name)) ps.push_back(p);
    }
    tally.check(!ps.empty(), label + " has parameters");
    double worst = 0.0;
    for (const auto* build : {&pre, &fine}) {
      auto r = t::grad_check(ps, *build, 1e-4, 1e-8, 1e-5, 0);
      tally.check(r.failures == 0, label + " " + r.worst_name + " rel " + fmt(r.worst_rel, 3));
      worst = std::max(worst, r.worst_rel);
    }
    detail += ", " + label + " " + fmt(worst, 2);
  }
  return tally.verdict("width 16, worst relative error: " + detail);
}

// Criterion 7 -----------------------------------------------------------------

double denoiser_eval(mtrda::Denoiser& m, const std::vector<mtrda::DenoiserSample>& data,
                     const mtrda::DiffusionSchedule& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> kd(1, s.K);
  double total = 0.0;
  for (const auto& d : data) {
    const std::size_t k = kd(rng);
    auto eps = randn(rng, d.residual.size());
    nn::Graph g(false);
    total += mtrda::denoiser_loss(g, m, d.residual, k, eps, s).value()(0, 0);
  }
  return total / static_cast<double>(data.size());
}

Verdict training_sanity(const fs::path& work) {
  Tally tally;
  std::string detail;

  // (a) Residuals of noisy sinusoids around a slow trend.
  {
    std::mt19937_64 rng(707);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t l = 90;
    mtrda::ScaleSet scales;
    std::vector<mtrda::DenoiserSample> data;
    for (int i = 0; i < 64; ++i) {
      const double amp = 2.0 + 4.0 * u(rng);
      const double period = 6.0 + 10.0 * u(rng);
      const double phase = 2.0 * std::numbers::pi * u(rng);
      const double base = 70.0 + 20.0 * u(rng);
      const double slope = 0.1 * (u(rng) - 0.5);
      std::vector<double> x(l);
      for (std::size_t j = 0; j < l; ++j) {
        const double tj = static_cast<double>(j);
        x[j] = base + slope * tj + amp * std::sin(2.0 * std::numbers::pi * tj / period + phase) + 0.3 * (u(rng) - 0.5);
      }
      data.push_back({mtrda::decompose(x, scales).residual, {}});
    }
    mtrda::DenoiserConfig dc;
    dc.l = l;
    dc.width = 32;
    dc.blocks = 2;
    mtrda::Denoiser m(dc, 11);
    const auto s = mtrda::make_schedule(50, 1e-4, 0.5);
    const double before = denoiser_eval(m, data, s, 1);
    mtrda::DenoiserTrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 16;
    tc.learning_rate = 1e-3;
    tc.seed = 3;
    std::size_t halved_at = 0;
    const double first = before;
    auto r = mtrda::train_denoiser(m, data, s, tc, [&](std::size_t epoch, double loss) {
      if (!halved_at && loss <= 0.5 * first) halved_at = epoch;
    });
    const double after = denoiser_eval(m, data, s, 1);
    tally.check(after <= 0.5 * before, "denoiser loss " + fmt(before) + " -> " + fmt(after));
    tally.check(halved_at > 0 && halved_at <= 200, "denoiser training loss halved within 200 epochs");
    detail += "(a) " + fmt(before) + " -> " + fmt(after) + " (training loss halved at epoch " +
              std::to_string(halved_at) + ")";
    (void)r;
  }

  // (b) Masked pretraining on an augmented synthetic pretraining set.
  {
    auto cfg = t::tiny_pipeline_config(17);
    cfg.dataset.synth.n_patients = 60;
    cfg.mtrda.train.epochs = 10;
    cfg.mtrda.denoiser.width = 16;
    const auto dir = work / "pretrain_sanity";
    fs::remove_all(dir);
    std::ostringstream log;
    cli::RunOptions opts;
    opts.out_dir = dir;
    opts.log = &log;
    cli::run_pipeline({"synth", "ingest", "prepare", "augment"}, cfg, opts);
    auto x2 = cli::load_samples(dir, "x2", cfg.pcdg.eta);
    auto val = cli::load_samples(dir, "val", cfg.pcdg.eta);
    const auto vocab = nlohmann::json::parse(read_text(dir / "prepared" / "vocab.json"));
    fusemodel::ModelConfig mc;
    mc.p = 6;
    mc.d = 32;
    mc.E = 2;
    mc.n_heads = 2;
    mc.eta = cfg.pcdg.eta;
    mc.l = cfg.window.l;
    mc.t = cfg.window.t;
    mc.vocab_size = vocab.at("tokens").size();
    fusemodel::FusionModel model(mc, 21);
    auto tc = trainer::TrainConfig::defaults_for(trainer::Stage::pretrain);
    tc.learning_rate = 1e-3;
    tc.epochs = 60;
    tc.seed = 9;
    const double before = trainer::pretrain_eval_loss(model, x2, tc.seed);
    std::size_t halved_at = 0;
    trainer::TrainHooks hooks;
    hooks.on_epoch = [&](const trainer::EpochRecord& r) {
      if (!halved_at && r.train_loss <= 0.5 * before) halved_at = r.epoch;
    };
    const auto r = trainer::pretrain(model, x2, val, tc, hooks);
    const double after = trainer::pretrain_eval_loss(model, x2, tc.seed);
    tally.check(after <= 0.5 * before, "masked mse " + fmt(before) + " -> " + fmt(after));
    tally.check(halved_at > 0 && halved_at <= 60, "masked mse halved within 60 epochs");
    detail += "; (b) |X2| " + std::to_string(x2.size()) + ", masked mse " + fmt(before) + " -> " + fmt(after) +
              " (halved at epoch " + std::to_string(halved_at) + " of " + std::to_string(r.history.size()) + ")";
  }

  // (c) Matched residuals at IOH and normal timestamps, equal partition sizes.
  {
    std::mt19937_64 rng(708);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t half = 1 + rng() % 15;
      std::vector<double> target, pred;
      std::vector<std::uint8_t> mask;
      for (std::size_t j = 0; j < half; ++j) {
        const double y = 60.0 + u(rng);
        const double r = u(rng);
        for (std::uint8_t flag : {std::uint8_t{1}, std::uint8_t{0}}) {
          target.push_back(y);
          pred.push_back(y + r);
          mask.push_back(flag);
        }
      }
      nn::Parameter q("pred", 1, pred.size());
      q.value.data = pred;
      nn::Graph g;
      g.backward(trainer::ioh_loss_graph(g, g.param(q), target, mask, 10.0));
      for (std::size_t j = 0; j < half; ++j) {
        const double gi = q.grad.data[2 * j];
        const double gn = q.grad.data[2 * j + 1];
        if (gn == 0.0) continue;
        const double ratio = std::abs(gi) / std::abs(gn);
        worst = std::max(worst, std::abs(ratio - 10.0));
        tally.check(std::abs(ratio - 10.0) <= 1e-9, "gradient ratio " + fmt(ratio, 12));
      }
    }
    detail += "; (c) max |ratio - 10| " + fmt(worst, 3);
  }
  return tally.verdict(detail);
}

// Criterion 8 -----------------------------------------------------------------

struct E2eRow {
  std::uint64_t seed = 0;
  double full_auc = 0.0, full_recall = 0.0;
  double pers_auc = 0.0, pers_recall = 0.0;
  double np_auc = 0.0;
};

double metric(const nlohmann::json& s, const char* who, const char* key) {
  const auto& v = s.at(who).at(key);
  return v.is_null() ? std::nan("") : v.get<double>();
}

Verdict end_to_end(const fs::path& work) {
  Tally tally;
  const auto base = cli::load_pipeline_config(fs::path(IOHFUSE_CONFIG_DIR) / "synth_small.json");
  tally.check(base.dataset.synth.n_patients == 200, "200-patient cohort");
  std::vector<E2eRow> rows;
  std::size_t np_lower = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto cfg = base;
    cfg.seed = seed;
    std::ostringstream log;
    cli::RunOptions opts;
    opts.log = &log;

    opts.out_dir = work / ("e2e_full_s" + std::to_string(seed));
    fs::remove_all(opts.out_dir);
    cli::run_pipeline({"synth", "ingest", "prepare", "augment", "pretrain", "finetune", "evaluate"}, cfg, opts);
    const auto full = nlohmann::json::parse(read_text(opts.out_dir / "eval" / "summary.json"));

    auto np = cfg;
    np.ablation = trainer::Ablation::no_pretrain;
    opts.out_dir = work / ("e2e_no_pretrain_s" + std::to_string(seed));
    fs::remove_all(opts.out_dir);
    cli::run_pipeline({"synth", "ingest", "prepare", "finetune", "evaluate"}, np, opts);
    const auto abl = nlohmann::json::parse(read_text(opts.out_dir / "eval" / "summary.json"));

    E2eRow r;
    r.seed = seed;
    r.full_auc = metric(full, "model", "auc");
    r.full_recall = metric(full, "model", "recall");
    r.pers_auc = metric(full, "persistence", "auc");
    r.pers_recall = metric(full, "persistence", "recall");
    r.np_auc = metric(abl, "model", "auc");
    rows.push_back(r);
    const std::string tag = "seed " + std::to_string(seed);
    tally.check(r.full_auc >= 0.70, tag + " auc " + fmt(r.full_auc));
    tally.check(r.full_recall >= 0.60, tag + " recall " + fmt(r.full_recall));
    tally.check(r.full_auc > r.pers_auc, tag + " auc beats persistence");
    tally.check(r.full_recall > r.pers_recall, tag + " recall beats persistence");
    if (r.np_auc < r.full_auc) ++np_lower;
  }
  tally.check(np_lower >= 2, "no_pretrain lower in " + std::to_string(np_lower) + " of 3 seeds");
  std::string detail;
  for (const auto& r : rows) {
    detail += "seed " + std::to_string(r.seed) + ": auc " + fmt(r.full_auc) + " recall " + fmt(r.full_recall) +
              " (persistence " + fmt(r.pers_auc) + "/" + fmt(r.pers_recall) + ", no_pretrain auc " + fmt(r.np_auc) +
              "); ";
  }
  detail += "no_pretrain lower in " + std::to_string(np_lower) + "/3";
  return tally.verdict(detail);
}

// Criterion 9 -----------------------------------------------------------------

Verdict assembly_arithmetic() {
  Tally tally;
  std::mt19937_64 rng(909);
  const std::size_t l = 30;
  std::vector<cohort::ForecastInstance> x1;
  for (int i = 0; i < 400; ++i) {
    cohort::ForecastInstance x;
    x.patient_id = "A" + std::to_string(i % 20);
    x.anchor_index = static_cast<std::size_t>(i);
    x.id = cohort::instance_id(x.patient_id, x.anchor_index);
    x.history = randn(rng, l, 5.0, 78.0);
    x.target = randn(rng, 12, 5.0, 70.0);
    x.label = i % 2 == 0 && i < 270;
    x.ioh_mask.assign(12, x.label ? 1 : 0);
    x1.push_back(x);
  }
  const auto pos = std::count_if(x1.begin(), x1.end(), [](const auto& x) { return x.label; });
  tally.check(pos == 135, "fixture holds 135 positives");
  mtrda::DenoiserConfig dc;
  dc.l = l;
  dc.width = 8;
  dc.blocks = 1;
  mtrda::Denoiser m(dc, 1);
  const auto s = mtrda::make_schedule(10, 1e-4, 0.5);
  mtrda::ScaleSet scales;
  scales.windows = {3, 9, 15};
  mtrda::AugmentOptions ao;
  ao.H = 4;
  const auto augs = mtrda::augment_instances(x1, m, s, scales, ao, 5);
  const auto x2 = mtrda::assemble_x2(x1, augs);
  const long diff = static_cast<long>(x2.size()) - static_cast<long>(x1.size());
  tally.check(diff == 540, "|X2| - |X1| = " + std::to_string(diff));
  std::size_t augmented_pos = 0;
  for (std::size_t i = x1.size(); i < x2.size(); ++i) augmented_pos += x2[i].label ? 1 : 0;
  tally.check(augmented_pos == 540, "every variant inherits a positive label");
  return tally.verdict("135 positives, H=4, |X1| " + std::to_string(x1.size()) + ", |X2| " +
                       std::to_string(x2.size()));
}

// Criterion 10 ----------------------------------------------------------------

Verdict determinism(const fs::path& work) {
  Tally tally;
  const auto cfg = t::tiny_pipeline_config(29);
  std::ostringstream log;
  cli::RunOptions opts;
  opts.log = &log;
  std::vector<std::map<std::string, nlohmann::json>> runs;
  for (const char* name : {"determinism_a", "determinism_b"}) {
    opts.out_dir = work / name;
    fs::remove_all(opts.out_dir);
    cli::run_pipeline(cli::command_names(), cfg, opts);
    runs.push_back(t::read_manifests(opts.out_dir));
  }
  tally.check(runs[0].size() == cli::command_names().size(), "one manifest per command");
  tally.check(runs[0] == runs[1], "manifests identical across runs");

  const auto ckpt = work / "determinism_a" / "finetune" / "checkpoint.bin";
  auto loaded = trainer::load_checkpoint(ckpt);
  auto samples = cli::load_samples(work / "determinism_a", "test", cfg.pcdg.eta);
  const auto copy = work / "roundtrip.bin";
  trainer::save_checkpoint(copy, loaded.model, nullptr, loaded.meta);
  auto again = fusemodel::load_model(copy);
  fusemodel::save_model(work / "roundtrip_model.bin", again);
  auto third = fusemodel::load_model(work / "roundtrip_model.bin");
  std::size_t compared = 0;
  for (const auto& s : samples) {
    const auto* tx = s.text.ids.empty() ? nullptr : &s.text;
    const auto a = fusemodel::forecast(s.history, tx, loaded.model);
    const auto b = fusemodel::forecast(s.history, tx, again);
    const auto c = fusemodel::forecast(s.history, tx, third);
    tally.check(a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0,
                "checkpoint forward bitwise");
    tally.check(a.size() == c.size() && std::memcmp(a.data(), c.data(), a.size() * sizeof(double)) == 0,
                "model file forward bitwise");
    ++compared;
  }
  tally.check(compared > 0, "test instances available");
  return tally.verdict(std::to_string(runs[0].size()) + " manifests equal, " + std::to_string(compared) +
                       " forecasts bitwise equal after reload");
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance"};
  std::string work_dir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "scratch directory");
  app.add_option("--only", only, "criterion ids to run");
  CLI11_PARSE(app, argc, argv);
  const fs::path work(work_dir);
  fs::create_directories(work);

  const std::vector<Criterion> criteria{
      {1, "formula exactness", 60, formula_exactness},
      {2, "decomposition identity", 60, decomposition_identity},
      {3, "episode, label and event oracles", 300, event_oracles},
      {4, "split integrity", 10, split_integrity},
      {5, "diffusion statistics", 60, diffusion_moments},
      {6, "gradient correctness", 300, gradient_checks},
      {7, "training sanity", 1200, [&] { return training_sanity(work); }},
      {8, "end-to-end synthetic study", 2700, [&] { return end_to_end(work); }},
      {9, "dataset assembly arithmetic", 60, assembly_arithmetic},
      {10, "determinism and persistence", 300, [&] { return determinism(work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      v.ok = false;
      v.detail += "; runtime over budget";
    }
    std::printf("%s criterion %d %s: %s [%.1f s / %.0f s]\n", v.ok ? "PASS" : "FAIL", c.id, c.name.c_str(),
                v.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
    failed += v.ok ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
