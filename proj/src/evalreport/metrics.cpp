#include "iohfuse/evalreport/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "iohfuse/core/textio.hpp"

namespace iohfuse::evalreport {

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); }

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

constexpr double kW = 640.0, kH = 320.0, kPad = 40.0;

std::string svg_open(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"320\" viewBox=\"0 0 640 320\">\n"
         "<rect width=\"640\" height=\"320\" fill=\"white\"/>\n"
         "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         title + "</text>\n";
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const char* color, const char* extra = "") {
  std::string s = "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" + extra +
                  " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += " ";
    s += fmt(pts[i].first) + "," + fmt(pts[i].second);
  }
  return s + "\"/>\n";
}

std::string overlay_svg(const InstanceRecord& r) {
  const std::size_t l = r.history.size();
  const std::size_t n = l + r.target.size();
  double lo = 60.0, hi = 70.0;
  for (const auto* v : {&r.history, &r.target, &r.pred}) {
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  lo -= 2.0;
  hi += 2.0;
  auto X = [&](double i) { return kPad + (kW - 2 * kPad) * i / static_cast<double>(std::max<std::size_t>(1, n - 1)); };
  auto Y = [&](double v) { return kH - kPad - (kH - 2 * kPad) * (v - lo) / (hi - lo); };
  std::vector<std::pair<double, double>> truth, pred;
  for (std::size_t i = 0; i < l; ++i) truth.emplace_back(X(static_cast<double>(i)), Y(r.history[i]));
  for (std::size_t i = 0; i < r.target.size(); ++i) {
    truth.emplace_back(X(static_cast<double>(l + i)), Y(r.target[i]));
    pred.emplace_back(X(static_cast<double>(l + i)), Y(r.pred[i]));
  }
  std::string s = svg_open(r.id + " label=" + (r.label ? "1" : "0") + " event=" + (r.event ? "1" : "0"));
  s += "<line class=\"threshold\" x1=\"" + fmt(kPad) + "\" y1=\"" + fmt(Y(65.0)) + "\" x2=\"" + fmt(kW - kPad) +
       "\" y2=\"" + fmt(Y(65.0)) + "\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n";
  s += "<text x=\"" + fmt(kW - kPad) + "\" y=\"" + fmt(Y(65.0) - 4) +
       "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"red\">65 mmHg</text>\n";
  s += "<line x1=\"" + fmt(X(static_cast<double>(l))) + "\" y1=\"" + fmt(kPad) + "\" x2=\"" +
       fmt(X(static_cast<double>(l))) + "\" y2=\"" + fmt(kH - kPad) + "\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n";
  s += polyline(truth, "black");
  s += polyline(pred, "steelblue");
  return s + "</svg>\n";
}

std::string roc_svg(std::span<const EvalReport> reports) {
  static const char* colors[] = {"steelblue", "darkorange", "seagreen", "purple", "gray"};
  auto X = [](double f) { return kPad + (kW - 2 * kPad) * f; };
  auto Y = [](double t) { return kH - kPad - (kH - 2 * kPad) * t; };
  std::string s = svg_open("ROC");
  s += "<line x1=\"" + fmt(X(0)) + "\" y1=\"" + fmt(Y(0)) + "\" x2=\"" + fmt(X(1)) + "\" y2=\"" + fmt(Y(1)) +
       "\" stroke=\"lightgray\" stroke-dasharray=\"4,4\"/>\n";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    std::vector<std::uint8_t> labels;
    std::vector<double> scores;
    for (const auto& r : reports[k].records) {
      labels.push_back(r.label);
      scores.push_back(r.score);
    }
    const char* color = colors[std::min<std::size_t>(k, 4)];
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : roc_curve(labels, scores)) pts.emplace_back(X(p.fpr), Y(p.tpr));
    s += polyline(pts, color);
    s += "<text x=\"" + fmt(X(0.6)) + "\" y=\"" + fmt(Y(0.3) + 14.0 * static_cast<double>(k)) +
         "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + color + "\">" + reports[k].name +
         " AUC=" + (reports[k].auc ? fmt(*reports[k].auc) : std::string("NA")) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace

PointwiseErrors pointwise_ioh_errors(std::span<const double> pred, std::span<const double> target,
                                     std::span<const std::uint8_t> ioh_mask) {
  if (pred.size() != target.size() || pred.size() != ioh_mask.size()) {
    throw std::invalid_argument("pointwise_ioh_errors: pred, target and mask lengths differ");
  }
  PointwiseErrors e;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!ioh_mask[i]) continue;
    const double d = pred[i] - target[i];
    e.squared.push_back(d * d);
    e.absolute.push_back(std::abs(d));
  }
  return e;
}

EventDecision predict_event(std::span<const double> pred, const cohort::WindowPolicy& policy) {
  const std::size_t w = policy.warning_samples();
  const std::size_t e = policy.event_samples();
  if (pred.size() < w + e) {
    throw std::invalid_argument("predict_event: " + std::to_string(pred.size()) + " values cannot hold the " +
                                std::to_string(w) + "-sample warning and " + std::to_string(e) + "-sample event windows");
  }
  EventDecision d;
  std::size_t below = 0;
  for (std::size_t i = w; i < w + e; ++i) below += pred[i] < cohort::kIohThresholdMmHg;
  for (std::size_t o = w;; ++o) {
    if (5 * below > 3 * e) d.event = true;
    d.score = std::max(d.score, static_cast<double>(below) / static_cast<double>(e));
    if (o + e >= pred.size()) break;
    below += pred[o + e] < cohort::kIohThresholdMmHg;
    below -= pred[o] < cohort::kIohThresholdMmHg;
  }
  return d;
}

std::optional<double> recall(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> decisions) {
  if (labels.size() != decisions.size()) throw std::invalid_argument("recall: lengths differ");
  std::size_t pos = 0, tp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    ++pos;
    tp += decisions[i] != 0;
  }
  if (pos == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(pos);
}

std::optional<double> auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw std::invalid_argument("auc: lengths differ");
  const std::size_t n = labels.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks over tie groups; sum of positive ranks gives the U statistic.
  double pos_rank = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) {
        pos_rank += mid;
        ++npos;
      }
    }
    i = j;
  }
  const std::size_t nneg = n - npos;
  if (npos == 0 || nneg == 0) return std::nullopt;
  const double np = static_cast<double>(npos);
  return (pos_rank - np * (np + 1.0) / 2.0) / (np * static_cast<double>(nneg));
}

std::vector<RocPoint> roc_curve(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw std::invalid_argument("roc_curve: lengths differ");
  const std::size_t n = labels.size();
  std::size_t P = 0;
  for (auto l : labels) P += l != 0;
  const std::size_t N = n - P;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] ? tp : fp) += 1;
      ++j;
    }
    roc.push_back({N ? static_cast<double>(fp) / static_cast<double>(N) : 0.0,
                   P ? static_cast<double>(tp) / static_cast<double>(P) : 0.0});
    i = j;
  }
  return roc;
}

double trapezoid_area(std::span<const RocPoint> roc) {
  double a = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    a += (roc[i].fpr - roc[i - 1].fpr) * 0.5 * (roc[i].tpr + roc[i - 1].tpr);
  }
  return a;
}

nlohmann::json summary_json(const EvalReport& r) {
  return {{"name", r.name},
          {"mse_ioh", opt(r.mse_ioh)},
          {"mae_ioh", opt(r.mae_ioh)},
          {"recall", opt(r.recall)},
          {"auc", opt(r.auc)},
          {"counts",
           {{"instances", r.instances},
            {"positives", r.positives},
            {"predicted_positives", r.predicted_positives},
            {"ioh_timestamps", r.ioh_timestamps}}}};
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j = summary_json(r);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.records) {
    rows.push_back({{"id", x.id},
                    {"label", x.label},
                    {"event", x.event},
                    {"score", x.score},
                    {"ioh_timestamps", x.ioh_timestamps},
                    {"history", x.history},
                    {"target", x.target},
                    {"pred", x.pred}});
  }
  j["records"] = rows;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  auto get_opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<double>();
  };
  EvalReport r;
  r.name = j.at("name").get<std::string>();
  r.mse_ioh = get_opt("mse_ioh");
  r.mae_ioh = get_opt("mae_ioh");
  r.recall = get_opt("recall");
  r.auc = get_opt("auc");
  const auto& c = j.at("counts");
  r.instances = c.at("instances").get<std::size_t>();
  r.positives = c.at("positives").get<std::size_t>();
  r.predicted_positives = c.at("predicted_positives").get<std::size_t>();
  r.ioh_timestamps = c.at("ioh_timestamps").get<std::size_t>();
  for (const auto& x : j.value("records", nlohmann::json::array())) {
    InstanceRecord rec;
    rec.id = x.at("id").get<std::string>();
    rec.label = x.at("label").get<bool>();
    rec.event = x.at("event").get<bool>();
    rec.score = x.at("score").get<double>();
    rec.ioh_timestamps = x.at("ioh_timestamps").get<std::size_t>();
    rec.history = x.at("history").get<std::vector<double>>();
    rec.target = x.at("target").get<std::vector<double>>();
    rec.pred = x.at("pred").get<std::vector<double>>();
    r.records.push_back(std::move(rec));
  }
  return r;
}

EvalReport evaluate(const Predictor& predict, std::span<const trainer::Sample> samples,
                    const cohort::WindowPolicy& policy, const std::string& name) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty test set");
  EvalReport rep;
  rep.name = name;
  double sq = 0.0, ab = 0.0;
  std::vector<std::uint8_t> labels, decisions;
  std::vector<double> scores;
  for (const auto& s : samples) {
    InstanceRecord rec;
    rec.id = s.id;
    rec.history = s.history;
    rec.target = s.target;
    rec.pred = predict(s);
    if (rec.pred.size() != s.target.size()) {
      throw std::invalid_argument("evaluate: prediction for " + s.id + " has length " + std::to_string(rec.pred.size()));
    }
    rec.label = cohort::label_target(s.target, policy);
    const auto d = predict_event(rec.pred, policy);
    rec.event = d.event;
    rec.score = d.score;
    const auto e = pointwise_ioh_errors(rec.pred, s.target, s.ioh_mask);
    rec.ioh_timestamps = e.squared.size();
    for (double x : e.squared) sq += x;
    for (double x : e.absolute) ab += x;
    rep.ioh_timestamps += rec.ioh_timestamps;
    rep.positives += rec.label;
    rep.predicted_positives += rec.event;
    labels.push_back(rec.label);
    decisions.push_back(rec.event);
    scores.push_back(rec.score);
    rep.records.push_back(std::move(rec));
  }
  rep.instances = samples.size();
  if (rep.ioh_timestamps) {
    rep.mse_ioh = sq / static_cast<double>(rep.ioh_timestamps);
    rep.mae_ioh = ab / static_cast<double>(rep.ioh_timestamps);
  }
  rep.recall = recall(labels, decisions);
  rep.auc = auc(labels, scores);
  return rep;
}

EvalReport evaluate_model(fusemodel::FusionModel& model, std::span<const trainer::Sample> samples,
                          const cohort::WindowPolicy& policy, const std::string& name) {
  return evaluate(
      [&](const trainer::Sample& s) {
        return fusemodel::forecast(s.history, model.config.use_text ? &s.text : nullptr, model);
      },
      samples, policy, name);
}

Predictor persistence_predictor(std::size_t t) {
  return [t](const trainer::Sample& s) {
    if (s.history.empty()) throw std::invalid_argument("persistence: empty history");
    return std::vector<double>(t, s.history.back());
  };
}

void write_instance_records(const std::filesystem::path& path, const EvalReport& r) {
  std::vector<nlohmann::json> rows;
  for (const auto& x : r.records) {
    rows.push_back({{"id", x.id},
                    {"label", x.label},
                    {"event", x.event},
                    {"score", x.score},
                    {"ioh_timestamps", x.ioh_timestamps},
                    {"pred", x.pred},
                    {"target", x.target}});
  }
  write_jsonl(path, rows);
}

std::vector<std::filesystem::path> render_report(std::span<const EvalReport> reports,
                                                 const std::filesystem::path& out_dir, std::size_t overlays) {
  if (reports.empty()) throw std::invalid_argument("render_report: no reports");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "figures", ec);
  if (ec) throw std::runtime_error("render_report: cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::filesystem::path& p, const std::string& body) {
    write_text(p, body);
    written.push_back(p);
  };
  const EvalReport& main = reports.front();
  nlohmann::json summary = summary_json(main);
  nlohmann::json baselines = nlohmann::json::array();
  for (std::size_t k = 1; k < reports.size(); ++k) baselines.push_back(summary_json(reports[k]));
  summary["baselines"] = baselines;
  emit(out_dir / "summary.json", summary.dump(2) + "\n");

  std::string csv = "name,mse_ioh,mae_ioh,recall,auc,instances,positives,predicted_positives,ioh_timestamps\n";
  for (const auto& r : reports) {
    csv += r.name + "," + opt_csv(r.mse_ioh) + "," + opt_csv(r.mae_ioh) + "," + opt_csv(r.recall) + "," +
           opt_csv(r.auc) + "," + std::to_string(r.instances) + "," + std::to_string(r.positives) + "," +
           std::to_string(r.predicted_positives) + "," + std::to_string(r.ioh_timestamps) + "\n";
  }
  emit(out_dir / "metrics.csv", csv);
  write_instance_records(out_dir / "instances.jsonl", main);
  written.push_back(out_dir / "instances.jsonl");
  emit(out_dir / "figures" / "roc.svg", roc_svg(reports));

  // Positives first so the overlays show events when there are any.
  std::vector<std::size_t> order(main.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return main.records[a].label > main.records[b].label; });
  for (std::size_t k = 0; k < std::min(overlays, order.size()); ++k) {
    emit(out_dir / "figures" / ("overlay_" + std::to_string(k) + ".svg"), overlay_svg(main.records[order[k]]));
  }
  return written;
}

BenchStats bench_inference(fusemodel::FusionModel& model, std::span<const trainer::Sample> xs,
                           std::size_t repetitions, std::size_t warmup) {
  if (xs.empty()) throw std::invalid_argument("bench_inference: empty batch");
  auto run = [&](std::size_t i) {
    const auto& s = xs[i % xs.size()];
    return fusemodel::forecast(s.history, model.config.use_text ? &s.text : nullptr, model);
  };
  for (std::size_t i = 0; i < warmup; ++i) run(i);
  BenchStats b;
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    auto y = run(i);
    const auto t1 = std::chrono::steady_clock::now();
    if (y.empty()) throw std::logic_error("bench_inference: empty forecast");
    b.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  if (!b.samples_ms.empty()) {
    b.median_ms = percentile(b.samples_ms, 0.5);
    b.p95_ms = percentile(b.samples_ms, 0.95);
  }
  return b;
}

nlohmann::json to_json(const BenchStats& b) {
  return {{"repetitions", b.samples_ms.size()}, {"median_ms", b.median_ms}, {"p95_ms", b.p95_ms}};
}

}  // namespace iohfuse::evalreport
