#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iohfuse/cohort/instances.hpp"
#include "iohfuse/fusemodel/model.hpp"
#include "iohfuse/trainer/trainer.hpp"

namespace iohfuse::evalreport {

struct PointwiseErrors {
  std::vector<double> squared;
  std::vector<double> absolute;
};

/// Errors at hypotensive timestamps only (mask true). Throws on length mismatch.
PointwiseErrors pointwise_ioh_errors(std::span<const double> pred, std::span<const double> target,
                                     std::span<const std::uint8_t> ioh_mask);

struct EventDecision {
  bool event = false;
  /// Largest sub-65 fraction over the scanned one-minute windows.
  double score = 0.0;
};

/// Scans every event-window offset at or after the warning window. An event
/// needs strictly more than 60 % of a window below 65 mmHg. Throws
/// std::invalid_argument when pred cannot hold both windows.
EventDecision predict_event(std::span<const double> pred, const cohort::WindowPolicy& policy);

/// True positives over positives; nullopt without positives.
std::optional<double> recall(std::span<const std::uint8_t> labels, std::span<const std::uint8_t> decisions);

/// Rank statistic with ties counted half; nullopt unless both classes occur.
std::optional<double> auc(std::span<const std::uint8_t> labels, std::span<const double> scores);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Threshold sweep from high to low scores; tied scores move as one step.
std::vector<RocPoint> roc_curve(std::span<const std::uint8_t> labels, std::span<const double> scores);
double trapezoid_area(std::span<const RocPoint> roc);

struct InstanceRecord {
  std::string id;
  bool label = false;
  bool event = false;
  double score = 0.0;
  std::size_t ioh_timestamps = 0;
  std::vector<double> history;
  std::vector<double> target;
  std::vector<double> pred;
};

struct EvalReport {
  std::string name;
  std::optional<double> mse_ioh;
  std::optional<double> mae_ioh;
  std::optional<double> recall;
  std::optional<double> auc;
  std::size_t instances = 0;
  std::size_t positives = 0;
  std::size_t predicted_positives = 0;
  std::size_t ioh_timestamps = 0;
  std::vector<InstanceRecord> records;
};

/// Summary fields only; absent metrics serialize as null.
nlohmann::json summary_json(const EvalReport& r);

/// Full report including per-instance records, and its inverse.
nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

using Predictor = std::function<std::vector<double>(const trainer::Sample&)>;

/// Throws std::invalid_argument on an empty set or a prediction of the wrong length.
EvalReport evaluate(const Predictor& predict, std::span<const trainer::Sample> samples,
                    const cohort::WindowPolicy& policy, const std::string& name);

EvalReport evaluate_model(fusemodel::FusionModel& model, std::span<const trainer::Sample> samples,
                          const cohort::WindowPolicy& policy, const std::string& name = "model");

/// Repeats the last history value across the horizon.
Predictor persistence_predictor(std::size_t t);

void write_instance_records(const std::filesystem::path& path, const EvalReport& r);

/// summary.json, metrics.csv, instances.jsonl for reports[0], and SVG figures:
/// ROC curves for every report plus up to `overlays` prediction overlays.
/// Returns the written paths in a fixed order.
std::vector<std::filesystem::path> render_report(std::span<const EvalReport> reports,
                                                 const std::filesystem::path& out_dir, std::size_t overlays = 6);

struct BenchStats {
  std::vector<double> samples_ms;
  double median_ms = 0.0;
  double p95_ms = 0.0;
};

/// Wall-clock per forecast after `warmup` untimed calls, cycling through xs.
BenchStats bench_inference(fusemodel::FusionModel& model, std::span<const trainer::Sample> xs,
                           std::size_t repetitions, std::size_t warmup = 3);

nlohmann::json to_json(const BenchStats& b);

}  // namespace iohfuse::evalreport
