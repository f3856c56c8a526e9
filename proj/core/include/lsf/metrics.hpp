#pragma once

// Threshold-group ranking metrics (AP, ROC AUC) and confusion-matrix metrics.
// Higher scores mean "more positive"; labels are 0/1.

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsf {

struct ScoredPredictions {
  std::vector<double> scores;
  std::vector<int> labels;

  ScoredPredictions() = default;
  /// Throws ParameterError on length mismatch, non-finite scores or labels outside {0, 1}.
  ScoredPredictions(std::vector<double> scores, std::vector<int> labels);

  std::size_t size() const { return scores.size(); }
  std::size_t n_pos() const;
  std::size_t n_neg() const { return size() - n_pos(); }
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// One point per distinct score, descending; equal scores cross together.
std::vector<PrPoint> pr_curve(const ScoredPredictions& preds);
/// Starts at (0, 0) with threshold +inf, then one point per distinct score.
std::vector<RocPoint> roc_curve(const ScoredPredictions& preds);

/// sum_i (R_i - R_{i-1}) P_i with R_0 = 0. Throws UndefinedMetricError without positives.
double average_precision(const ScoredPredictions& preds);
/// Trapezoidal area under roc_curve. Throws UndefinedMetricError unless both classes occur.
double roc_auc(const ScoredPredictions& preds);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Positive prediction iff score > threshold.
Confusion confusion_at(const ScoredPredictions& preds, double threshold);

struct ScalarMetrics {
  std::optional<double> accuracy;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> precision;
};

ScalarMetrics scalar_metrics(const Confusion& c);
ScalarMetrics scalar_metrics(const ScoredPredictions& preds, double threshold);

struct EvalReport {
  std::string model;
  double threshold = 0.0;
  std::size_t n = 0;
  std::size_t n_pos = 0;
  std::optional<double> ap;
  std::optional<double> auc_roc;
  ScalarMetrics scalars;
  Confusion confusion;
  std::vector<PrPoint> pr;
  std::vector<RocPoint> roc;
};

/// Metrics that are undefined for this input are left empty rather than thrown.
EvalReport evaluate(const ScoredPredictions& preds, double threshold, std::string model = {});

/// JSON text; `include_curves` embeds the point lists.
std::string to_json(const EvalReport& report, bool include_curves = false);
EvalReport eval_report_from_json(std::string_view text);

/// "threshold,precision,recall"
std::string pr_curve_csv(std::span<const PrPoint> curve);
/// "threshold,fpr,tpr"
std::string roc_curve_csv(std::span<const RocPoint> curve);

}  // namespace lsf
