#include "lsf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "lsf/error.hpp"

namespace lsf {

ScoredPredictions::ScoredPredictions(std::vector<double> s, std::vector<int> l)
    : scores(std::move(s)), labels(std::move(l)) {
  if (scores.size() != labels.size()) throw ParameterError("scores and labels differ in length");
  for (double v : scores) {
    if (!std::isfinite(v)) throw ParameterError("non-finite score");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw ParameterError("labels must be 0 or 1");
  }
}

std::size_t ScoredPredictions::n_pos() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

namespace {

struct Group {
  double score;
  std::size_t pos;
  std::size_t neg;
};

// Distinct scores in descending order with per-group class counts.
std::vector<Group> threshold_groups(const ScoredPredictions& p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p.scores[a] > p.scores[b]; });
  std::vector<Group> groups;
  for (auto i : order) {
    if (groups.empty() || p.scores[i] != groups.back().score) groups.push_back({p.scores[i], 0, 0});
    (p.labels[i] == 1 ? groups.back().pos : groups.back().neg) += 1;
  }
  return groups;
}

}  // namespace

std::vector<PrPoint> pr_curve(const ScoredPredictions& preds) {
  const auto n_pos = preds.n_pos();
  if (n_pos == 0) throw UndefinedMetricError("precision-recall curve needs at least one positive");
  std::vector<PrPoint> out;
  std::size_t tp = 0, fp = 0;
  for (const auto& g : threshold_groups(preds)) {
    tp += g.pos;
    fp += g.neg;
    out.push_back({g.score, static_cast<double>(tp) / static_cast<double>(tp + fp),
                   static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return out;
}

std::vector<RocPoint> roc_curve(const ScoredPredictions& preds) {
  const auto n_pos = preds.n_pos();
  const auto n_neg = preds.n_neg();
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("ROC curve needs both classes");
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (const auto& g : threshold_groups(preds)) {
    tp += g.pos;
    fp += g.neg;
    out.push_back({g.score, static_cast<double>(fp) / static_cast<double>(n_neg),
                   static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return out;
}

double average_precision(const ScoredPredictions& preds) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const auto& p : pr_curve(preds)) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

double roc_auc(const ScoredPredictions& preds) {
  const auto curve = roc_curve(preds);
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

Confusion confusion_at(const ScoredPredictions& preds, double threshold) {
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool predicted = preds.scores[i] > threshold;
    if (preds.labels[i] == 1) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ScalarMetrics scalar_metrics(const Confusion& c) {
  return {ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn), ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp),
          ratio(c.tp, c.tp + c.fp)};
}

ScalarMetrics scalar_metrics(const ScoredPredictions& preds, double threshold) {
  if (preds.size() == 0) throw ParameterError("no predictions");
  return scalar_metrics(confusion_at(preds, threshold));
}

EvalReport evaluate(const ScoredPredictions& preds, double threshold, std::string model) {
  EvalReport r;
  r.model = std::move(model);
  r.threshold = threshold;
  r.n = preds.size();
  r.n_pos = preds.n_pos();
  r.confusion = confusion_at(preds, threshold);
  r.scalars = scalar_metrics(r.confusion);
  if (r.n_pos > 0) {
    r.pr = pr_curve(preds);
    r.ap = average_precision(preds);
  }
  if (r.n_pos > 0 && r.n_pos < r.n) {
    r.roc = roc_curve(preds);
    r.auc_roc = roc_auc(preds);
  }
  return r;
}

namespace {

using nlohmann::ordered_json;

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> opt_from(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

// JSON has no infinity; the leading ROC point is stored as null.
ordered_json threshold_json(double t) { return std::isfinite(t) ? ordered_json(t) : ordered_json(nullptr); }

double threshold_from(const ordered_json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

std::string to_json(const EvalReport& r, bool include_curves) {
  ordered_json j;
  j["model"] = r.model;
  j["threshold"] = r.threshold;
  j["n"] = r.n;
  j["n_pos"] = r.n_pos;
  j["ap"] = opt(r.ap);
  j["auc_roc"] = opt(r.auc_roc);
  j["accuracy"] = opt(r.scalars.accuracy);
  j["recall"] = opt(r.scalars.recall);
  j["specificity"] = opt(r.scalars.specificity);
  j["precision"] = opt(r.scalars.precision);
  j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
  if (include_curves) {
    auto& pr = j["pr_curve"] = ordered_json::array();
    for (const auto& p : r.pr) pr.push_back({p.threshold, p.precision, p.recall});
    auto& roc = j["roc_curve"] = ordered_json::array();
    for (const auto& p : r.roc) roc.push_back({threshold_json(p.threshold), p.fpr, p.tpr});
  }
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation report: ") + e.what());
  }
  try {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.threshold = j.at("threshold").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.n_pos = j.at("n_pos").get<std::size_t>();
    r.ap = opt_from(j, "ap");
    r.auc_roc = opt_from(j, "auc_roc");
    r.scalars = {opt_from(j, "accuracy"), opt_from(j, "recall"), opt_from(j, "specificity"),
                 opt_from(j, "precision")};
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                   c.at("fn").get<std::size_t>()};
    if (j.contains("pr_curve")) {
      for (const auto& p : j.at("pr_curve")) r.pr.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    if (j.contains("roc_curve")) {
      for (const auto& p : j.at("roc_curve")) r.roc.push_back({threshold_from(p[0]), p[1].get<double>(), p[2].get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation report: ") + e.what());
  }
}

namespace {

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string pr_curve_csv(std::span<const PrPoint> curve) {
  std::string out = "threshold,precision,recall\n";
  for (const auto& p : curve) out += fmt_real(p.threshold) + "," + fmt_real(p.precision) + "," + fmt_real(p.recall) + "\n";
  return out;
}

std::string roc_curve_csv(std::span<const RocPoint> curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : curve) out += fmt_real(p.threshold) + "," + fmt_real(p.fpr) + "," + fmt_real(p.tpr) + "\n";
  return out;
}

}  // namespace lsf
