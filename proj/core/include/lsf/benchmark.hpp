#pragma once

// Cold single-segment inference (raw window in, label out) and its latency
// breakdown.

#include <span>
#include <string>
#include <vector>

#include "lsf/lstm.hpp"
#include "lsf/preprocess.hpp"
#include "lsf/svm.hpp"

namespace lsf {

struct InferenceBundle {
  Preprocessor preprocessor;
  NormStats norm;
  LstmModel lstm;
  SvmModel svm;
};

struct SegmentDecision {
  double score = 0.0;
  int label = 0;
};

/// Physical-unit samples of one native-rate window -> SVM score and label.
SegmentDecision infer_segment(const InferenceBundle& bundle, std::span<const double> physical);

struct LatencyStats {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

/// Mean and nearest-rank percentiles.
LatencyStats latency_stats(std::vector<double> seconds);

struct BenchmarkReport {
  int n_segments = 0;
  int warmup = 0;
  double segment_seconds = 10.0;
  LatencyStats preprocess;  // filter, resample, Haar, normalization
  LatencyStats lstm_forward;
  LatencyStats pooling;
  LatencyStats svm_score;
  LatencyStats total;
  std::string hardware;
};

/// Times `n_segments` inferences cycling through `segments`, after `warmup`
/// untimed ones. Throws ParameterError when n_segments < 100.
BenchmarkReport run_latency_benchmark(const InferenceBundle& bundle, std::span<const std::vector<double>> segments,
                                      int n_segments, int warmup = 20);

/// CPU model and logical core count.
std::string hardware_description();

std::string to_json(const BenchmarkReport& report);
BenchmarkReport benchmark_report_from_json(std::string_view text);

}  // namespace lsf
