#include "lsf/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "lsf/error.hpp"

namespace lsf {

SegmentDecision infer_segment(const InferenceBundle& bundle, std::span<const double> physical) {
  const auto x = apply_norm(bundle.norm, bundle.preprocessor.featurize_segment(physical));
  const auto h1 = lstm_layer_forward(bundle.lstm.layer1, x.values);
  const auto h2 = lstm_layer_forward(bundle.lstm.layer2, h1);
  const Eigen::VectorXd v = global_max_pool(h2);
  const double s = decision_score(bundle.svm, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  return {s, s > 0.0 ? 1 : 0};
}

LatencyStats latency_stats(std::vector<double> seconds) {
  if (seconds.empty()) throw ParameterError("no latency samples");
  LatencyStats s;
  double sum = 0.0;
  for (double v : seconds) sum += v;
  s.mean = sum / static_cast<double>(seconds.size());
  std::sort(seconds.begin(), seconds.end());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(seconds.size())));
    return seconds[std::clamp<std::size_t>(k, 1, seconds.size()) - 1];
  };
  s.p50 = rank(0.50);
  s.p95 = rank(0.95);
  return s;
}

BenchmarkReport run_latency_benchmark(const InferenceBundle& bundle, std::span<const std::vector<double>> segments,
                                      int n_segments, int warmup) {
  if (n_segments < 100) throw ParameterError("the latency benchmark needs at least 100 timed segments");
  if (warmup < 0) throw ParameterError("warmup count must not be negative");
  if (segments.empty()) throw ParameterError("no segments to benchmark");

  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
  std::vector<double> pre, fwd, pool, svm, total;
  double sink = 0.0;
  for (int k = 0; k < warmup + n_segments; ++k) {
    const auto& seg = segments[static_cast<std::size_t>(k) % segments.size()];
    const auto t0 = clock::now();
    const auto x = apply_norm(bundle.norm, bundle.preprocessor.featurize_segment(seg));
    const auto t1 = clock::now();
    const auto h1 = lstm_layer_forward(bundle.lstm.layer1, x.values);
    const auto h2 = lstm_layer_forward(bundle.lstm.layer2, h1);
    const auto t2 = clock::now();
    const Eigen::VectorXd v = global_max_pool(h2);
    const auto t3 = clock::now();
    const double s = decision_score(bundle.svm, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
    const int label = s > 0.0 ? 1 : 0;
    const auto t4 = clock::now();
    sink += s + label;
    if (k < warmup) continue;
    pre.push_back(secs(t0, t1));
    fwd.push_back(secs(t1, t2));
    pool.push_back(secs(t2, t3));
    svm.push_back(secs(t3, t4));
    total.push_back(secs(t0, t4));
  }
  if (!std::isfinite(sink)) throw ComputationError("non-finite decision score during the benchmark");

  BenchmarkReport r;
  r.n_segments = n_segments;
  r.warmup = warmup;
  r.segment_seconds = bundle.preprocessor.config().window_s;
  r.preprocess = latency_stats(std::move(pre));
  r.lstm_forward = latency_stats(std::move(fwd));
  r.pooling = latency_stats(std::move(pool));
  r.svm_score = latency_stats(std::move(svm));
  r.total = latency_stats(std::move(total));
  r.hardware = hardware_description();
  return r;
}

std::string hardware_description() {
  std::string model = "unknown CPU";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        model = line.substr(colon + 1);
        model.erase(0, model.find_first_not_of(' '));
      }
      break;
    }
  }
  return model + ", " + std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " logical cores";
}

namespace {

using nlohmann::ordered_json;

ordered_json stats_json(const LatencyStats& s) { return {{"mean", s.mean}, {"p50", s.p50}, {"p95", s.p95}}; }

LatencyStats stats_from(const ordered_json& j) {
  return {j.at("mean").get<double>(), j.at("p50").get<double>(), j.at("p95").get<double>()};
}

}  // namespace

std::string to_json(const BenchmarkReport& r) {
  ordered_json j;
  j["n_segments"] = r.n_segments;
  j["warmup"] = r.warmup;
  j["segment_seconds"] = r.segment_seconds;
  j["unit"] = "seconds per segment";
  j["preprocess"] = stats_json(r.preprocess);
  j["lstm_forward"] = stats_json(r.lstm_forward);
  j["pooling"] = stats_json(r.pooling);
  j["svm_score"] = stats_json(r.svm_score);
  j["total"] = stats_json(r.total);
  j["hardware"] = r.hardware;
  return j.dump(2) + "\n";
}

BenchmarkReport benchmark_report_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    BenchmarkReport r;
    r.n_segments = j.at("n_segments").get<int>();
    r.warmup = j.at("warmup").get<int>();
    r.segment_seconds = j.at("segment_seconds").get<double>();
    r.preprocess = stats_from(j.at("preprocess"));
    r.lstm_forward = stats_from(j.at("lstm_forward"));
    r.pooling = stats_from(j.at("pooling"));
    r.svm_score = stats_from(j.at("svm_score"));
    r.total = stats_from(j.at("total"));
    r.hardware = j.at("hardware").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("benchmark report: ") + e.what());
  }
}

}  // namespace lsf
