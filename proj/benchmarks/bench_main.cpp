#include <benchmark/benchmark.h>

#include <vector>

#include "lsf/benchmark.hpp"
#include "lsf/lstm.hpp"
#include "lsf/preprocess.hpp"
#include "lsf/random.hpp"
#include "lsf/svm.hpp"

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  lsf::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

lsf::FeatureTensor tensor(int steps, std::uint64_t seed) {
  const auto v = noise(2 * static_cast<std::size_t>(steps), seed);
  lsf::FeatureTensor t;
  t.values = Eigen::Map<const Eigen::MatrixXd>(v.data(), steps, 2);
  return t;
}

void BM_Highpass(benchmark::State& state) {
  const auto spec = lsf::design_highpass(0.5, 360.0, 4);
  const auto x = noise(3600, 1);
  for (auto _ : state) benchmark::DoNotOptimize(lsf::apply_filter(spec, x));
}
BENCHMARK(BM_Highpass);

void BM_Resample360To100(benchmark::State& state) {
  const auto x = noise(3600, 2);
  for (auto _ : state) benchmark::DoNotOptimize(lsf::resample(x, 360.0, 100.0));
}
BENCHMARK(BM_Resample360To100);

void BM_Haar(benchmark::State& state) {
  const auto x = noise(1000, 3);
  for (auto _ : state) benchmark::DoNotOptimize(lsf::haar_dwt1(x));
}
BENCHMARK(BM_Haar);

void BM_LstmFeatures(benchmark::State& state) {
  const auto model = lsf::LstmModel::initialize(static_cast<int>(state.range(0)), 4);
  const lsf::LstmNet net(model);
  std::vector<lsf::FeatureTensor> xs;
  for (int i = 0; i < state.range(1); ++i) xs.push_back(tensor(500, 10 + static_cast<std::uint64_t>(i)));
  for (auto _ : state) benchmark::DoNotOptimize(net.features(xs));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_LstmFeatures)->Args({100, 1})->Args({100, 32})->Args({32, 32});

void BM_LstmGradient(benchmark::State& state) {
  const auto model = lsf::LstmModel::initialize(static_cast<int>(state.range(0)), 5);
  std::vector<lsf::FeatureTensor> xs;
  std::vector<int> ys;
  for (int i = 0; i < 16; ++i) {
    xs.push_back(tensor(500, 20 + static_cast<std::uint64_t>(i)));
    ys.push_back(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(lsf::loss_and_gradient(model, xs, ys));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_LstmGradient)->Arg(32)->Arg(100)->Unit(benchmark::kMillisecond);

lsf::SvmModel trained_svm(int n, int d) {
  const auto v = noise(static_cast<std::size_t>(n * d), 6);
  Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, d);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = x(i, 0) + 0.3 * x(i, 1) > 0.0;
  }
  return lsf::smo_train(x, y, {});
}

void BM_SmoTrain(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(trained_svm(n, 100));
}
BENCHMARK(BM_SmoTrain)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_SvmScore(benchmark::State& state) {
  const auto model = trained_svm(2000, 100);
  const auto x = noise(100, 7);
  for (auto _ : state) benchmark::DoNotOptimize(lsf::decision_score(model, x));
  state.counters["n_sv"] = static_cast<double>(model.n_support());
}
BENCHMARK(BM_SvmScore);

void BM_InferSegment(benchmark::State& state) {
  lsf::NormStats norm;
  norm.mean = Eigen::MatrixXd::Zero(500, 2);
  norm.stddev = Eigen::MatrixXd::Ones(500, 2);
  const lsf::InferenceBundle bundle{lsf::Preprocessor(lsf::PreprocessConfig{}, 360.0), norm,
                                    lsf::LstmModel::initialize(100, 8), trained_svm(500, 100)};
  const auto x = noise(3600, 9);
  for (auto _ : state) benchmark::DoNotOptimize(lsf::infer_segment(bundle, x));
}
BENCHMARK(BM_InferSegment)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
