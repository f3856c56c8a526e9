#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lsf/error.hpp"
#include "lsf/preprocess.hpp"
#include "lsf/random.hpp"

namespace {

std::vector<double> random_signal(lsf::Rng& rng, std::size_t n) {
  std::vector<double> s(n);
  for (auto& v : s) v = rng.normal();
  return s;
}

double energy(std::span<const double> s) {
  double e = 0.0;
  for (double v : s) e += v * v;
  return e;
}

}  // namespace

TEST(Highpass, RejectsDc) {
  const auto f = lsf::design_highpass(0.5, 360.0, 4);
  EXPECT_LT(std::abs(lsf::frequency_response(f, 0.0)), 1e-12);
}

TEST(Highpass, MinusThreeDbAtCutoff) {
  for (double fs : {100.0, 250.0, 360.0}) {
    for (int order : {1, 2, 3, 4, 6}) {
      const auto f = lsf::design_highpass(0.5, fs, order);
      EXPECT_NEAR(std::abs(lsf::frequency_response(f, 0.5)), 1.0 / std::sqrt(2.0), 1e-6) << fs << " " << order;
    }
  }
}

TEST(Highpass, FlatPassband) {
  const auto f = lsf::design_highpass(0.5, 360.0, 4);
  EXPECT_NEAR(std::abs(lsf::frequency_response(f, 5.0)), 1.0, 0.01);
  EXPECT_NEAR(std::abs(lsf::frequency_response(f, 40.0)), 1.0, 1e-6);
}

TEST(Highpass, MatchesButterworthMagnitude) {
  // |H| of the bilinear Butterworth high-pass: 1 / sqrt(1 + (tan(pi fc/fs) / tan(pi f/fs))^(2n)).
  const double fs = 360.0, fc = 0.5;
  const int n = 4;
  const auto f = lsf::design_highpass(fc, fs, n);
  for (double hz : {0.1, 0.3, 0.7, 2.0, 20.0, 150.0}) {
    const double r = std::tan(std::numbers::pi * fc / fs) / std::tan(std::numbers::pi * hz / fs);
    EXPECT_NEAR(std::abs(lsf::frequency_response(f, hz)), 1.0 / std::sqrt(1.0 + std::pow(r, 2 * n)), 1e-9) << hz;
  }
}

TEST(Highpass, BadParameters) {
  EXPECT_THROW(lsf::design_highpass(0.0, 360.0, 4), lsf::ParameterError);
  EXPECT_THROW(lsf::design_highpass(200.0, 360.0, 4), lsf::ParameterError);
  EXPECT_THROW(lsf::design_highpass(0.5, 360.0, 0), lsf::ParameterError);
}

TEST(Highpass, Stable) {
  for (double fs : {100.0, 250.0, 360.0}) {
    for (int order = 1; order <= 8; ++order) EXPECT_TRUE(lsf::is_stable(lsf::design_highpass(0.5, fs, order)));
  }
  lsf::FilterSpec unstable;
  unstable.b = {1.0, 0.0};
  unstable.a = {1.0, -1.5};
  EXPECT_FALSE(lsf::is_stable(unstable));
}

TEST(ApplyFilter, ConstantDecays) {
  const auto f = lsf::design_highpass(0.5, 360.0, 4);
  const std::vector<double> c(360 * 60, 3.0);
  const auto y = lsf::apply_filter(f, c);
  for (std::size_t t = y.size() - 360; t < y.size(); ++t) EXPECT_LT(std::abs(y[t]), 1e-6 * 3.0);
}

TEST(ApplyFilter, ZeroInZeroOut) {
  const auto f = lsf::design_highpass(0.5, 360.0, 4);
  for (double v : lsf::apply_filter(f, std::vector<double>(1000, 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(ApplyFilter, ImpulseResponseSumsToZeroAndDecays) {
  const double fs = 360.0, fc = 0.5;
  const int order = 4;
  const auto f = lsf::design_highpass(fc, fs, order);
  const auto n = static_cast<std::size_t>(10.0 * order / fc * fs);
  std::vector<double> impulse(n + 1000, 0.0);
  impulse[0] = 1.0;
  const auto h = lsf::apply_filter(f, impulse);
  double sum = 0.0;
  for (double v : h) sum += v;
  EXPECT_NEAR(sum, 0.0, 1e-6);
  for (std::size_t t = n; t < h.size(); ++t) EXPECT_LT(std::abs(h[t]), 1e-8);
}

TEST(ApplyFilter, ZeroPhaseKeepsPassbandAligned) {
  const double fs = 360.0;
  const auto f = lsf::design_highpass(0.5, fs, 4);
  std::vector<double> x(3600);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(2 * std::numbers::pi * 10.0 * t / fs) + 2.0;
  const auto y = lsf::apply_filter_zero_phase(f, x);
  for (std::size_t t = 1200; t < 2400; ++t) EXPECT_NEAR(y[t], x[t] - 2.0, 1e-2);
}

TEST(Resample, Ratios) {
  EXPECT_EQ(lsf::rational_ratio(360, 100).up, 5);
  EXPECT_EQ(lsf::rational_ratio(360, 100).down, 18);
  EXPECT_EQ(lsf::rational_ratio(250, 100).up, 2);
  EXPECT_EQ(lsf::rational_ratio(250, 100).down, 5);
  EXPECT_THROW(lsf::rational_ratio(360.123456, 100), lsf::ParameterError);
}

TEST(Resample, Lengths) {
  EXPECT_EQ(lsf::resample(std::vector<double>(3600, 0.0), 360.0).size(), 1000u);
  EXPECT_EQ(lsf::resample(std::vector<double>(2500, 0.0), 250.0).size(), 1000u);
  EXPECT_EQ(lsf::resample(std::vector<double>(1000, 0.0), 100.0).size(), 1000u);
  EXPECT_EQ(lsf::resample(std::vector<double>(7, 0.0), 360.0).size(), 2u);
}

TEST(Resample, ConstantPreserved) {
  for (double fs : {360.0, 250.0}) {
    const auto y = lsf::resample(std::vector<double>(static_cast<std::size_t>(fs * 10), 1.7), fs);
    for (std::size_t n = 50; n + 50 < y.size(); ++n) EXPECT_NEAR(y[n], 1.7, 1e-6) << fs << " " << n;
  }
}

TEST(Resample, SinusoidAt250) {
  const double fs = 250.0;
  std::vector<double> x(2500);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(2 * std::numbers::pi * 5.0 * t / fs);
  const auto y = lsf::resample(x, fs);
  double err = 0.0, ref = 0.0;
  for (std::size_t n = 50; n + 50 < y.size(); ++n) {
    const double want = std::sin(2 * std::numbers::pi * 5.0 * n / 100.0);
    err += (y[n] - want) * (y[n] - want);
    ref += want * want;
  }
  EXPECT_LT(std::sqrt(err / ref), 0.01);
}

TEST(Resample, SinusoidAt360) {
  const double fs = 360.0;
  std::vector<double> x(3600);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::cos(2 * std::numbers::pi * 12.0 * t / fs);
  const auto y = lsf::resample(x, fs);
  double err = 0.0, ref = 0.0;
  for (std::size_t n = 50; n + 50 < y.size(); ++n) {
    const double want = std::cos(2 * std::numbers::pi * 12.0 * n / 100.0);
    err += (y[n] - want) * (y[n] - want);
    ref += want * want;
  }
  EXPECT_LT(std::sqrt(err / ref), 0.01);
}

TEST(Resample, AttenuatesAboveNewNyquist) {
  const double fs = 360.0;
  std::vector<double> x(3600);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(2 * std::numbers::pi * 80.0 * t / fs);
  const auto y = lsf::resample(x, fs);
  const std::span<const double> mid(y.data() + 100, y.size() - 200);
  EXPECT_LT(std::sqrt(energy(mid) / mid.size()), 0.01);
}

TEST(Haar, HandCases) {
  const auto c = lsf::haar_dwt1(std::vector<double>{2.0, 2.0, 2.0, 2.0});
  ASSERT_EQ(c.approx.size(), 2u);
  for (double v : c.approx) EXPECT_NEAR(v, 2.0 * std::sqrt(2.0), 1e-15);
  for (double v : c.detail) EXPECT_EQ(v, 0.0);
  const auto d = lsf::haar_dwt1(std::vector<double>{1.0, 3.0});
  EXPECT_NEAR(d.approx[0], 2.0 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(d.detail[0], -std::sqrt(2.0), 1e-15);
}

TEST(Haar, OddLengthRepeatsLastSample) {
  const auto c = lsf::haar_dwt1(std::vector<double>{1.0, 3.0, 5.0});
  ASSERT_EQ(c.approx.size(), 2u);
  EXPECT_NEAR(c.approx[1], 10.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(c.detail[1], 0.0, 1e-15);
}

TEST(Haar, Parseval) {
  lsf::Rng rng(2);
  for (int k = 0; k < 500; ++k) {
    const auto s = random_signal(rng, 2 * (1 + rng.below(300)));
    const auto c = lsf::haar_dwt1(s);
    EXPECT_NEAR(energy(c.approx) + energy(c.detail), energy(s), 1e-9 * energy(s));
  }
}

TEST(Norm, MeanMapsToZero) {
  std::vector<lsf::FeatureTensor> ts(2);
  ts[0].values = Eigen::MatrixXd::Zero(3, 2);
  ts[1].values = Eigen::MatrixXd::Constant(3, 2, 2.0);
  const auto st = lsf::fit_norm_stats(ts);
  EXPECT_TRUE(st.mean.isApproxToConstant(1.0));
  EXPECT_TRUE(st.stddev.isApproxToConstant(1.0));
  lsf::FeatureTensor one{Eigen::MatrixXd::Ones(3, 2)};
  EXPECT_TRUE(lsf::apply_norm(st, one).values.isZero(0.0));
}

TEST(Norm, ZeroVarianceClamped) {
  std::vector<lsf::FeatureTensor> ts(2, lsf::FeatureTensor{Eigen::MatrixXd::Constant(4, 2, 5.0)});
  const auto st = lsf::fit_norm_stats(ts);
  const auto out = lsf::apply_norm(st, ts[0]);
  EXPECT_TRUE(out.values.allFinite());
  EXPECT_TRUE(out.values.isZero(0.0));
}

TEST(Norm, InvertRoundTrip) {
  lsf::Rng rng(4);
  std::vector<lsf::FeatureTensor> ts(10);
  for (auto& t : ts) {
    t.values.resize(20, 2);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values.data()[i] = rng.normal(3.0, 2.0);
  }
  for (auto mode : {lsf::NormMode::Elementwise, lsf::NormMode::Channel}) {
    const auto st = lsf::fit_norm_stats(ts, mode);
    for (const auto& t : ts) {
      EXPECT_LT((lsf::invert_norm(st, lsf::apply_norm(st, t)).values - t.values).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Norm, ChannelModeSharesStatsOverTime) {
  std::vector<lsf::FeatureTensor> ts(2);
  ts[0].values = Eigen::MatrixXd::Zero(5, 2);
  ts[1].values = Eigen::MatrixXd::Zero(5, 2);
  ts[1].values.col(0).setConstant(4.0);
  const auto st = lsf::fit_norm_stats(ts, lsf::NormMode::Channel);
  const auto out = lsf::apply_norm(st, ts[1]);
  EXPECT_TRUE(out.values.col(0).isApproxToConstant(1.0));
}

TEST(Norm, NeedsTwoTensors) {
  std::vector<lsf::FeatureTensor> one(1, lsf::FeatureTensor{Eigen::MatrixXd::Zero(2, 2)});
  EXPECT_THROW(lsf::fit_norm_stats(one), lsf::ParameterError);
}

TEST(Preprocessor, ShapeContract) {
  for (double fs : {360.0, 250.0}) {
    const lsf::Preprocessor pre({}, fs);
    EXPECT_EQ(pre.native_window(), static_cast<std::int64_t>(fs * 10));
    EXPECT_EQ(pre.target_window(), 1000);
    lsf::Rng rng(9);
    const auto x = random_signal(rng, static_cast<std::size_t>(fs * 10));
    const auto t = pre.featurize_segment(x);
    EXPECT_EQ(t.timesteps(), 500);
    EXPECT_EQ(t.channels(), 2);
    EXPECT_EQ(pre.featurize_segment(x), t);
  }
}

TEST(Preprocessor, RecordWindowsDropPartialTail) {
  lsf::RecordHeader h;
  h.record_name = "r";
  h.n_signals = 1;
  h.sampling_rate = 360;
  h.n_samples = 360 * 25;
  h.signals.resize(1);
  h.signals[0].gain = 200;
  lsf::EcgRecord r;
  r.header = h;
  lsf::Rng rng(1);
  r.samples.resize(static_cast<std::size_t>(h.n_samples));
  for (auto& v : r.samples) v = static_cast<std::int32_t>(rng.below(400)) - 200;
  const lsf::Preprocessor pre({}, 360.0);
  const auto ts = pre.featurize_record(r);
  ASSERT_EQ(ts.size(), 2u);
  for (const auto& t : ts) EXPECT_EQ(t.timesteps(), 500);
  EXPECT_EQ(pre.featurize_record(r)[1], ts[1]);
}

TEST(Preprocessor, PhysicalUnits) {
  lsf::EcgRecord r;
  r.header.n_signals = 1;
  r.header.n_samples = 2;
  r.header.signals.resize(1);
  r.header.signals[0].gain = 200;
  r.header.signals[0].baseline = 1024;
  r.samples = {1024, 1224};
  const auto p = lsf::to_physical(r, 0);
  EXPECT_DOUBLE_EQ(p[0], 0.0);
  EXPECT_DOUBLE_EQ(p[1], 1.0);
  EXPECT_THROW(lsf::to_physical(r, 1), lsf::ParameterError);
}
