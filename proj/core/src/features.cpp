#include <cmath>
#include <numbers>

#include "lsf/error.hpp"
#include "lsf/preprocess.hpp"

namespace lsf {

HaarCoefficients haar_dwt1(std::span<const double> signal) {
  if (signal.empty()) throw ParameterError("Haar transform of an empty signal");
  const std::size_t half = (signal.size() + 1) / 2;
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  HaarCoefficients out;
  out.approx.resize(half);
  out.detail.resize(half);
  for (std::size_t k = 0; k < half; ++k) {
    const double even = signal[2 * k];
    const double odd = 2 * k + 1 < signal.size() ? signal[2 * k + 1] : even;
    out.approx[k] = (even + odd) * inv_sqrt2;
    out.detail[k] = (even - odd) * inv_sqrt2;
  }
  return out;
}

NormStats fit_norm_stats(std::span<const FeatureTensor> training, NormMode mode, double epsilon) {
  if (training.size() < 2) throw ParameterError("normalization statistics need at least two tensors");
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  const auto rows = training.front().timesteps();
  const auto cols = training.front().channels();
  for (const auto& t : training) {
    if (t.timesteps() != rows || t.channels() != cols) throw ParameterError("feature tensors differ in shape");
  }
  const double n = static_cast<double>(training.size());

  NormStats s;
  s.epsilon = epsilon;
  s.mode = mode;
  s.mean = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& t : training) s.mean += t.values;
  s.mean /= n;
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& t : training) var += (t.values - s.mean).array().square().matrix();
  var /= n;

  if (mode == NormMode::Channel) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      // Pooled over all positions of the channel: E[x^2] - E[x]^2 around the channel mean.
      const double mu = s.mean.col(c).mean();
      const double pooled = (var.col(c).array() + (s.mean.col(c).array() - mu).square()).mean();
      s.mean.col(c).setConstant(mu);
      var.col(c).setConstant(pooled);
    }
  }
  s.stddev = var.cwiseSqrt();
  return s;
}

namespace {

void check_shape(const NormStats& stats, const FeatureTensor& t) {
  if (t.timesteps() != stats.mean.rows() || t.channels() != stats.mean.cols()) {
    throw ParameterError("tensor shape does not match normalization statistics");
  }
}

}  // namespace

FeatureTensor apply_norm(const NormStats& stats, const FeatureTensor& tensor) {
  check_shape(stats, tensor);
  const auto scale = stats.stddev.array().max(stats.epsilon);
  return {((tensor.values.array() - stats.mean.array()) / scale).matrix()};
}

FeatureTensor invert_norm(const NormStats& stats, const FeatureTensor& tensor) {
  check_shape(stats, tensor);
  const auto scale = stats.stddev.array().max(stats.epsilon);
  return {(tensor.values.array() * scale + stats.mean.array()).matrix()};
}

std::vector<double> to_physical(const EcgRecord& record, int channel) {
  if (channel < 0 || channel >= record.n_signals()) {
    throw ParameterError("channel " + std::to_string(channel) + " not present in record " +
                         record.header.record_name);
  }
  const auto& spec = record.header.signals[static_cast<std::size_t>(channel)];
  std::vector<double> out(static_cast<std::size_t>(record.n_samples()));
  for (std::int64_t t = 0; t < record.n_samples(); ++t) {
    out[static_cast<std::size_t>(t)] = (record.at(t, channel) - spec.baseline) / spec.gain;
  }
  return out;
}

Preprocessor::Preprocessor(PreprocessConfig config, double source_hz)
    : config_(config),
      source_hz_(source_hz),
      filter_(design_highpass(config.cutoff_hz, source_hz, config.filter_order)),
      resampler_(source_hz, config.target_hz) {
  if (!(config_.window_s > 0.0)) throw ParameterError("window length must be positive");
  const double native = config_.window_s * source_hz_;
  const double target = config_.window_s * config_.target_hz;
  if (std::abs(native - std::round(native)) > 1e-9 || std::abs(target - std::round(target)) > 1e-9) {
    throw ParameterError("window length must be a whole number of samples at both rates");
  }
}

std::int64_t Preprocessor::native_window() const {
  return static_cast<std::int64_t>(std::llround(config_.window_s * source_hz_));
}

std::int64_t Preprocessor::target_window() const {
  return static_cast<std::int64_t>(std::llround(config_.window_s * config_.target_hz));
}

std::vector<double> Preprocessor::condition(std::span<const double> physical) const {
  auto filtered = config_.zero_phase ? apply_filter_zero_phase(filter_, physical) : apply_filter(filter_, physical);
  return resampler_(filtered);
}

FeatureTensor Preprocessor::featurize(std::span<const double> window) const {
  const auto coeffs = haar_dwt1(window);
  FeatureTensor t;
  t.values.resize(static_cast<Eigen::Index>(coeffs.approx.size()), 2);
  for (std::size_t k = 0; k < coeffs.approx.size(); ++k) {
    t.values(static_cast<Eigen::Index>(k), 0) = coeffs.approx[k];
    t.values(static_cast<Eigen::Index>(k), 1) = coeffs.detail[k];
  }
  if (!t.values.allFinite()) throw ComputationError("non-finite value in feature tensor");
  return t;
}

std::vector<FeatureTensor> Preprocessor::featurize_record(const EcgRecord& record) const {
  if (std::abs(record.header.sampling_rate - source_hz_) > 1e-9) {
    throw ParameterError("record sampling rate differs from the preprocessor's source rate");
  }
  const std::int64_t n_windows = record.n_samples() / native_window();
  std::vector<FeatureTensor> out;
  if (n_windows == 0) return out;
  const auto conditioned = condition(to_physical(record, config_.channel));
  const auto w = target_window();
  out.reserve(static_cast<std::size_t>(n_windows));
  for (std::int64_t k = 0; k < n_windows; ++k) {
    std::span<const double> window(conditioned.data() + k * w, static_cast<std::size_t>(w));
    out.push_back(featurize(window));
  }
  return out;
}

FeatureTensor Preprocessor::featurize_segment(std::span<const double> physical) const {
  if (static_cast<std::int64_t>(physical.size()) != native_window()) {
    throw ParameterError("segment length does not match the configured window");
  }
  auto conditioned = condition(physical);
  conditioned.resize(static_cast<std::size_t>(target_window()));
  return featurize(conditioned);
}

}  // namespace lsf
