#pragma once

// Signal conditioning that turns a raw single-lead recording into fixed-size
// feature tensors: high-pass IIR filter, rational polyphase resampling to
// 100 Hz, one level of the Haar DWT and per-position z-score normalization.

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "lsf/wfdb.hpp"

namespace lsf {

/// y = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2) x
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct FilterSpec {
  double cutoff_hz = 0.0;
  double sampling_rate = 0.0;
  int order = 0;
  std::vector<double> b;  // numerator, b[0..order]
  std::vector<double> a;  // denominator, a[0] == 1
  /// Cascade realization. When non-empty it is what gets evaluated and applied;
  /// b and a are then the expanded product, kept for reference.
  std::vector<Biquad> sections;
};

/// Butterworth high-pass designed with the bilinear transform (pre-warped so the
/// -3 dB point lands exactly on `cutoff_hz`). Throws ParameterError unless
/// 0 < cutoff < fs/2 and order >= 1.
FilterSpec design_highpass(double cutoff_hz, double sampling_rate, int order);

/// H(e^{jw}) at `freq_hz`.
std::complex<double> frequency_response(const FilterSpec& spec, double freq_hz);

/// Schur-Cohn test: true iff every root of the denominator lies strictly inside the unit circle.
bool is_stable(const FilterSpec& spec);

/// Causal difference-equation filtering with zero initial conditions.
std::vector<double> apply_filter(const FilterSpec& spec, std::span<const double> signal);

/// Forward pass, then a second pass over the time-reversed output.
std::vector<double> apply_filter_zero_phase(const FilterSpec& spec, std::span<const double> signal);

struct ResampleRatio {
  int up = 1;
  int down = 1;
};

/// Reduced integer ratio to/from. Throws ParameterError when the rates are not a
/// small rational ratio (both terms at most 1000).
ResampleRatio rational_ratio(double from_hz, double to_hz);

/// Polyphase FIR resampler. The anti-aliasing low-pass is a Kaiser-windowed sinc
/// (beta 5) with half length 10*max(up, down) and cutoff at the lower of the two
/// Nyquist rates; each polyphase branch is scaled to unit DC gain.
class Resampler {
 public:
  Resampler(double from_hz, double to_hz);

  /// Output length is ceil(len * up / down); output sample n sits at time n / to_hz.
  std::vector<double> operator()(std::span<const double> signal) const;

  ResampleRatio ratio() const { return ratio_; }
  const std::vector<double>& taps() const { return taps_; }

 private:
  ResampleRatio ratio_;
  int half_len_ = 0;
  std::vector<double> taps_;
};

std::vector<double> resample(std::span<const double> signal, double from_hz, double to_hz = 100.0);

struct HaarCoefficients {
  std::vector<double> approx;  // cA1
  std::vector<double> detail;  // cD1
};

/// Single-level orthonormal Haar transform on non-overlapping pairs
/// (S[2k], S[2k+1]). Odd lengths repeat the final sample.
HaarCoefficients haar_dwt1(std::span<const double> signal);

/// [timesteps x 2] matrix: column 0 = cA1, column 1 = cD1.
struct FeatureTensor {
  Eigen::MatrixXd values;

  Eigen::Index timesteps() const { return values.rows(); }
  Eigen::Index channels() const { return values.cols(); }
  bool operator==(const FeatureTensor& o) const {
    return values.rows() == o.values.rows() && values.cols() == o.values.cols() && values == o.values;
  }
};

enum class NormMode { Elementwise, Channel };

struct NormStats {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd stddev;
  double epsilon = 1e-8;
  NormMode mode = NormMode::Elementwise;
};

/// Population mean/std at every (timestep, channel) position, or per channel in
/// NormMode::Channel. Requires >= 2 tensors of identical shape.
NormStats fit_norm_stats(std::span<const FeatureTensor> training, NormMode mode = NormMode::Elementwise,
                         double epsilon = 1e-8);
/// (x - mean) / max(std, epsilon), element-wise.
FeatureTensor apply_norm(const NormStats& stats, const FeatureTensor& tensor);
/// Inverse of apply_norm.
FeatureTensor invert_norm(const NormStats& stats, const FeatureTensor& tensor);

struct PreprocessConfig {
  double cutoff_hz = 0.5;
  int filter_order = 4;
  double target_hz = 100.0;
  bool zero_phase = false;
  int channel = 0;
  double window_s = 10.0;
};

/// Physical units of one channel: (adu - baseline) / gain.
std::vector<double> to_physical(const EcgRecord& record, int channel);

/// Bundles the filter and resampler for one source rate. Immutable, so it can be
/// shared between threads.
class Preprocessor {
 public:
  Preprocessor(PreprocessConfig config, double source_hz);

  /// High-pass filter then resample to the target rate.
  std::vector<double> condition(std::span<const double> physical) const;
  /// Haar features of one window already at the target rate.
  FeatureTensor featurize(std::span<const double> window) const;
  /// Filters and resamples the whole record, then cuts one tensor per complete
  /// native-rate window (trailing partial window dropped).
  std::vector<FeatureTensor> featurize_record(const EcgRecord& record) const;
  /// Conditions a single raw window in isolation (streaming/latency path).
  FeatureTensor featurize_segment(std::span<const double> physical) const;

  const PreprocessConfig& config() const { return config_; }
  const FilterSpec& filter() const { return filter_; }
  double source_hz() const { return source_hz_; }
  /// Samples per window at the source rate.
  std::int64_t native_window() const;
  /// Samples per window at the target rate.
  std::int64_t target_window() const;

 private:
  PreprocessConfig config_;
  double source_hz_;
  FilterSpec filter_;
  Resampler resampler_;
};

}  // namespace lsf
