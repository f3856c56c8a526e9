#include <cmath>
#include <numbers>
#include <numeric>

#include "lsf/error.hpp"
#include "lsf/preprocess.hpp"

namespace lsf {
namespace {

constexpr int kMaxRatioTerm = 1000;
constexpr double kKaiserBeta = 5.0;
constexpr int kHalfLenPerRate = 10;

// Zeroth-order modified Bessel function of the first kind (power series).
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

ResampleRatio rational_ratio(double from_hz, double to_hz) {
  if (!(from_hz > 0.0) || !(to_hz > 0.0) || !std::isfinite(from_hz) || !std::isfinite(to_hz)) {
    throw ParameterError("resampling rates must be positive and finite");
  }
  const double target = to_hz / from_hz;
  for (int down = 1; down <= kMaxRatioTerm; ++down) {
    const double up_real = target * down;
    const double up = std::round(up_real);
    if (up >= 1.0 && up <= kMaxRatioTerm && std::abs(up - up_real) <= 1e-9 * up_real) {
      const int u = static_cast<int>(up);
      const int g = std::gcd(u, down);
      return {u / g, down / g};
    }
  }
  throw ParameterError("no small rational ratio between " + std::to_string(from_hz) + " Hz and " +
                       std::to_string(to_hz) + " Hz");
}

Resampler::Resampler(double from_hz, double to_hz) : ratio_(rational_ratio(from_hz, to_hz)) {
  const int up = ratio_.up;
  const int down = ratio_.down;
  const int max_rate = std::max(up, down);
  half_len_ = kHalfLenPerRate * max_rate;
  const int n_taps = 2 * half_len_ + 1;
  const double cutoff = 1.0 / max_rate;  // fraction of the upsampled Nyquist rate

  taps_.resize(static_cast<std::size_t>(n_taps));
  const double denom = bessel_i0(kKaiserBeta);
  for (int n = 0; n < n_taps; ++n) {
    const double m = n - half_len_;
    const double x = cutoff * m;
    const double sinc = m == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double r = 2.0 * n / (n_taps - 1) - 1.0;
    const double window = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
    taps_[static_cast<std::size_t>(n)] = cutoff * sinc * window;
  }
  // Each output sample uses the taps of one polyphase branch (k = phase mod up);
  // scaling every branch to unit sum makes the resampler exactly DC-preserving.
  for (int phase = 0; phase < up; ++phase) {
    double sum = 0.0;
    for (int k = phase; k < n_taps; k += up) sum += taps_[static_cast<std::size_t>(k)];
    for (int k = phase; k < n_taps; k += up) taps_[static_cast<std::size_t>(k)] /= sum;
  }
}

std::vector<double> Resampler::operator()(std::span<const double> signal) const {
  const auto up = static_cast<std::int64_t>(ratio_.up);
  const auto down = static_cast<std::int64_t>(ratio_.down);
  const auto len = static_cast<std::int64_t>(signal.size());
  const std::int64_t out_len = (len * up + down - 1) / down;
  const auto n_taps = static_cast<std::int64_t>(taps_.size());

  std::vector<double> out(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    // y[n] = sum_k h[k] * xu[n*down + half_len - k], xu[m] = x[m/up] when up | m.
    const std::int64_t centre = n * down + half_len_;
    const std::int64_t k0 = centre % up;
    double acc = 0.0;
    for (std::int64_t k = k0; k < n_taps; k += up) {
      const std::int64_t m = (centre - k) / up;
      if (m < 0) break;
      if (m < len) acc += taps_[static_cast<std::size_t>(k)] * signal[static_cast<std::size_t>(m)];
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

std::vector<double> resample(std::span<const double> signal, double from_hz, double to_hz) {
  return Resampler(from_hz, to_hz)(signal);
}

}  // namespace lsf
