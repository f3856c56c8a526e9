#include <algorithm>
#include <cmath>
#include <numbers>

#include "lsf/error.hpp"
#include "lsf/preprocess.hpp"

namespace lsf {
namespace {

using cd = std::complex<double>;

// Coefficients of prod_k (1 - r_k z^-1), highest power of z^-1 last.
std::vector<cd> expand_roots(const std::vector<cd>& roots) {
  std::vector<cd> c{1.0};
  for (const auto& r : roots) {
    c.push_back(0.0);
    for (std::size_t i = c.size() - 1; i > 0; --i) c[i] -= r * c[i - 1];
  }
  return c;
}

cd eval_poly(const std::vector<double>& c, cd zinv) {
  cd acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * zinv + *it;
  return acc;
}

}  // namespace

FilterSpec design_highpass(double cutoff_hz, double sampling_rate, int order) {
  if (!(sampling_rate > 0.0)) throw ParameterError("sampling rate must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < sampling_rate / 2.0)) {
    throw ParameterError("high-pass cutoff must lie strictly between 0 and the Nyquist frequency");
  }
  if (order < 1) throw ParameterError("filter order must be at least 1");

  const double two_fs = 2.0 * sampling_rate;
  const double warped = two_fs * std::tan(std::numbers::pi * cutoff_hz / sampling_rate);

  std::vector<cd> poles;
  poles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const cd lp_pole = std::polar(1.0, theta);
    const cd hp_pole = warped / lp_pole;
    poles.push_back((two_fs + hp_pole) / (two_fs - hp_pole));
  }

  FilterSpec spec;
  spec.cutoff_hz = cutoff_hz;
  spec.sampling_rate = sampling_rate;
  spec.order = order;

  const auto den = expand_roots(poles);
  spec.a.resize(den.size());
  std::transform(den.begin(), den.end(), spec.a.begin(), [](cd v) { return v.real(); });

  // Conjugate pairs (k, order-1-k), plus the real pole at the middle for odd
  // orders. Each section has unit gain at Nyquist (z = -1).
  for (int k = 0; k < order / 2; ++k) {
    const cd p = poles[static_cast<std::size_t>(k)];
    Biquad s;
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    const double g = (1.0 - s.a1 + s.a2) / 4.0;
    s.b0 = g;
    s.b1 = -2.0 * g;
    s.b2 = g;
    spec.sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double p = poles[static_cast<std::size_t>(order / 2)].real();
    Biquad s;
    s.a1 = -p;
    const double g = (1.0 + p) / 2.0;
    s.b0 = g;
    s.b1 = -g;
    spec.sections.push_back(s);
  }

  // Numerator (1 - z^-1)^order, scaled for unit gain at Nyquist.
  spec.b.assign(static_cast<std::size_t>(order) + 1, 0.0);
  double binom = 1.0;
  for (int j = 0; j <= order; ++j) {
    spec.b[static_cast<std::size_t>(j)] = (j % 2 == 0 ? 1.0 : -1.0) * binom;
    binom = binom * (order - j) / (j + 1);
  }
  const double nyquist_gain = std::abs(eval_poly(spec.b, -1.0) / eval_poly(spec.a, -1.0));
  for (auto& v : spec.b) v /= nyquist_gain;
  return spec;
}

std::complex<double> frequency_response(const FilterSpec& spec, double freq_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz / spec.sampling_rate;
  const cd zinv = std::polar(1.0, -w);
  if (spec.sections.empty()) return eval_poly(spec.b, zinv) / eval_poly(spec.a, zinv);
  cd h = 1.0;
  for (const auto& s : spec.sections) {
    h *= eval_poly({s.b0, s.b1, s.b2}, zinv) / eval_poly({1.0, s.a1, s.a2}, zinv);
  }
  return h;
}

namespace {

// Schur-Cohn recursion on a denominator polynomial.
bool stable_polynomial(const std::vector<double>& a) {
  if (a.empty() || a[0] == 0.0) return false;
  std::vector<double> p(a.size());
  std::transform(a.begin(), a.end(), p.begin(), [&](double v) { return v / a[0]; });
  while (p.size() > 1) {
    const std::size_t m = p.size() - 1;
    const double k = p[m];
    if (!(std::abs(k) < 1.0)) return false;
    std::vector<double> q(m);
    for (std::size_t i = 0; i < m; ++i) q[i] = (p[i] - k * p[m - i]) / (1.0 - k * k);
    p = std::move(q);
  }
  return true;
}

}  // namespace

bool is_stable(const FilterSpec& spec) {
  if (spec.sections.empty()) return stable_polynomial(spec.a);
  return std::all_of(spec.sections.begin(), spec.sections.end(),
                     [](const Biquad& s) { return stable_polynomial({1.0, s.a1, s.a2}); });
}

std::vector<double> apply_filter(const FilterSpec& spec, std::span<const double> signal) {
  if (signal.empty()) throw ParameterError("cannot filter an empty signal");
  if (!spec.sections.empty()) {
    std::vector<double> out(signal.begin(), signal.end());
    // Transposed direct form II per section.
    for (const auto& s : spec.sections) {
      double s1 = 0.0, s2 = 0.0;
      for (auto& v : out) {
        const double x = v;
        const double y = s.b0 * x + s1;
        s1 = s.b1 * x - s.a1 * y + s2;
        s2 = s.b2 * x - s.a2 * y;
        v = y;
      }
    }
    return out;
  }
  if (spec.a.empty() || spec.a.size() != spec.b.size()) throw ParameterError("malformed filter coefficients");
  const std::size_t n = spec.a.size();
  const double a0 = spec.a[0];
  std::vector<double> b(n), a(n);
  for (std::size_t j = 0; j < n; ++j) {
    b[j] = spec.b[j] / a0;
    a[j] = spec.a[j] / a0;
  }
  std::vector<double> state(n, 0.0);
  std::vector<double> out(signal.size());
  for (std::size_t t = 0; t < signal.size(); ++t) {
    const double x = signal[t];
    const double y = b[0] * x + state[0];
    for (std::size_t j = 1; j < n; ++j) state[j - 1] = b[j] * x - a[j] * y + state[j];
    out[t] = y;
  }
  return out;
}

std::vector<double> apply_filter_zero_phase(const FilterSpec& spec, std::span<const double> signal) {
  auto forward = apply_filter(spec, signal);
  std::reverse(forward.begin(), forward.end());
  auto backward = apply_filter(spec, forward);
  std::reverse(backward.begin(), backward.end());
  return backward;
}

}  // namespace lsf
