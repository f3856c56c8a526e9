#include "lsf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "lsf/error.hpp"
#include "lsf/random.hpp"

namespace lsf {
namespace {

struct Wave {
  double offset_s;
  double width_s;
  double amplitude_mv;
};

constexpr Wave kNormalBeat[] = {
    {-0.20, 0.025, 0.15}, {-0.04, 0.010, -0.10}, {0.00, 0.012, 1.20}, {0.03, 0.010, -0.25}, {0.25, 0.050, 0.30}};
constexpr Wave kVentricularBeat[] = {{0.00, 0.040, -1.00}, {0.08, 0.030, 0.40}, {0.30, 0.070, 0.40}};

struct Beat {
  double time_s;
  bool ventricular;
};

void render(std::vector<double>& mv, double fs, const Beat& beat) {
  const std::span<const Wave> waves = beat.ventricular ? std::span<const Wave>(kVentricularBeat)
                                                       : std::span<const Wave>(kNormalBeat);
  const auto n = static_cast<std::int64_t>(mv.size());
  const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>((beat.time_s - 0.6) * fs));
  const auto hi = std::min<std::int64_t>(n, static_cast<std::int64_t>((beat.time_s + 0.7) * fs) + 1);
  for (auto k = lo; k < hi; ++k) {
    const double t = static_cast<double>(k) / fs - beat.time_s;
    double v = 0.0;
    for (const auto& w : waves) {
      const double z = (t - w.offset_s) / w.width_s;
      v += w.amplitude_mv * std::exp(-0.5 * z * z);
    }
    mv[static_cast<std::size_t>(k)] += v;
  }
}

std::vector<Beat> window_beats(Rng& rng, double start, double end, double base_rr, bool abnormal) {
  std::vector<Beat> beats;
  double t = start + rng.uniform(0.15, 0.6);
  while (t < end - 0.1) {
    bool ventricular = false;
    double rr;
    if (abnormal) {
      rr = base_rr * rng.uniform(0.6, 1.4);
      if (!beats.empty() && rng.uniform() < 0.25) {
        // Premature ectopic beat followed by a compensatory pause.
        t = beats.back().time_s + 0.6 * base_rr;
        ventricular = true;
        rr = 1.4 * base_rr;
      }
    } else {
      rr = base_rr * (1.0 + 0.02 * rng.normal());
    }
    if (t >= end - 0.1) break;
    beats.push_back({t, ventricular});
    t += rr;
  }
  const auto has_ectopic = std::any_of(beats.begin(), beats.end(), [](const Beat& b) { return b.ventricular; });
  if (abnormal && !beats.empty() && !has_ectopic) {
    beats[beats.size() / 2].ventricular = true;
  }
  return beats;
}

}  // namespace

EcgRecord synthesize_record(const std::string& name, const SyntheticConfig& config, std::uint64_t seed) {
  if (!(config.sampling_rate > 0.0) || config.windows_per_record < 1 || !(config.window_s > 1.0)) {
    throw ParameterError("invalid synthetic record configuration");
  }
  if (!(config.abnormal_fraction >= 0.0 && config.abnormal_fraction <= 1.0)) {
    throw ParameterError("abnormal fraction must lie in [0, 1]");
  }
  Rng rng(seed);
  const double fs = config.sampling_rate;
  const auto n = static_cast<std::int64_t>(std::llround(config.windows_per_record * config.window_s * fs));
  std::vector<double> mv(static_cast<std::size_t>(n), 0.0);
  const double base_rr = rng.uniform(0.7, 1.0);

  std::vector<AnnotationEvent> annotations;
  for (int w = 0; w < config.windows_per_record; ++w) {
    const double start = w * config.window_s;
    const bool abnormal = rng.uniform() < config.abnormal_fraction;
    for (const auto& beat : window_beats(rng, start, start + config.window_s, base_rr, abnormal)) {
      render(mv, fs, beat);
      AnnotationEvent a;
      a.sample = std::llround(beat.time_s * fs);
      a.symbol = beat.ventricular ? "V" : "N";
      a.code = annotation_code(a.symbol);
      annotations.push_back(std::move(a));
    }
  }

  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double wander_hz = rng.uniform(0.15, 0.35);
  std::vector<std::int32_t> adu(mv.size());
  for (std::size_t k = 0; k < mv.size(); ++k) {
    const double t = static_cast<double>(k) / fs;
    const double v = mv[k] + config.wander_mv * std::sin(2.0 * std::numbers::pi * wander_hz * t + phase) +
                     config.noise_mv * rng.normal();
    const auto q = static_cast<std::int32_t>(std::lround(v * config.gain)) + config.baseline;
    adu[k] = std::clamp<std::int32_t>(q, -2048, 2047);
  }

  RecordHeader header;
  header.record_name = name;
  header.n_signals = 1;
  header.sampling_rate = fs;
  header.n_samples = n;
  SignalSpec spec;
  spec.file_name = name + ".dat";
  spec.gain = config.gain;
  spec.baseline = config.baseline;
  spec.adc_zero = config.baseline;
  spec.initial_value = adu.empty() ? 0 : adu.front();
  spec.description = "MLII";
  header.signals.push_back(spec);

  auto record = assemble_record(std::move(header), std::move(adu), std::move(annotations));
  record.patient_id = name;
  return record;
}

std::vector<EcgRecord> synthesize_dataset(int n_records, const SyntheticConfig& config, std::uint64_t seed,
                                          const std::string& prefix) {
  if (n_records < 1) throw ParameterError("need at least one synthetic record");
  Rng seeds(seed);
  std::vector<EcgRecord> out;
  out.reserve(static_cast<std::size_t>(n_records));
  for (int r = 0; r < n_records; ++r) {
    char name[32];
    std::snprintf(name, sizeof name, "%03d", r);
    out.push_back(synthesize_record(prefix + name, config, seeds.next()));
  }
  return out;
}

}  // namespace lsf
