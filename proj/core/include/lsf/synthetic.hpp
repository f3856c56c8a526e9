#pragma once

// Synthetic single-lead ECG records with beat annotations. Normal windows have
// a steady sinus rhythm of 'N' beats; abnormal windows have irregular RR
// intervals and premature wide, inverted 'V' beats. Baseline wander and white
// noise are added to every record.

#include <cstdint>
#include <string>
#include <vector>

#include "lsf/wfdb.hpp"

namespace lsf {

struct SyntheticConfig {
  double sampling_rate = 360.0;
  int windows_per_record = 20;
  double window_s = 10.0;
  double abnormal_fraction = 0.4;
  double noise_mv = 0.03;
  double wander_mv = 0.3;
  double gain = 200.0;
  int baseline = 1024;
};

/// One record; every window is abnormal with probability abnormal_fraction.
EcgRecord synthesize_record(const std::string& name, const SyntheticConfig& config, std::uint64_t seed);

/// `n_records` records named <prefix>000, <prefix>001, ... with seeds derived from `seed`.
std::vector<EcgRecord> synthesize_dataset(int n_records, const SyntheticConfig& config, std::uint64_t seed,
                                          const std::string& prefix = "syn");

}  // namespace lsf
