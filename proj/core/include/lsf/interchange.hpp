#pragma once

// Line-oriented text form of an EcgRecord, used for fixtures and synthetic records.
//
//   LSF-INTERCHANGE 1
//   record <name>
//   patient <id>
//   sampling_rate <hz>
//   n_samples <frames>
//   n_signals <k>
//   signal <file> <format> <gain> <baseline> <units> <adc_res> <adc_zero> <initial> <byte_offset> <description>
//   ...                                   (k signal lines)
//   samples
//   <v_0> ... <v_{k-1}>                   (one line per frame, adu integers)
//   annotations <m>
//   <sample> <code> <symbol> <subtype> <channel> <num> <aux>   (m lines)
//   end
//
// Text fields are percent-escaped: '%', whitespace and non-printable bytes become
// %XX; an empty field is written as a lone '%'. Reals use 17 significant digits
// so import(export(r)) == r exactly.

#include <string>
#include <string_view>

#include "lsf/wfdb.hpp"

namespace lsf {

inline constexpr std::string_view kInterchangeMagic = "LSF-INTERCHANGE";
inline constexpr int kInterchangeVersion = 1;

std::string export_interchange(const EcgRecord& record);
/// Throws ParseError naming the offending line on any schema mismatch.
EcgRecord import_interchange(std::string_view text);

}  // namespace lsf
