#pragma once

// Readers for the PhysioNet three-file record layout: `<name>.hea` text header,
// format-212 packed samples in `<name>.dat`, and the MIT binary annotation stream
// in `<name>.atr`.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsf {

struct SignalSpec {
  std::string file_name;
  int format = 212;
  double gain = 200.0;  // adu per physical unit
  int baseline = 0;     // adu corresponding to 0 physical units
  std::string units = "mV";
  int adc_resolution = 12;
  int adc_zero = 0;
  int initial_value = 0;
  std::int64_t byte_offset = 0;
  std::string description;

  bool operator==(const SignalSpec&) const = default;
};

struct RecordHeader {
  std::string record_name;
  int n_signals = 0;
  double sampling_rate = 0.0;  // Hz
  std::int64_t n_samples = 0;  // frames per signal; 0 = derive from the signal file size
  std::vector<SignalSpec> signals;

  bool operator==(const RecordHeader&) const = default;
};

/// Throws ParseError (with the 1-based line) on malformed lines and
/// UnsupportedFormatError for any storage format other than 212.
RecordHeader parse_header(std::string_view text);

/// Decodes `n_values` interleaved 12-bit samples. Requires ceil(3*n_values/2) bytes.
std::vector<std::int32_t> decode_format212(std::span<const std::uint8_t> bytes, std::size_t n_values);

/// Two-signal convenience: each frame is one 3-byte group holding (signal 0, signal 1).
struct SamplePair {
  std::vector<std::int32_t> first;
  std::vector<std::int32_t> second;
};
SamplePair decode_format212_pair(std::span<const std::uint8_t> bytes, std::size_t n_frames);

/// Inverse of decode_format212. Values must lie in [-2048, 2047]; an odd count is padded with 0.
std::vector<std::uint8_t> encode_format212(std::span<const std::int32_t> values);

struct AnnotationEvent {
  std::int64_t sample = 0;
  int code = 0;
  std::string symbol;
  std::string aux;
  int subtype = 0;
  int channel = 0;
  int num = 0;

  bool operator==(const AnnotationEvent&) const = default;
};

/// Mnemonic for a MIT annotation code, or "unknown" for codes without one.
std::string_view annotation_symbol(int code);
/// Inverse of annotation_symbol; returns -1 when the symbol is not in the table.
int annotation_code(std::string_view symbol);

/// Parses an MIT-format annotation stream. Missing end word is a DecodeError;
/// undefined type codes are kept with symbol "unknown" and reported through warn().
std::vector<AnnotationEvent> read_annotations(std::span<const std::uint8_t> bytes);

struct EcgRecord {
  RecordHeader header;
  std::vector<std::int32_t> samples;  // row-major [n_samples x n_signals], adu
  std::vector<AnnotationEvent> annotations;
  std::string patient_id;

  std::int64_t n_samples() const { return header.n_samples; }
  int n_signals() const { return header.n_signals; }
  std::int32_t at(std::int64_t frame, int signal) const {
    return samples[static_cast<std::size_t>(frame) * static_cast<std::size_t>(header.n_signals) +
                   static_cast<std::size_t>(signal)];
  }
  std::vector<std::int32_t> channel(int signal) const;

  bool operator==(const EcgRecord&) const = default;
};

/// Builds a record, validating sample dimensions and clamping annotations that
/// fall past the end of the signal to the last sample (with a warning).
EcgRecord assemble_record(RecordHeader header, std::vector<std::int32_t> samples,
                          std::vector<AnnotationEvent> annotations);

/// True when `<dir>/<name>.hea` exists and its signal file is present.
bool record_available(const std::filesystem::path& dir, std::string_view name);

/// Loads `<dir>/<name>.hea`, its signal file and `<dir>/<name>.<annotator>` (if present).
EcgRecord load_record(const std::filesystem::path& dir, std::string_view name,
                      std::string_view annotator = "atr");

}  // namespace lsf
