#include "lsf/wfdb.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

#include "lsf/container.hpp"
#include "lsf/error.hpp"
#include "lsf/log.hpp"

namespace lsf {
namespace {

constexpr int kFormat212 = 212;

constexpr int kCodeShift = 10;
constexpr std::uint16_t kDataMask = 0x03FF;
constexpr int kMaxAnnotationCode = 49;
constexpr int kSkip = 59;
constexpr int kNum = 60;
constexpr int kSub = 61;
constexpr int kChan = 62;
constexpr int kAux = 63;

// Indexed by MIT annotation code; empty entries have no defined mnemonic.
constexpr std::array<std::string_view, kMaxAnnotationCode + 1> kSymbols = {
    "",  "N", "L", "R", "a", "V", "F", "J", "A", "S", "E", "j", "/", "Q", "~", "",  "|",
    "",  "s", "T", "*", "D", "\"", "=", "p", "B", "^", "t", "+", "u", "?", "!", "[", "]",
    "e", "n", "@", "x", "f", "(", ")", "r", "",  "",  "",  "",  "",  "",  "",  ""};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

template <typename T>
T require_number(std::string_view s, std::string_view field, std::size_t line) {
  auto v = parse_number<T>(s);
  if (!v) throw ParseError("invalid " + std::string(field) + " '" + std::string(s) + "'", line);
  return *v;
}

void parse_record_line(std::string_view line, std::size_t line_no, RecordHeader& h) {
  auto f = split_ws(line);
  if (f.size() < 2) throw ParseError("record line needs at least a name and a signal count", line_no);
  if (f[0].find('/') != std::string_view::npos) {
    throw UnsupportedFormatError("multi-segment record '" + std::string(f[0]) + "' is not supported");
  }
  h.record_name = std::string(f[0]);
  h.n_signals = require_number<int>(f[1], "signal count", line_no);
  if (h.n_signals < 1) throw ParseError("signal count must be at least 1", line_no);
  h.sampling_rate = 250.0;  // WFDB default when omitted
  if (f.size() > 2) {
    // "360", "360/1000" (counter frequency) or "360(0)" (base counter value)
    auto fs = f[2].substr(0, f[2].find_first_of("/("));
    h.sampling_rate = require_number<double>(fs, "sampling frequency", line_no);
    if (!(h.sampling_rate > 0.0)) throw ParseError("sampling frequency must be positive", line_no);
  }
  if (f.size() > 3) {
    h.n_samples = require_number<std::int64_t>(f[3], "sample count", line_no);
    if (h.n_samples < 0) throw ParseError("sample count must be non-negative", line_no);
  }
}

SignalSpec parse_signal_line(std::string_view line, std::size_t line_no) {
  auto f = split_ws(line);
  if (f.size() < 2) throw ParseError("signal line needs a file name and a format", line_no);
  SignalSpec s;
  s.file_name = std::string(f[0]);

  // format[xsamples][:skew][+offset]
  std::string_view fmt = f[1];
  if (auto plus = fmt.find('+'); plus != std::string_view::npos) {
    s.byte_offset = require_number<std::int64_t>(fmt.substr(plus + 1), "byte offset", line_no);
    fmt = fmt.substr(0, plus);
  }
  if (auto colon = fmt.find(':'); colon != std::string_view::npos) {
    const auto skew = require_number<int>(fmt.substr(colon + 1), "skew", line_no);
    if (skew != 0) warn("record signal skew " + std::to_string(skew) + " ignored");
    fmt = fmt.substr(0, colon);
  }
  if (auto x = fmt.find('x'); x != std::string_view::npos) {
    const auto spf = require_number<int>(fmt.substr(x + 1), "samples per frame", line_no);
    if (spf != 1) throw UnsupportedFormatError("multi-frequency signals are not supported");
    fmt = fmt.substr(0, x);
  }
  s.format = require_number<int>(fmt, "format", line_no);
  if (s.format != kFormat212) {
    throw UnsupportedFormatError("line " + std::to_string(line_no) + ": storage format " +
                                 std::to_string(s.format) + " is not supported (only 212)");
  }

  bool baseline_given = false;
  if (f.size() > 2) {
    // gain[(baseline)][/units]
    std::string_view g = f[2];
    if (auto slash = g.find('/'); slash != std::string_view::npos) {
      s.units = std::string(g.substr(slash + 1));
      g = g.substr(0, slash);
    }
    if (auto open = g.find('('); open != std::string_view::npos) {
      auto close = g.find(')', open);
      if (close == std::string_view::npos) throw ParseError("unterminated baseline in gain field", line_no);
      s.baseline = require_number<int>(g.substr(open + 1, close - open - 1), "baseline", line_no);
      baseline_given = true;
      g = g.substr(0, open);
    }
    s.gain = require_number<double>(g, "gain", line_no);
    if (s.gain == 0.0) s.gain = 200.0;
  }
  if (f.size() > 3) s.adc_resolution = require_number<int>(f[3], "ADC resolution", line_no);
  if (f.size() > 4) s.adc_zero = require_number<int>(f[4], "ADC zero", line_no);
  s.initial_value = s.adc_zero;
  if (f.size() > 5) s.initial_value = require_number<int>(f[5], "initial value", line_no);
  if (!baseline_given) s.baseline = s.adc_zero;
  // f[6] checksum and f[7] block size are not needed for decoding.
  if (f.size() > 8) {
    auto start = f[8].data() - line.data();
    auto desc = line.substr(static_cast<std::size_t>(start));
    while (!desc.empty() && (desc.back() == '\r' || desc.back() == ' ')) desc.remove_suffix(1);
    s.description = std::string(desc);
  }
  return s;
}

std::int32_t sign_extend12(std::uint32_t v) {
  v &= 0x0FFF;
  return (v & 0x0800) ? static_cast<std::int32_t>(v) - 0x1000 : static_cast<std::int32_t>(v);
}

}  // namespace

RecordHeader parse_header(std::string_view text) {
  RecordHeader h;
  bool have_record_line = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') {
      if (eol == text.size()) break;
      continue;
    }
    if (!have_record_line) {
      parse_record_line(line, line_no, h);
      have_record_line = true;
    } else if (static_cast<int>(h.signals.size()) < h.n_signals) {
      h.signals.push_back(parse_signal_line(line, line_no));
    }
    if (eol == text.size()) break;
  }
  if (!have_record_line) throw ParseError("header contains no record line", line_no == 0 ? 1 : line_no);
  if (static_cast<int>(h.signals.size()) != h.n_signals) {
    throw ParseError("expected " + std::to_string(h.n_signals) + " signal lines, found " +
                         std::to_string(h.signals.size()),
                     line_no);
  }
  return h;
}

std::vector<std::int32_t> decode_format212(std::span<const std::uint8_t> bytes, std::size_t n_values) {
  const std::size_t needed = (n_values * 3 + 1) / 2;
  if (bytes.size() < needed) {
    throw DecodeError("format-212 stream truncated: need " + std::to_string(needed) + " bytes, have " +
                          std::to_string(bytes.size()),
                      (bytes.size() / 3) * 3);
  }
  std::vector<std::int32_t> out(n_values);
  std::size_t v = 0;
  for (std::size_t off = 0; v < n_values; off += 3) {
    const std::uint32_t b0 = bytes[off];
    const std::uint32_t b1 = bytes[off + 1];
    out[v++] = sign_extend12(((b1 & 0x0F) << 8) | b0);
    if (v < n_values) {
      const std::uint32_t b2 = bytes[off + 2];
      out[v++] = sign_extend12(((b1 & 0xF0) << 4) | b2);
    }
  }
  return out;
}

SamplePair decode_format212_pair(std::span<const std::uint8_t> bytes, std::size_t n_frames) {
  auto flat = decode_format212(bytes, 2 * n_frames);
  SamplePair p;
  p.first.resize(n_frames);
  p.second.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    p.first[i] = flat[2 * i];
    p.second[i] = flat[2 * i + 1];
  }
  return p;
}

std::vector<std::uint8_t> encode_format212(std::span<const std::int32_t> values) {
  std::vector<std::uint8_t> out;
  out.reserve((values.size() + 1) / 2 * 3);
  auto to12 = [](std::int32_t v) {
    if (v < -2048 || v > 2047) throw ParameterError("sample " + std::to_string(v) + " does not fit in 12 bits");
    return static_cast<std::uint32_t>(v) & 0x0FFF;
  };
  for (std::size_t i = 0; i < values.size(); i += 2) {
    const auto s1 = to12(values[i]);
    const auto s2 = i + 1 < values.size() ? to12(values[i + 1]) : 0u;
    out.push_back(static_cast<std::uint8_t>(s1 & 0xFF));
    out.push_back(static_cast<std::uint8_t>(((s1 >> 8) & 0x0F) | ((s2 >> 4) & 0xF0)));
    out.push_back(static_cast<std::uint8_t>(s2 & 0xFF));
  }
  return out;
}

std::string_view annotation_symbol(int code) {
  if (code < 0 || code > kMaxAnnotationCode || kSymbols[static_cast<std::size_t>(code)].empty()) {
    return "unknown";
  }
  return kSymbols[static_cast<std::size_t>(code)];
}

int annotation_code(std::string_view symbol) {
  for (std::size_t c = 1; c < kSymbols.size(); ++c) {
    if (kSymbols[c] == symbol) return static_cast<int>(c);
  }
  return -1;
}

std::vector<AnnotationEvent> read_annotations(std::span<const std::uint8_t> bytes) {
  std::vector<AnnotationEvent> events;
  std::size_t pos = 0;
  std::int64_t time = 0;
  std::int64_t pending_skip = 0;
  int last_num = 0;
  int last_chan = 0;

  auto word_at = [&](std::size_t p) {
    return static_cast<std::uint16_t>(bytes[p] | (bytes[p + 1] << 8));
  };

  for (;;) {
    if (pos + 2 > bytes.size()) {
      throw DecodeError("annotation stream ends without the end-of-file word", pos);
    }
    const std::size_t word_pos = pos;
    const auto word = word_at(pos);
    pos += 2;
    const int code = word >> kCodeShift;
    const int data = word & kDataMask;

    if (code == 0 && data == 0) break;

    switch (code) {
      case kSkip: {
        if (pos + 4 > bytes.size()) throw DecodeError("truncated SKIP interval", word_pos);
        const std::uint32_t hi = word_at(pos);
        const std::uint32_t lo = word_at(pos + 2);
        pos += 4;
        pending_skip += static_cast<std::int32_t>((hi << 16) | lo);
        break;
      }
      case kNum:
      case kSub:
      case kChan:
      case kAux: {
        if (events.empty()) {
          throw DecodeError("modifier word precedes the first annotation", word_pos);
        }
        auto& ev = events.back();
        if (code == kNum) {
          ev.num = data;
          last_num = data;
        } else if (code == kSub) {
          ev.subtype = data;
        } else if (code == kChan) {
          ev.channel = data;
          last_chan = data;
        } else {
          const std::size_t len = static_cast<std::size_t>(data);
          const std::size_t padded = len + (len & 1);
          if (pos + padded > bytes.size()) throw DecodeError("truncated AUX payload", word_pos);
          std::string aux(reinterpret_cast<const char*>(bytes.data() + pos), len);
          while (!aux.empty() && aux.back() == '\0') aux.pop_back();
          ev.aux = std::move(aux);
          pos += padded;
        }
        break;
      }
      default: {
        const std::int64_t next = time + pending_skip + data;
        if (next < time) throw DecodeError("annotation time decreases", word_pos);
        time = next;
        pending_skip = 0;
        AnnotationEvent ev;
        ev.sample = time;
        ev.code = code;
        ev.symbol = std::string(annotation_symbol(code));
        ev.num = last_num;
        ev.channel = last_chan;
        if (ev.symbol == "unknown") {
          warn("undefined annotation code " + std::to_string(code) + " at sample " + std::to_string(time));
        }
        events.push_back(std::move(ev));
        break;
      }
    }
  }
  return events;
}

std::vector<std::int32_t> EcgRecord::channel(int signal) const {
  if (signal < 0 || signal >= header.n_signals) {
    throw ParameterError("channel " + std::to_string(signal) + " out of range");
  }
  std::vector<std::int32_t> out(static_cast<std::size_t>(header.n_samples));
  for (std::int64_t t = 0; t < header.n_samples; ++t) out[static_cast<std::size_t>(t)] = at(t, signal);
  return out;
}

EcgRecord assemble_record(RecordHeader header, std::vector<std::int32_t> samples,
                          std::vector<AnnotationEvent> annotations) {
  if (header.n_signals < 1 || static_cast<int>(header.signals.size()) != header.n_signals) {
    throw ParameterError("header signal count does not match its signal list");
  }
  const auto expected = static_cast<std::size_t>(header.n_samples) * static_cast<std::size_t>(header.n_signals);
  if (samples.size() != expected) {
    throw ParameterError("sample matrix has " + std::to_string(samples.size()) + " values, header implies " +
                         std::to_string(expected));
  }
  const std::int64_t last = header.n_samples - 1;
  std::size_t clamped = 0;
  for (auto& ev : annotations) {
    if (ev.sample > last) {
      ev.sample = std::max<std::int64_t>(last, 0);
      ++clamped;
    }
  }
  if (clamped > 0) {
    warn(header.record_name + ": " + std::to_string(clamped) +
         " annotation(s) past the end of the signal clamped to the last sample");
  }
  EcgRecord r;
  r.patient_id = header.record_name;
  r.header = std::move(header);
  r.samples = std::move(samples);
  r.annotations = std::move(annotations);
  return r;
}

bool record_available(const std::filesystem::path& dir, std::string_view name) {
  const auto hea = dir / (std::string(name) + ".hea");
  if (!std::filesystem::exists(hea)) return false;
  try {
    auto h = parse_header(read_file_text(hea));
    for (const auto& s : h.signals) {
      if (!std::filesystem::exists(dir / s.file_name)) return false;
    }
    return true;
  } catch (const Error&) {
    return false;
  }
}

EcgRecord load_record(const std::filesystem::path& dir, std::string_view name, std::string_view annotator) {
  auto header = parse_header(read_file_text(dir / (std::string(name) + ".hea")));
  const auto& file = header.signals.front().file_name;
  for (const auto& s : header.signals) {
    if (s.file_name != file || s.byte_offset != header.signals.front().byte_offset) {
      throw UnsupportedFormatError("signals split across several files are not supported");
    }
  }
  auto bytes = read_file_bytes(dir / file);
  const auto offset = static_cast<std::size_t>(header.signals.front().byte_offset);
  if (offset > bytes.size()) throw DecodeError("signal byte offset beyond end of file", bytes.size());
  std::span<const std::uint8_t> body(bytes.data() + offset, bytes.size() - offset);
  const auto n_signals = static_cast<std::size_t>(header.n_signals);
  if (header.n_samples == 0) {
    header.n_samples = static_cast<std::int64_t>((body.size() * 2 / 3) / n_signals);
  }
  auto samples = decode_format212(body, static_cast<std::size_t>(header.n_samples) * n_signals);

  std::vector<AnnotationEvent> annotations;
  const auto ann_path = dir / (std::string(name) + "." + std::string(annotator));
  if (std::filesystem::exists(ann_path)) {
    annotations = read_annotations(read_file_bytes(ann_path));
  } else {
    warn("no annotation file '" + ann_path.string() + "'");
  }
  return assemble_record(std::move(header), std::move(samples), std::move(annotations));
}

}  // namespace lsf
