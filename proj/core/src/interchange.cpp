#include "lsf/interchange.hpp"

#include <charconv>
#include <cstdio>
#include <optional>
#include <vector>

#include "lsf/error.hpp"

namespace lsf {
namespace {

std::string escape(std::string_view s) {
  if (s.empty()) return "%";
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (c == '%' || c <= 0x20 || c >= 0x7F) {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0x0F]);
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::string unescape(std::string_view s, std::size_t line) {
  if (s == "%") return {};
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 2 >= s.size()) throw ParseError("truncated escape sequence", line);
    const int hi = hex_value(s[i + 1]);
    const int lo = hex_value(s[i + 2]);
    if (hi < 0 || lo < 0) throw ParseError("invalid escape sequence", line);
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return {buf, static_cast<std::size_t>(n)};
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string_view next() {
    if (pos_ >= text_.size()) throw ParseError("unexpected end of document", line_ + 1);
    auto eol = text_.find('\n', pos_);
    if (eol == std::string_view::npos) eol = text_.size();
    auto line = text_.substr(pos_, eol - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = eol + 1;
    ++line_;
    return line;
  }

  std::size_t line() const { return line_; }
  bool at_end() const {
    for (auto i = pos_; i < text_.size(); ++i) {
      if (text_[i] != '\n' && text_[i] != '\r' && text_[i] != ' ') return false;
    }
    return true;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    auto j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T number(std::string_view s, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ParseError("expected a number, found '" + std::string(s) + "'", line);
  }
  return v;
}

std::string_view keyed(LineReader& in, std::string_view key) {
  auto line = in.next();
  auto f = fields(line);
  if (f.size() != 2 || f[0] != key) throw ParseError("expected '" + std::string(key) + " <value>'", in.line());
  return f[1];
}

}  // namespace

std::string export_interchange(const EcgRecord& r) {
  std::string out;
  out += std::string(kInterchangeMagic) + " " + std::to_string(kInterchangeVersion) + "\n";
  out += "record " + escape(r.header.record_name) + "\n";
  out += "patient " + escape(r.patient_id) + "\n";
  out += "sampling_rate " + format_real(r.header.sampling_rate) + "\n";
  out += "n_samples " + std::to_string(r.header.n_samples) + "\n";
  out += "n_signals " + std::to_string(r.header.n_signals) + "\n";
  for (const auto& s : r.header.signals) {
    out += "signal " + escape(s.file_name) + " " + std::to_string(s.format) + " " + format_real(s.gain) + " " +
           std::to_string(s.baseline) + " " + escape(s.units) + " " + std::to_string(s.adc_resolution) + " " +
           std::to_string(s.adc_zero) + " " + std::to_string(s.initial_value) + " " +
           std::to_string(s.byte_offset) + " " + escape(s.description) + "\n";
  }
  out += "samples\n";
  const auto k = static_cast<std::size_t>(r.header.n_signals);
  for (std::int64_t t = 0; t < r.header.n_samples; ++t) {
    for (std::size_t c = 0; c < k; ++c) {
      if (c) out += ' ';
      out += std::to_string(r.samples[static_cast<std::size_t>(t) * k + c]);
    }
    out += '\n';
  }
  out += "annotations " + std::to_string(r.annotations.size()) + "\n";
  for (const auto& a : r.annotations) {
    out += std::to_string(a.sample) + " " + std::to_string(a.code) + " " + escape(a.symbol) + " " +
           std::to_string(a.subtype) + " " + std::to_string(a.channel) + " " + std::to_string(a.num) + " " +
           escape(a.aux) + "\n";
  }
  out += "end\n";
  return out;
}

EcgRecord import_interchange(std::string_view text) {
  LineReader in(text);
  {
    auto f = fields(in.next());
    if (f.size() != 2 || f[0] != kInterchangeMagic) throw ParseError("missing LSF-INTERCHANGE header", 1);
    if (number<int>(f[1], 1) != kInterchangeVersion) {
      throw ParseError("unsupported interchange version " + std::string(f[1]), 1);
    }
  }
  EcgRecord r;
  r.header.record_name = unescape(keyed(in, "record"), in.line());
  r.patient_id = unescape(keyed(in, "patient"), in.line());
  r.header.sampling_rate = number<double>(keyed(in, "sampling_rate"), in.line());
  r.header.n_samples = number<std::int64_t>(keyed(in, "n_samples"), in.line());
  r.header.n_signals = number<int>(keyed(in, "n_signals"), in.line());
  if (r.header.n_signals < 1) throw ParseError("n_signals must be at least 1", in.line());
  if (r.header.n_samples < 0) throw ParseError("n_samples must be non-negative", in.line());
  if (!(r.header.sampling_rate > 0)) throw ParseError("sampling_rate must be positive", in.line());

  for (int i = 0; i < r.header.n_signals; ++i) {
    auto f = fields(in.next());
    const auto ln = in.line();
    if (f.size() != 11 || f[0] != "signal") throw ParseError("malformed signal line", ln);
    SignalSpec s;
    s.file_name = unescape(f[1], ln);
    s.format = number<int>(f[2], ln);
    s.gain = number<double>(f[3], ln);
    s.baseline = number<int>(f[4], ln);
    s.units = unescape(f[5], ln);
    s.adc_resolution = number<int>(f[6], ln);
    s.adc_zero = number<int>(f[7], ln);
    s.initial_value = number<int>(f[8], ln);
    s.byte_offset = number<std::int64_t>(f[9], ln);
    s.description = unescape(f[10], ln);
    r.header.signals.push_back(std::move(s));
  }

  if (in.next() != "samples") throw ParseError("expected 'samples'", in.line());
  const auto k = static_cast<std::size_t>(r.header.n_signals);
  r.samples.reserve(static_cast<std::size_t>(r.header.n_samples) * k);
  for (std::int64_t t = 0; t < r.header.n_samples; ++t) {
    auto f = fields(in.next());
    if (f.size() != k) {
      throw ParseError("expected " + std::to_string(k) + " values per frame, found " + std::to_string(f.size()),
                       in.line());
    }
    for (auto v : f) r.samples.push_back(number<std::int32_t>(v, in.line()));
  }

  const auto m = number<std::size_t>(keyed(in, "annotations"), in.line());
  r.annotations.reserve(m);
  std::int64_t prev = 0;
  for (std::size_t i = 0; i < m; ++i) {
    auto f = fields(in.next());
    const auto ln = in.line();
    if (f.size() != 7) throw ParseError("malformed annotation line", ln);
    AnnotationEvent a;
    a.sample = number<std::int64_t>(f[0], ln);
    a.code = number<int>(f[1], ln);
    a.symbol = unescape(f[2], ln);
    a.subtype = number<int>(f[3], ln);
    a.channel = number<int>(f[4], ln);
    a.num = number<int>(f[5], ln);
    a.aux = unescape(f[6], ln);
    if (a.sample < prev) throw ParseError("annotation samples must be non-decreasing", ln);
    if (a.sample >= r.header.n_samples) throw ParseError("annotation beyond the last sample", ln);
    prev = a.sample;
    r.annotations.push_back(std::move(a));
  }
  if (in.next() != "end") throw ParseError("expected 'end'", in.line());
  if (!in.at_end()) throw ParseError("content after 'end'", in.line() + 1);
  return r;
}

}  // namespace lsf
