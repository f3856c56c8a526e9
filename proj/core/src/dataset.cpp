#include "lsf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "lsf/error.hpp"
#include "lsf/log.hpp"
#include "lsf/random.hpp"

namespace lsf {

std::string_view to_string(Task task) { return task == Task::Arrhythmia ? "arrhythmia" : "afib"; }

Task parse_task(std::string_view name) {
  if (name == "arrhythmia") return Task::Arrhythmia;
  if (name == "afib") return Task::Afib;
  throw ParameterError("unknown task '" + std::string(name) + "' (expected arrhythmia or afib)");
}

std::string_view to_string(ClassTag tag) {
  switch (tag) {
    case ClassTag::Normal: return "normal";
    case ClassTag::Abnormal: return "abnormal";
    case ClassTag::Noisy: return "noisy";
  }
  return "noisy";
}

ClassTag parse_class_tag(std::string_view name) {
  if (name == "normal") return ClassTag::Normal;
  if (name == "abnormal") return ClassTag::Abnormal;
  if (name == "noisy") return ClassTag::Noisy;
  throw ParseError("unknown class tag '" + std::string(name) + "'");
}

std::optional<int> binary_label(ClassTag tag) {
  switch (tag) {
    case ClassTag::Normal: return 0;
    case ClassTag::Abnormal: return 1;
    case ClassTag::Noisy: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<WindowSpan> segment_record(std::int64_t n_samples, double sampling_rate, double window_s) {
  if (!(sampling_rate > 0.0) || !(window_s > 0.0)) throw ParameterError("rate and window must be positive");
  const auto width = static_cast<std::int64_t>(std::llround(window_s * sampling_rate));
  if (width < 1) throw ParameterError("window shorter than one sample");
  std::vector<WindowSpan> out;
  const std::int64_t n = n_samples / width;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  for (std::int64_t k = 0; k < n; ++k) out.push_back({k, k * width, width});
  return out;
}

std::vector<WindowSpan> segment_record(const EcgRecord& record, double window_s) {
  auto out = segment_record(record.n_samples(), record.header.sampling_rate, window_s);
  if (out.empty()) {
    warn("record " + record.header.record_name + " is shorter than one " + std::to_string(window_s) +
         " s window");
  }
  return out;
}

AamiClass aami_class(std::string_view s) {
  if (s == "N" || s == "L" || s == "R" || s == "e" || s == "j") return AamiClass::N;
  if (s == "A" || s == "a" || s == "J" || s == "S" || s == "n") return AamiClass::S;
  if (s == "V" || s == "E" || s == "r") return AamiClass::V;
  if (s == "F") return AamiClass::F;
  if (s == "/" || s == "f" || s == "Q") return AamiClass::Q;
  return AamiClass::NotBeat;
}

namespace {

auto window_range(const WindowSpan& w, std::span<const AnnotationEvent> anns) {
  auto lo = std::lower_bound(anns.begin(), anns.end(), w.start,
                             [](const AnnotationEvent& a, std::int64_t s) { return a.sample < s; });
  auto hi = std::lower_bound(lo, anns.end(), w.end(),
                             [](const AnnotationEvent& a, std::int64_t s) { return a.sample < s; });
  return std::pair{lo, hi};
}

enum class Rhythm { Undefined, Afib, Other, Noise };

Rhythm classify_rhythm(std::string_view aux) {
  if (aux.rfind("(AFIB", 0) == 0) return Rhythm::Afib;
  if (aux.rfind("(NOISE", 0) == 0) return Rhythm::Noise;
  return Rhythm::Other;
}

bool is_rhythm_change(const AnnotationEvent& a) { return a.symbol == "+" && !a.aux.empty() && a.aux[0] == '('; }

}  // namespace

ClassTag label_arrhythmia(const WindowSpan& window, std::span<const AnnotationEvent> annotations) {
  auto [lo, hi] = window_range(window, annotations);
  bool any_beat = false;
  bool abnormal = false;
  for (auto it = lo; it != hi; ++it) {
    switch (aami_class(it->symbol)) {
      case AamiClass::Q: return ClassTag::Noisy;
      case AamiClass::S:
      case AamiClass::V:
      case AamiClass::F: abnormal = true; [[fallthrough]];
      case AamiClass::N: any_beat = true; break;
      case AamiClass::NotBeat: break;
    }
  }
  if (!any_beat) return ClassTag::Noisy;
  return abnormal ? ClassTag::Abnormal : ClassTag::Normal;
}

ClassTag label_afib(const WindowSpan& window, std::span<const AnnotationEvent> annotations) {
  Rhythm current = Rhythm::Undefined;
  auto it = annotations.begin();
  for (; it != annotations.end() && it->sample <= window.start; ++it) {
    if (is_rhythm_change(*it)) current = classify_rhythm(it->aux);
  }
  std::int64_t afib = 0;
  std::int64_t other = 0;
  std::int64_t cursor = window.start;
  auto credit = [&](std::int64_t until) {
    const auto span = until - cursor;
    if (current == Rhythm::Afib) afib += span;
    if (current == Rhythm::Other) other += span;
    cursor = until;
  };
  for (; it != annotations.end() && it->sample < window.end(); ++it) {
    if (!is_rhythm_change(*it)) continue;
    credit(it->sample);
    current = classify_rhythm(it->aux);
  }
  credit(window.end());
  if (2 * afib > window.length) return ClassTag::Abnormal;
  if (2 * other > window.length) return ClassTag::Normal;
  return ClassTag::Noisy;
}

ClassTag label_window(Task task, const WindowSpan& window, std::span<const AnnotationEvent> annotations) {
  return task == Task::Arrhythmia ? label_arrhythmia(window, annotations) : label_afib(window, annotations);
}

namespace records {

const std::vector<std::string>& mitdb_all() {
  static const std::vector<std::string> v{
      "100", "101", "102", "103", "104", "105", "106", "107", "108", "109", "111", "112",
      "113", "114", "115", "116", "117", "118", "119", "121", "122", "123", "124", "200",
      "201", "202", "203", "205", "207", "208", "209", "210", "212", "213", "214", "215",
      "217", "219", "220", "221", "222", "223", "228", "230", "231", "232", "233", "234"};
  return v;
}

const std::vector<std::string>& mitdb_discarded() {
  static const std::vector<std::string> v{"102", "104", "107", "217"};
  return v;
}

const std::vector<std::string>& mitdb_test() {
  static const std::vector<std::string> v{"105", "117", "214", "230", "232", "233", "234"};
  return v;
}

const std::vector<std::string>& afdb_all() {
  static const std::vector<std::string> v{
      "00735", "03665", "04015", "04043", "04048", "04126", "04746", "04908", "04936",
      "05091", "05121", "05261", "06426", "06453", "06995", "07162", "07859", "07879",
      "07910", "08215", "08219", "08378", "08405", "08434", "08455"};
  return v;
}

const std::vector<std::string>& afdb_test() {
  static const std::vector<std::string> v{"04746", "05121", "06453", "07879"};
  return v;
}

}  // namespace records

namespace {

// AFDB records distributed with annotations only.
bool annotation_only_afdb_record(std::string_view name) { return name == "00735" || name == "03665"; }

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

SplitSpec make_split(Task task, std::span<const std::string> available, std::uint64_t seed,
                     double validation_fraction) {
  const std::set<std::string> present(available.begin(), available.end());
  const auto& all = task == Task::Arrhythmia ? records::mitdb_all() : records::afdb_all();
  const auto& test = task == Task::Arrhythmia ? records::mitdb_test() : records::afdb_test();
  const std::set<std::string> test_set(test.begin(), test.end());
  const std::set<std::string> discarded =
      task == Task::Arrhythmia
          ? std::set<std::string>(records::mitdb_discarded().begin(), records::mitdb_discarded().end())
          : std::set<std::string>{};

  SplitSpec spec;
  spec.task = task;
  spec.seed = seed;
  spec.validation_fraction = validation_fraction;
  std::vector<std::string> missing;
  for (const auto& r : all) {
    if (discarded.count(r)) continue;
    if (!present.count(r)) {
      if (task == Task::Afib && annotation_only_afdb_record(r)) {
        warn("AFIB record " + r + " has no signal file and is excluded");
        continue;
      }
      missing.push_back(r);
      continue;
    }
    (test_set.count(r) ? spec.test_patients : spec.train_patients).push_back(r);
  }
  if (!missing.empty()) {
    throw DataError("missing " + std::string(to_string(task)) + " records: " + join(missing, ", "));
  }
  validate_split(spec);
  return spec;
}

SplitSpec make_split(Task task, const std::filesystem::path& data_dir, std::uint64_t seed,
                     double validation_fraction) {
  if (!std::filesystem::is_directory(data_dir)) {
    throw DataError("dataset directory '" + data_dir.string() + "' not found");
  }
  std::vector<std::string> available;
  const auto& all = task == Task::Arrhythmia ? records::mitdb_all() : records::afdb_all();
  for (const auto& r : all) {
    if (record_available(data_dir, r)) available.push_back(r);
  }
  return make_split(task, available, seed, validation_fraction);
}

void validate_split(const SplitSpec& spec) {
  const std::set<std::string> train(spec.train_patients.begin(), spec.train_patients.end());
  for (const auto& t : spec.test_patients) {
    if (train.count(t)) throw ParameterError("patient " + t + " appears in both train and test sets");
  }
  if (!(spec.validation_fraction >= 0.0 && spec.validation_fraction < 1.0)) {
    throw ParameterError("validation fraction must lie in [0, 1)");
  }
}

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Validation: return "validation";
    case Partition::Test: return "test";
    case Partition::Excluded: return "excluded";
  }
  return "excluded";
}

Partition parse_partition(std::string_view name) {
  if (name == "train") return Partition::Train;
  if (name == "validation") return Partition::Validation;
  if (name == "test") return Partition::Test;
  if (name == "excluded") return Partition::Excluded;
  throw ParseError("unknown partition '" + std::string(name) + "'");
}

std::vector<Partition> assign_partitions(const SplitSpec& spec, std::span<const SegmentInfo> segments) {
  validate_split(spec);
  const std::set<std::string> train(spec.train_patients.begin(), spec.train_patients.end());
  const std::set<std::string> test(spec.test_patients.begin(), spec.test_patients.end());

  std::vector<Partition> out(segments.size(), Partition::Excluded);
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!binary_label(s.tag)) continue;
    if (test.count(s.patient_id)) {
      out[i] = Partition::Test;
    } else if (train.count(s.patient_id)) {
      out[i] = Partition::Train;
      train_idx.push_back(i);
    }
  }

  Rng rng(spec.seed);
  const auto n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * train_idx.size()));
  if (spec.patient_wise_validation) {
    std::vector<std::string> patients = spec.train_patients;
    rng.shuffle(std::span(patients));
    std::map<std::string, std::size_t> counts;
    for (auto i : train_idx) ++counts[segments[i].patient_id];
    std::set<std::string> chosen;
    std::size_t taken = 0;
    for (const auto& p : patients) {
      if (taken >= n_val) break;
      chosen.insert(p);
      taken += counts[p];
    }
    for (auto i : train_idx) {
      if (chosen.count(segments[i].patient_id)) out[i] = Partition::Validation;
    }
  } else {
    rng.shuffle(std::span(train_idx));
    for (std::size_t k = 0; k < n_val; ++k) out[train_idx[k]] = Partition::Validation;
  }
  check_patient_disjoint(segments, out);
  return out;
}

void check_patient_disjoint(std::span<const SegmentInfo> segments, std::span<const Partition> partitions) {
  if (segments.size() != partitions.size()) throw ParameterError("segment and partition lists differ in length");
  std::set<std::string> fit, test;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (partitions[i] == Partition::Train || partitions[i] == Partition::Validation) fit.insert(segments[i].patient_id);
    if (partitions[i] == Partition::Test) test.insert(segments[i].patient_id);
  }
  for (const auto& p : test) {
    if (fit.count(p)) throw DataError("inter-patient violation: patient " + p + " is in both training and test data");
  }
}

const DistributionRow& DistributionReport::row(std::string_view name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw ParameterError("no distribution row named '" + std::string(name) + "'");
}

DistributionReport distribution(const SplitSpec& spec, std::span<const SegmentInfo> segments) {
  const bool arr = spec.task == Task::Arrhythmia;
  DistributionReport rep;
  rep.task = spec.task;
  rep.rows = {{arr ? "DS1" : "DS3"}, {arr ? "DS2" : "DS4"}, {"Total"}};
  const std::set<std::string> train(spec.train_patients.begin(), spec.train_patients.end());
  const std::set<std::string> test(spec.test_patients.begin(), spec.test_patients.end());
  for (const auto& s : segments) {
    DistributionRow* row = nullptr;
    if (train.count(s.patient_id)) row = &rep.rows[0];
    if (test.count(s.patient_id)) row = &rep.rows[1];
    if (!row) continue;
    for (auto* r : {row, &rep.rows[2]}) {
      (s.tag == ClassTag::Normal ? r->normal : s.tag == ClassTag::Abnormal ? r->abnormal : r->noisy) += 1;
      r->total += 1;
    }
  }
  return rep;
}

std::string format_distribution(const DistributionReport& report) {
  const bool arr = report.task == Task::Arrhythmia;
  std::string out = std::string("Dataset\t") + (arr ? "Normal\tAbnormal" : "Non-AFIB\tAFIB") + "\tNoisy\tTotal\n";
  for (const auto& r : report.rows) {
    const auto first = arr ? r.normal : r.abnormal;
    const auto second = arr ? r.abnormal : r.normal;
    out += r.name + "\t" + std::to_string(first) + "\t" + std::to_string(second) + "\t" + std::to_string(r.noisy) +
           "\t" + std::to_string(r.total) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto p = line.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, p - start));
    start = p + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    pos = eol + 1;
  }
  return out;
}

template <typename T>
T to_number(std::string_view s, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ParseError("expected a number, found '" + std::string(s) + "'", line);
  }
  return v;
}

std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string write_split_manifest(const SplitManifest& m) {
  if (m.segments.size() != m.partitions.size()) throw ParameterError("segment and partition lists differ in length");
  std::string out = "LSF-SPLIT 1\n";
  out += "task " + std::string(to_string(m.spec.task)) + "\n";
  out += "seed " + std::to_string(m.spec.seed) + "\n";
  out += "validation_fraction " + format_fraction(m.spec.validation_fraction) + "\n";
  out += std::string("validation_mode ") + (m.spec.patient_wise_validation ? "patient" : "segment") + "\n";
  out += "train";
  for (const auto& p : m.spec.train_patients) out += " " + p;
  out += "\ntest";
  for (const auto& p : m.spec.test_patients) out += " " + p;
  out += "\nsegments " + std::to_string(m.segments.size()) + "\n";
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const auto& s = m.segments[i];
    out += s.patient_id + " " + std::to_string(s.index) + " " + std::to_string(s.start_sample) + " " +
           std::string(to_string(s.tag)) + " " + std::string(to_string(m.partitions[i])) + "\n";
  }
  out += "end\n";
  return out;
}

SplitManifest parse_split_manifest(std::string_view text) {
  const auto lines = lines_of(text);
  std::size_t i = 0;
  auto next = [&]() -> std::pair<std::vector<std::string_view>, std::size_t> {
    if (i >= lines.size()) throw ParseError("unexpected end of split manifest", i + 1);
    ++i;
    return {split_fields(lines[i - 1], ' '), i};
  };
  auto expect_key = [&](std::string_view key) {
    auto [f, ln] = next();
    if (f.empty() || f[0] != key) throw ParseError("expected '" + std::string(key) + "'", ln);
    return std::pair{f, ln};
  };

  SplitManifest m;
  {
    auto [f, ln] = next();
    if (f.size() != 2 || f[0] != "LSF-SPLIT" || f[1] != "1") throw ParseError("not an LSF-SPLIT v1 manifest", ln);
  }
  {
    auto [f, ln] = expect_key("task");
    if (f.size() != 2) throw ParseError("malformed task line", ln);
    m.spec.task = parse_task(f[1]);
  }
  {
    auto [f, ln] = expect_key("seed");
    if (f.size() != 2) throw ParseError("malformed seed line", ln);
    m.spec.seed = to_number<std::uint64_t>(f[1], ln);
  }
  {
    auto [f, ln] = expect_key("validation_fraction");
    if (f.size() != 2) throw ParseError("malformed validation_fraction line", ln);
    m.spec.validation_fraction = to_number<double>(f[1], ln);
  }
  {
    auto [f, ln] = expect_key("validation_mode");
    if (f.size() != 2 || (f[1] != "patient" && f[1] != "segment")) throw ParseError("malformed validation_mode", ln);
    m.spec.patient_wise_validation = f[1] == "patient";
  }
  for (auto* list : {&m.spec.train_patients, &m.spec.test_patients}) {
    auto [f, ln] = expect_key(list == &m.spec.train_patients ? "train" : "test");
    for (std::size_t k = 1; k < f.size(); ++k) {
      if (!f[k].empty()) list->emplace_back(f[k]);
    }
  }
  std::size_t n = 0;
  {
    auto [f, ln] = expect_key("segments");
    if (f.size() != 2) throw ParseError("malformed segments line", ln);
    n = to_number<std::size_t>(f[1], ln);
  }
  m.segments.reserve(n);
  m.partitions.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto [f, ln] = next();
    if (f.size() != 5) throw ParseError("malformed segment line", ln);
    SegmentInfo s;
    s.patient_id = std::string(f[0]);
    s.index = to_number<std::int64_t>(f[1], ln);
    s.start_sample = to_number<std::int64_t>(f[2], ln);
    s.tag = parse_class_tag(f[3]);
    m.segments.push_back(std::move(s));
    m.partitions.push_back(parse_partition(f[4]));
  }
  {
    auto [f, ln] = next();
    if (f.size() != 1 || f[0] != "end") throw ParseError("expected 'end'", ln);
  }
  validate_split(m.spec);
  return m;
}

std::string write_segment_table(std::span<const SegmentInfo> segments) {
  std::string out = "patient,index,start_sample,class_tag\n";
  for (const auto& s : segments) {
    out += s.patient_id + "," + std::to_string(s.index) + "," + std::to_string(s.start_sample) + "," +
           std::string(to_string(s.tag)) + "\n";
  }
  return out;
}

std::vector<SegmentInfo> parse_segment_table(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "patient,index,start_sample,class_tag") {
    throw ParseError("missing segment table header", 1);
  }
  std::vector<SegmentInfo> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_fields(lines[i], ',');
    if (f.size() != 4) throw ParseError("expected 4 fields", i + 1);
    SegmentInfo s;
    s.patient_id = std::string(f[0]);
    s.index = to_number<std::int64_t>(f[1], i + 1);
    s.start_sample = to_number<std::int64_t>(f[2], i + 1);
    s.tag = parse_class_tag(f[3]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lsf
