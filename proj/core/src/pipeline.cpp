#include "lsf/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "lsf/benchmark.hpp"
#include "lsf/container.hpp"
#include "lsf/feature_store.hpp"
#include "lsf/interchange.hpp"
#include "lsf/log.hpp"
#include "lsf/metrics.hpp"
#include "lsf/random.hpp"

namespace fs = std::filesystem;

namespace lsf {

namespace {

struct StageName {
  Stage stage;
  std::string_view name;
};

constexpr StageName kStageNames[] = {
    {Stage::Ingest, "ingest"},
    {Stage::Preprocess, "preprocess"},
    {Stage::Split, "split"},
    {Stage::TrainLstm, "train-lstm"},
    {Stage::ExtractFeatures, "extract-features"},
    {Stage::TrainSvm, "train-svm"},
    {Stage::Evaluate, "evaluate"},
    {Stage::Benchmark, "benchmark"},
    {Stage::Report, "report"},
    {Stage::ExportFeatures, "export-features"},
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T v{};
  const auto s = trim(value);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ParameterError("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const auto s = trim(value);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParameterError("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

std::vector<std::string> parse_list(std::string_view value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::string_view to_string(Stage stage) {
  for (const auto& s : kStageNames) {
    if (s.stage == stage) return s.name;
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (const auto& s : kStageNames) {
    if (s.name == name) return s.stage;
  }
  throw ParameterError("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> v{Stage::Ingest,   Stage::Preprocess, Stage::Split,    Stage::TrainLstm,
                                    Stage::ExtractFeatures, Stage::TrainSvm, Stage::Evaluate, Stage::Report};
  return v;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  PipelineConfig c;
  for (const auto& line : [&] {
         std::vector<std::string> lines;
         const auto text = c.canonical();
         std::size_t pos = 0;
         while (pos < text.size()) {
           const auto eol = text.find('\n', pos);
           lines.push_back(text.substr(pos, eol - pos));
           pos = eol + 1;
         }
         return lines;
       }()) {
    keys.push_back(line.substr(0, line.find('=')));
  }
  keys.push_back("data_dir");
  keys.push_back("work_dir");
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::string PipelineConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["task"] = std::string(to_string(task));
  kv["seed"] = seed ? std::to_string(*seed) : "none";
  kv["records"] = join(records, ',');
  kv["test_records"] = join(test_records, ',');
  kv["validation_fraction"] = fmt(validation_fraction);
  kv["validation_mode"] = patient_wise_validation ? "patient" : "segment";
  kv["cutoff_hz"] = fmt(preprocess.cutoff_hz);
  kv["filter_order"] = std::to_string(preprocess.filter_order);
  kv["target_hz"] = fmt(preprocess.target_hz);
  kv["zero_phase"] = preprocess.zero_phase ? "true" : "false";
  kv["channel"] = std::to_string(preprocess.channel);
  kv["window_s"] = fmt(preprocess.window_s);
  kv["norm_mode"] = norm_mode == NormMode::Channel ? "channel" : "elementwise";
  kv["units"] = std::to_string(units);
  kv["learning_rate"] = fmt(train.learning_rate);
  kv["batch_size"] = std::to_string(train.batch_size);
  kv["max_epochs"] = std::to_string(train.max_epochs);
  kv["patience"] = std::to_string(train.patience);
  kv["beta1"] = fmt(train.beta1);
  kv["beta2"] = fmt(train.beta2);
  kv["adam_epsilon"] = fmt(train.adam_epsilon);
  kv["clip_norm"] = fmt(train.clip_norm);
  kv["chunk"] = std::to_string(train.chunk);
  kv["svm_gamma"] = fmt(svm.gamma);
  kv["svm_tolerance"] = fmt(svm.tolerance);
  kv["svm_max_iterations"] = std::to_string(svm.max_iterations);
  kv["svm_cache_mb"] = std::to_string(svm.cache_bytes >> 20);
  kv["svm_shrinking"] = svm.shrinking ? "true" : "false";
  kv["grid"] = grid;
  kv["grid_max_train"] = std::to_string(grid_max_train);
  kv["threads"] = std::to_string(threads);
  kv["bench_segments"] = std::to_string(bench_segments);
  kv["bench_warmup"] = std::to_string(bench_warmup);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void PipelineConfig::set(std::string_view key, std::string_view raw) {
  const auto value = trim(raw);
  if (key == "data_dir") data_dir = value;
  else if (key == "work_dir") work_dir = value;
  else if (key == "task") task = parse_task(value);
  else if (key == "seed") seed = value == "none" ? std::nullopt : std::optional(parse_number<std::uint64_t>(key, value));
  else if (key == "records") records = parse_list(value);
  else if (key == "test_records") test_records = parse_list(value);
  else if (key == "validation_fraction") validation_fraction = parse_number<double>(key, value);
  else if (key == "validation_mode") {
    if (value != "patient" && value != "segment") throw ParameterError("validation_mode must be patient or segment");
    patient_wise_validation = value == "patient";
  } else if (key == "cutoff_hz") preprocess.cutoff_hz = parse_number<double>(key, value);
  else if (key == "filter_order") preprocess.filter_order = parse_number<int>(key, value);
  else if (key == "target_hz") preprocess.target_hz = parse_number<double>(key, value);
  else if (key == "zero_phase") preprocess.zero_phase = parse_bool(key, value);
  else if (key == "channel") preprocess.channel = parse_number<int>(key, value);
  else if (key == "window_s") preprocess.window_s = parse_number<double>(key, value);
  else if (key == "norm_mode") {
    if (value != "channel" && value != "elementwise") throw ParameterError("norm_mode must be elementwise or channel");
    norm_mode = value == "channel" ? NormMode::Channel : NormMode::Elementwise;
  } else if (key == "units") units = parse_number<int>(key, value);
  else if (key == "learning_rate") train.learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") train.batch_size = parse_number<int>(key, value);
  else if (key == "max_epochs") train.max_epochs = parse_number<int>(key, value);
  else if (key == "patience") train.patience = parse_number<int>(key, value);
  else if (key == "beta1") train.beta1 = parse_number<double>(key, value);
  else if (key == "beta2") train.beta2 = parse_number<double>(key, value);
  else if (key == "adam_epsilon") train.adam_epsilon = parse_number<double>(key, value);
  else if (key == "clip_norm") train.clip_norm = parse_number<double>(key, value);
  else if (key == "chunk") train.chunk = parse_number<int>(key, value);
  else if (key == "svm_gamma") svm.gamma = parse_number<double>(key, value);
  else if (key == "svm_tolerance") svm.tolerance = parse_number<double>(key, value);
  else if (key == "svm_max_iterations") svm.max_iterations = parse_number<std::int64_t>(key, value);
  else if (key == "svm_cache_mb") svm.cache_bytes = parse_number<std::size_t>(key, value) << 20;
  else if (key == "svm_shrinking") svm.shrinking = parse_bool(key, value);
  else if (key == "grid") {
    if (value != "standard" && value != "coarse") throw ParameterError("grid must be standard or coarse");
    grid = value;
  } else if (key == "grid_max_train") grid_max_train = parse_number<std::size_t>(key, value);
  else if (key == "threads") threads = parse_number<int>(key, value);
  else if (key == "bench_segments") bench_segments = parse_number<int>(key, value);
  else if (key == "bench_warmup") bench_warmup = parse_number<int>(key, value);
  else throw ParameterError("unknown configuration key '" + std::string(key) + "'");
}

void PipelineConfig::load(std::string_view text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    ++line_no;
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const auto key = trim(std::string_view(stripped).substr(0, eq));
    try {
      set(key, std::string_view(stripped).substr(eq + 1));
    } catch (const ParameterError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

std::uint64_t PipelineConfig::require_seed(Stage stage) const {
  if (!seed) throw ParameterError(std::string(to_string(stage)) + " needs a seed (--seed N or seed = N)");
  return *seed;
}

// Records ------------------------------------------------------------------

std::vector<std::string> discover_records(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' not found");
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".lsfi" || ext == ".hea") names.insert(e.path().stem().string());
  }
  return {names.begin(), names.end()};
}

bool any_record_available(const fs::path& dir, const std::string& name) {
  return fs::is_regular_file(dir / (name + ".lsfi")) || record_available(dir, name);
}

EcgRecord load_any_record(const fs::path& dir, const std::string& name) {
  const auto lsfi = dir / (name + ".lsfi");
  if (fs::is_regular_file(lsfi)) {
    auto r = import_interchange(read_file_text(lsfi));
    if (r.patient_id.empty()) r.patient_id = name;
    return r;
  }
  auto r = load_record(dir, name);
  r.patient_id = name;
  return r;
}

namespace {

std::vector<fs::path> record_files(const fs::path& dir, const std::string& name) {
  std::vector<fs::path> out;
  for (const char* ext : {".lsfi", ".hea", ".dat", ".atr"}) {
    const auto p = dir / (name + ext);
    if (fs::is_regular_file(p)) out.push_back(p);
  }
  return out;
}

// Manifest -----------------------------------------------------------------

std::string file_digest(const fs::path& p) { return sha256_hex(read_file_bytes(p)); }

fs::path stage_dir(const PipelineConfig& c, std::string_view name) { return c.work_dir / name; }

fs::path require(const fs::path& p, Stage producer) {
  if (!fs::is_regular_file(p)) {
    throw MissingArtifactError(p.string() + " not found; run " + std::string(to_string(producer)) + " first");
  }
  return p;
}

class StageWriter {
 public:
  StageWriter(const PipelineConfig& c, Stage stage, std::string_view dir)
      : dir_(stage_dir(c, dir)), root_(c.work_dir) {
    m_.stage = std::string(to_string(stage));
    m_.version = std::string(kVersion);
    auto canon = c.canonical();
    m_.config_digest = sha256_hex(canon);
    fs::create_directories(dir_);
  }

  void input(const fs::path& p) { m_.inputs[label(p)] = file_digest(p); }
  void input_named(const std::string& name, const std::string& digest) { m_.inputs[name] = digest; }

  fs::path write_bytes(const std::string& name, std::span<const std::uint8_t> bytes) {
    const auto p = dir_ / name;
    write_file_bytes(p, bytes);
    m_.outputs[name] = sha256_hex(bytes);
    result_.outputs.push_back(p);
    return p;
  }
  fs::path write_text(const std::string& name, std::string_view text) {
    const auto p = dir_ / name;
    write_file_text(p, text);
    m_.outputs[name] = sha256_hex(text);
    result_.outputs.push_back(p);
    return p;
  }
  fs::path adopt(const fs::path& p) {
    m_.outputs[p.filename().string()] = file_digest(p);
    result_.outputs.push_back(p);
    return p;
  }

  StageResult finish(std::string summary) {
    const auto p = dir_ / "manifest.json";
    write_file_text(p, to_json(m_));
    result_.outputs.push_back(p);
    result_.summary = std::move(summary);
    return std::move(result_);
  }

  StageResult& result() { return result_; }

 private:
  std::string label(const fs::path& p) const {
    const auto rel = p.lexically_relative(root_);
    return rel.empty() || rel.native().rfind("..", 0) == 0 ? p.filename().string() : rel.generic_string();
  }

  fs::path dir_;
  fs::path root_;
  Manifest m_;
  StageResult result_;
};

// Ingest -------------------------------------------------------------------

struct RecordEntry {
  std::string name;
  double sampling_rate = 0.0;
  std::int64_t n_samples = 0;
  std::string digest;
};

std::string write_records(const std::vector<RecordEntry>& rs) {
  std::string out = "# name sampling_rate n_samples digest\n";
  for (const auto& r : rs) out += r.name + " " + fmt(r.sampling_rate) + " " + std::to_string(r.n_samples) + " " + r.digest + "\n";
  return out;
}

std::vector<RecordEntry> parse_records(std::string_view text) {
  std::vector<RecordEntry> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = parse_list(line);
    if (f.size() != 4) throw ParseError("records.txt: expected 4 fields", line_no);
    out.push_back({f[0], parse_number<double>("sampling_rate", f[1]), parse_number<std::int64_t>("n_samples", f[2]),
                   f[3]});
  }
  return out;
}

// Record names in ingest order and the split they imply.
std::vector<std::string> select_records(const PipelineConfig& c) {
  if (!c.test_records.empty()) return c.records.empty() ? discover_records(c.data_dir) : c.records;
  if (!c.records.empty()) return c.records;
  const auto& all = c.task == Task::Arrhythmia ? records::mitdb_all() : records::afdb_all();
  if (!fs::is_directory(c.data_dir)) throw DataError("dataset directory '" + c.data_dir.string() + "' not found");
  std::vector<std::string> available;
  for (const auto& r : all) {
    if (any_record_available(c.data_dir, r)) available.push_back(r);
  }
  const auto spec = make_split(c.task, available, 0, c.validation_fraction);
  std::set<std::string> chosen(spec.train_patients.begin(), spec.train_patients.end());
  chosen.insert(spec.test_patients.begin(), spec.test_patients.end());
  std::vector<std::string> out;
  for (const auto& r : all) {
    if (chosen.count(r)) out.push_back(r);
  }
  return out;
}

StageResult run_ingest(const PipelineConfig& c) {
  StageWriter w(c, Stage::Ingest, "ingest");
  const auto names = select_records(c);
  if (names.empty()) throw DataError("no records found in '" + c.data_dir.string() + "'");
  std::vector<RecordEntry> entries;
  std::vector<SegmentInfo> segments;
  std::int64_t counts[3] = {0, 0, 0};
  for (const auto& name : names) {
    const auto files = record_files(c.data_dir, name);
    if (files.empty()) throw DataError("record " + name + " not found in '" + c.data_dir.string() + "'");
    const auto record = load_any_record(c.data_dir, name);
    std::string joined;
    for (const auto& f : files) {
      w.input(f);
      joined += file_digest(f);
    }
    entries.push_back({name, record.header.sampling_rate, record.n_samples(), sha256_hex(joined)});
    for (const auto& win : segment_record(record, c.preprocess.window_s)) {
      const auto tag = label_window(c.task, win, record.annotations);
      segments.push_back({name, win.index, win.start, tag});
      ++counts[static_cast<int>(tag)];
    }
  }
  w.write_text("records.txt", write_records(entries));
  w.write_text("segments.csv", write_segment_table(segments));
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu records, %zu segments (normal %lld, abnormal %lld, noisy %lld)", names.size(),
                segments.size(), static_cast<long long>(counts[0]), static_cast<long long>(counts[1]),
                static_cast<long long>(counts[2]));
  return w.finish(buf);
}

// Preprocess ---------------------------------------------------------------

StageResult run_preprocess(const PipelineConfig& c) {
  const auto seg_path = require(stage_dir(c, "ingest") / "segments.csv", Stage::Ingest);
  const auto rec_path = require(stage_dir(c, "ingest") / "records.txt", Stage::Ingest);
  StageWriter w(c, Stage::Preprocess, "features");
  w.input(seg_path);
  w.input(rec_path);
  const auto segments = parse_segment_table(read_file_text(seg_path));
  const auto recs = parse_records(read_file_text(rec_path));

  std::vector<FeatureTensor> tensors;
  tensors.reserve(segments.size());
  std::map<double, Preprocessor> pre;
  std::size_t k = 0;
  for (const auto& r : recs) {
    const auto record = load_any_record(c.data_dir, r.name);
    if (record.n_samples() != r.n_samples || record.header.sampling_rate != r.sampling_rate) {
      throw DataError("record " + r.name + " changed since ingest; rerun ingest");
    }
    auto it = pre.find(r.sampling_rate);
    if (it == pre.end()) it = pre.emplace(r.sampling_rate, Preprocessor(c.preprocess, r.sampling_rate)).first;
    auto feats = it->second.featurize_record(record);
    for (auto& f : feats) {
      if (k >= segments.size() || segments[k].patient_id != r.name) {
        throw DataError("segment table does not match record " + r.name + "; rerun ingest");
      }
      tensors.push_back(std::move(f));
      ++k;
    }
  }
  if (k != segments.size()) throw DataError("segment table does not match the records; rerun ingest");
  w.write_bytes("features.lsfb", encode_feature_cache(tensors));
  return w.finish(std::to_string(tensors.size()) + " feature tensors of " +
                  (tensors.empty() ? std::string("0x0")
                                   : std::to_string(tensors.front().timesteps()) + "x" +
                                         std::to_string(tensors.front().channels())));
}

// Split --------------------------------------------------------------------

StageResult run_split(const PipelineConfig& c) {
  const auto seed = c.require_seed(Stage::Split);
  const auto seg_path = require(stage_dir(c, "ingest") / "segments.csv", Stage::Ingest);
  const auto rec_path = require(stage_dir(c, "ingest") / "records.txt", Stage::Ingest);
  StageWriter w(c, Stage::Split, "split");
  w.input(seg_path);
  w.input(rec_path);
  const auto segments = parse_segment_table(read_file_text(seg_path));
  std::vector<std::string> names;
  for (const auto& r : parse_records(read_file_text(rec_path))) names.push_back(r.name);

  SplitSpec spec;
  if (!c.test_records.empty()) {
    const std::set<std::string> test(c.test_records.begin(), c.test_records.end());
    for (const auto& t : c.test_records) {
      if (std::find(names.begin(), names.end(), t) == names.end()) {
        throw DataError("test record " + t + " was not ingested");
      }
    }
    spec.task = c.task;
    for (const auto& n : names) (test.count(n) ? spec.test_patients : spec.train_patients).push_back(n);
    spec.seed = seed;
    spec.validation_fraction = c.validation_fraction;
  } else {
    spec = make_split(c.task, names, seed, c.validation_fraction);
  }
  spec.patient_wise_validation = c.patient_wise_validation;

  SplitManifest m{spec, segments, assign_partitions(spec, segments)};
  w.write_text("split.txt", write_split_manifest(m));
  const auto dist = format_distribution(distribution(spec, segments));
  w.write_text("distribution.tsv", dist);
  std::size_t n[4] = {0, 0, 0, 0};
  for (auto p : m.partitions) ++n[static_cast<int>(p)];
  char buf[160];
  std::snprintf(buf, sizeof buf, "train %zu, validation %zu, test %zu, excluded %zu\n", n[0], n[1], n[2], n[3]);
  return w.finish(buf + dist);
}

// Shared loaders -----------------------------------------------------------

struct PartitionData {
  std::vector<std::size_t> rows;  // indices into the split manifest
  std::vector<int> labels;
};

std::map<Partition, PartitionData> partition_rows(const SplitManifest& m) {
  std::map<Partition, PartitionData> out;
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const auto p = m.partitions[i];
    if (p == Partition::Excluded) continue;
    const auto y = binary_label(m.segments[i].tag);
    if (!y) throw DataError("split manifest assigns a noisy segment to a partition");
    out[p].rows.push_back(i);
    out[p].labels.push_back(*y);
  }
  return out;
}

SplitManifest load_split(const PipelineConfig& c, StageWriter& w) {
  const auto p = require(stage_dir(c, "split") / "split.txt", Stage::Split);
  w.input(p);
  return parse_split_manifest(read_file_text(p));
}

std::vector<FeatureTensor> load_features(const PipelineConfig& c, StageWriter& w, std::size_t expected) {
  const auto p = require(stage_dir(c, "features") / "features.lsfb", Stage::Preprocess);
  w.input(p);
  auto t = decode_feature_cache(read_file_bytes(p));
  if (t.size() != expected) throw DataError("feature cache and split manifest disagree; rerun preprocess and split");
  return t;
}

std::vector<FeatureTensor> gather_normalized(const std::vector<FeatureTensor>& all, const std::vector<std::size_t>& rows,
                                             const NormStats& norm) {
  std::vector<FeatureTensor> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(apply_norm(norm, all[r]));
  return out;
}

// Train LSTM ---------------------------------------------------------------

StageResult run_train_lstm(const PipelineConfig& c) {
  const auto seed = c.require_seed(Stage::TrainLstm);
  StageWriter w(c, Stage::TrainLstm, "model");
  const auto split = load_split(c, w);
  const auto all = load_features(c, w, split.segments.size());
  auto parts = partition_rows(split);
  const auto& tr = parts[Partition::Train];
  const auto& va = parts[Partition::Validation];
  if (tr.rows.size() < 2) throw DataError("fewer than two training segments");
  if (va.rows.empty()) throw DataError("empty validation partition; raise validation_fraction");

  std::vector<FeatureTensor> train_raw;
  train_raw.reserve(tr.rows.size());
  for (auto r : tr.rows) train_raw.push_back(all[r]);
  const auto norm = fit_norm_stats(train_raw, c.norm_mode);
  train_raw.clear();
  save_norm_stats(stage_dir(c, "model") / "norm.lsfb", norm);
  w.adopt(stage_dir(c, "model") / "norm.lsfb");

  const auto train_x = gather_normalized(all, tr.rows, norm);
  const auto val_x = gather_normalized(all, va.rows, norm);

  Rng root(seed);
  const auto init_seed = root.next();
  TrainConfig tc = c.train;
  tc.seed = root.next();
  auto result = train_lstm(LstmModel::initialize(c.units, init_seed, static_cast<int>(train_x.front().channels())),
                           train_x, tr.labels, val_x, va.labels, tc, {}, [](const EpochRecord& e) {
                             char buf[96];
                             std::snprintf(buf, sizeof buf, "epoch %d  loss %.5f  val AP %.5f\n", e.epoch,
                                           e.train_loss, e.val_ap);
                             std::fputs(buf, stderr);
                           });
  w.write_bytes("lstm.lsfb", encode_lstm(result.model));
  w.write_text("history.csv", history_csv(result.history));
  char buf[192];
  std::snprintf(buf, sizeof buf, "%zu epochs, best epoch %d with validation AP %.4f%s", result.history.epochs.size(),
                result.history.best_epoch, result.history.best_val_ap,
                result.history.stopped_early ? " (early stop)" : "");
  return w.finish(buf);
}

// Extract features ---------------------------------------------------------

constexpr Partition kFitPartitions[] = {Partition::Train, Partition::Validation, Partition::Test};

StageResult run_extract(const PipelineConfig& c) {
  const auto lstm_path = require(stage_dir(c, "model") / "lstm.lsfb", Stage::TrainLstm);
  const auto norm_path = require(stage_dir(c, "model") / "norm.lsfb", Stage::TrainLstm);
  StageWriter w(c, Stage::ExtractFeatures, "vectors");
  w.input(lstm_path);
  w.input(norm_path);
  const auto split = load_split(c, w);
  const auto all = load_features(c, w, split.segments.size());
  const auto model = load_lstm(lstm_path);
  const auto norm = load_norm_stats(norm_path);
  auto parts = partition_rows(split);

  std::vector<Eigen::MatrixXd> mats;
  std::string summary;
  for (auto p : kFitPartitions) {
    const auto& d = parts[p];
    const auto x = gather_normalized(all, d.rows, norm);
    mats.push_back(LstmNet(model).features(x, std::max(c.train.chunk, 32)));
    Eigen::MatrixXd y(static_cast<Eigen::Index>(d.labels.size()), 1), idx(y.rows(), 1);
    for (std::size_t k = 0; k < d.labels.size(); ++k) {
      y(static_cast<Eigen::Index>(k), 0) = d.labels[k];
      idx(static_cast<Eigen::Index>(k), 0) = static_cast<double>(d.rows[k]);
    }
    mats.push_back(std::move(y));
    mats.push_back(std::move(idx));
    summary += std::string(to_string(p)) + " " + std::to_string(d.rows.size()) + "  ";
  }
  save_matrices(stage_dir(c, "vectors") / "vectors.lsfb", kVectorsKind, mats);
  w.adopt(stage_dir(c, "vectors") / "vectors.lsfb");
  return w.finish("feature vectors of width " + std::to_string(model.units()) + ": " + summary);
}

struct Vectors {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<std::size_t> rows;
};

std::map<Partition, Vectors> load_vectors(const PipelineConfig& c, StageWriter& w) {
  const auto p = require(stage_dir(c, "vectors") / "vectors.lsfb", Stage::ExtractFeatures);
  w.input(p);
  const auto mats = load_matrices(p, kVectorsKind);
  if (mats.size() != 3 * std::size(kFitPartitions)) throw DataError("malformed feature-vector file; rerun extract-features");
  std::map<Partition, Vectors> out;
  for (std::size_t k = 0; k < std::size(kFitPartitions); ++k) {
    Vectors v;
    v.x = mats[3 * k];
    for (Eigen::Index i = 0; i < mats[3 * k + 1].rows(); ++i) {
      v.y.push_back(static_cast<int>(mats[3 * k + 1](i, 0)));
      v.rows.push_back(static_cast<std::size_t>(mats[3 * k + 2](i, 0)));
    }
    out[kFitPartitions[k]] = std::move(v);
  }
  return out;
}

// Train SVM ----------------------------------------------------------------

GridSpec make_grid(const std::string& name) {
  if (name == "coarse") return {{0.1, 0.5, 1.0, 1.5, 2.0}, {0.2, 0.6, 1.0}, {0.2, 0.6, 1.0}};
  return GridSpec::standard();
}

StageResult run_train_svm(const PipelineConfig& c) {
  const auto seed = c.require_seed(Stage::TrainSvm);
  StageWriter w(c, Stage::TrainSvm, "model");
  auto v = load_vectors(c, w);
  const auto& tr = v[Partition::Train];
  const auto& va = v[Partition::Validation];
  const auto grid = make_grid(c.grid);
  const auto result =
      grid_search(tr.x, tr.y, va.x, va.y, grid, c.svm, {c.grid_max_train, seed, std::max(1, c.threads)});
  w.write_bytes("svm.lsfb", encode_svm(result.best_model));
  w.write_text("grid.csv", grid_csv(result.entries));
  const auto& best = result.entries[result.best_index];
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%zu candidates on %zu training vectors; best C=%g w_neg=%g w_pos=%g gamma=%.6g, validation AP %.4f, "
                "%lld support vectors",
                result.entries.size(), result.n_train_used, best.C, best.w_neg, best.w_pos, result.best_config.gamma,
                best.val_ap, static_cast<long long>(result.best_model.n_support()));
  auto out = w.finish(buf);
  if (!result.all_converged) {
    out.convergence_warning = true;
    out.summary += "\nwarning: some SMO solves hit the iteration cap";
  }
  return out;
}

// Evaluate -----------------------------------------------------------------

std::vector<double> baseline_scores(const LstmModel& model, const Eigen::MatrixXd& v) {
  const LstmNet net(model);
  std::vector<double> out(static_cast<std::size_t>(v.rows()));
  for (Eigen::Index i = 0; i < v.rows(); ++i) out[static_cast<std::size_t>(i)] = net.head(v.row(i).transpose());
  return out;
}

std::vector<double> lsf_scores(const SvmModel& svm, const Eigen::MatrixXd& v) {
  if (v.rows() == 0) return {};
  const Eigen::VectorXd s = decision_scores(svm, v);
  return {s.data(), s.data() + s.size()};
}

StageResult run_evaluate(const PipelineConfig& c) {
  const auto lstm_path = require(stage_dir(c, "model") / "lstm.lsfb", Stage::TrainLstm);
  const auto svm_path = require(stage_dir(c, "model") / "svm.lsfb", Stage::TrainSvm);
  StageWriter w(c, Stage::Evaluate, "eval");
  w.input(lstm_path);
  w.input(svm_path);
  auto v = load_vectors(c, w);
  const auto lstm = load_lstm(lstm_path);
  const auto svm = load_svm(svm_path);
  const auto& te = v[Partition::Test];
  const auto& va = v[Partition::Validation];
  if (te.y.empty()) throw DataError("empty test partition");

  std::string summary;
  auto emit = [&](const std::string& name, const std::vector<double>& scores, const std::vector<int>& y,
                  double threshold, bool curves) {
    const auto report = evaluate(ScoredPredictions(scores, y), threshold, name);
    w.write_text(name + ".json", to_json(report));
    if (curves) {
      w.write_text(name + "_pr.csv", pr_curve_csv(report.pr));
      w.write_text(name + "_roc.csv", roc_curve_csv(report.roc));
    }
    summary += name + std::string(name.size() < 20 ? 20 - name.size() : 1, ' ') + "AP " + cell(report.ap) +
               "  AUC " + cell(report.auc_roc) + "  accuracy " + cell(report.scalars.accuracy) + "\n";
  };
  emit("baseline", baseline_scores(lstm, te.x), te.y, 0.5, true);
  emit("lsf", lsf_scores(svm, te.x), te.y, 0.0, true);
  if (!va.y.empty()) {
    emit("baseline_validation", baseline_scores(lstm, va.x), va.y, 0.5, false);
    emit("lsf_validation", lsf_scores(svm, va.x), va.y, 0.0, false);
  }
  return w.finish(summary);
}

// Benchmark ----------------------------------------------------------------

StageResult run_benchmark(const PipelineConfig& c) {
  if (c.bench_segments < 100) throw ParameterError("bench_segments must be at least 100");
  const auto lstm_path = require(stage_dir(c, "model") / "lstm.lsfb", Stage::TrainLstm);
  const auto norm_path = require(stage_dir(c, "model") / "norm.lsfb", Stage::TrainLstm);
  const auto svm_path = require(stage_dir(c, "model") / "svm.lsfb", Stage::TrainSvm);
  StageWriter w(c, Stage::Benchmark, "bench");
  w.input(lstm_path);
  w.input(norm_path);
  w.input(svm_path);
  const auto split = load_split(c, w);

  // Raw windows from the test records, falling back to every record.
  std::vector<std::string> names = split.spec.test_patients;
  if (names.empty()) names = split.spec.train_patients;
  std::vector<std::vector<double>> windows;
  std::optional<double> rate;
  for (const auto& name : names) {
    const auto record = load_any_record(c.data_dir, name);
    if (rate && *rate != record.header.sampling_rate) continue;
    rate = record.header.sampling_rate;
    const auto phys = to_physical(record, c.preprocess.channel);
    for (const auto& win : segment_record(record.n_samples(), *rate, c.preprocess.window_s)) {
      windows.emplace_back(phys.begin() + win.start, phys.begin() + win.end());
      if (windows.size() >= 256) break;
    }
    if (windows.size() >= 256) break;
  }
  if (windows.empty()) throw DataError("no complete windows available for the benchmark");

  const InferenceBundle bundle{Preprocessor(c.preprocess, *rate), load_norm_stats(norm_path), load_lstm(lstm_path),
                               load_svm(svm_path)};
  const auto report = run_latency_benchmark(bundle, windows, c.bench_segments, c.bench_warmup);
  w.write_text("benchmark.json", to_json(report));
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "%d segments on %s\n  preprocess %.6f s  lstm %.6f s  pooling %.6f s  svm %.6f s\n  total mean %.6f s "
                "(p50 %.6f, p95 %.6f) per %g s segment",
                report.n_segments, report.hardware.c_str(), report.preprocess.mean, report.lstm_forward.mean,
                report.pooling.mean, report.svm_score.mean, report.total.mean, report.total.p50, report.total.p95,
                report.segment_seconds);
  return w.finish(buf);
}

// Report -------------------------------------------------------------------

ComparisonRow row_from(const EvalReport& r, std::string name) {
  return {std::move(name), r.scalars.accuracy, r.scalars.recall, r.scalars.specificity, r.auc_roc, r.ap};
}

StageResult run_report(const PipelineConfig& c) {
  const auto base_path = require(stage_dir(c, "eval") / "baseline.json", Stage::Evaluate);
  const auto lsf_path = require(stage_dir(c, "eval") / "lsf.json", Stage::Evaluate);
  StageWriter w(c, Stage::Report, "report");
  w.input(base_path);
  w.input(lsf_path);
  const std::vector<ComparisonRow> rows{row_from(eval_report_from_json(read_file_text(lsf_path)), "LSF"),
                                        row_from(eval_report_from_json(read_file_text(base_path)), "Baseline")};
  auto md = comparison_markdown(c.task, rows);
  const auto bench_path = stage_dir(c, "bench") / "benchmark.json";
  if (fs::is_regular_file(bench_path)) {
    w.input(bench_path);
    const auto b = benchmark_report_from_json(read_file_text(bench_path));
    char buf[256];
    std::snprintf(buf, sizeof buf, "\nMean inference time per %g s segment: %.4f s (%s)\n", b.segment_seconds,
                  b.total.mean, b.hardware.c_str());
    md += buf;
  }
  w.write_text("report.md", md);
  w.write_text("report.csv", comparison_csv(c.task, rows));
  return w.finish(md);
}

// Export -------------------------------------------------------------------

StageResult run_export(const PipelineConfig& c) {
  StageWriter w(c, Stage::ExportFeatures, "export");
  const auto split = load_split(c, w);
  auto v = load_vectors(c, w);
  std::string out = "partition,patient,index,label";
  const auto width = v[Partition::Train].x.cols();
  for (Eigen::Index j = 0; j < width; ++j) out += ",v" + std::to_string(j);
  out += "\n";
  std::size_t n = 0;
  for (auto p : kFitPartitions) {
    const auto& d = v[p];
    for (std::size_t k = 0; k < d.y.size(); ++k) {
      if (d.rows[k] >= split.segments.size()) throw DataError("feature vectors do not match the split; rerun");
      const auto& s = split.segments[d.rows[k]];
      out += std::string(to_string(p)) + "," + s.patient_id + "," + std::to_string(s.index) + "," +
             std::to_string(d.y[k]);
      for (Eigen::Index j = 0; j < d.x.cols(); ++j) out += "," + fmt(d.x(static_cast<Eigen::Index>(k), j));
      out += "\n";
      ++n;
    }
  }
  w.write_text("features.csv", out);
  return w.finish(std::to_string(n) + " feature vectors exported");
}

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& config) {
  switch (stage) {
    case Stage::Ingest: return run_ingest(config);
    case Stage::Preprocess: return run_preprocess(config);
    case Stage::Split: return run_split(config);
    case Stage::TrainLstm: return run_train_lstm(config);
    case Stage::ExtractFeatures: return run_extract(config);
    case Stage::TrainSvm: return run_train_svm(config);
    case Stage::Evaluate: return run_evaluate(config);
    case Stage::Benchmark: return run_benchmark(config);
    case Stage::Report: return run_report(config);
    case Stage::ExportFeatures: return run_export(config);
  }
  throw ParameterError("unknown stage");
}

std::string to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["stage"] = m.stage;
  j["version"] = m.version;
  j["config_digest"] = m.config_digest;
  j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.inputs) j["inputs"][k] = v;
  j["outputs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.outputs) j["outputs"][k] = v;
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Manifest m;
    m.stage = j.at("stage").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.config_digest = j.at("config_digest").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

std::string manifest_digest(const fs::path& manifest_path) { return file_digest(manifest_path); }

std::string comparison_markdown(Task task, const std::vector<ComparisonRow>& rows) {
  std::string out = std::string("### ") + (task == Task::Arrhythmia ? "Arrhythmia" : "AFIB") + " detection\n\n";
  out += "| Model | Accuracy | Recall | Specificity | AUC ROC | AP score |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += "| " + r.model + " | " + cell(r.accuracy) + " | " + cell(r.recall) + " | " + cell(r.specificity) + " | " +
           cell(r.auc_roc) + " | " + cell(r.ap) + " |\n";
  }
  return out;
}

std::string comparison_csv(Task task, const std::vector<ComparisonRow>& rows) {
  std::string out = "task,model,accuracy,recall,specificity,auc_roc,ap\n";
  for (const auto& r : rows) {
    out += std::string(to_string(task)) + "," + r.model + "," + cell(r.accuracy) + "," + cell(r.recall) + "," +
           cell(r.specificity) + "," + cell(r.auc_roc) + "," + cell(r.ap) + "\n";
  }
  return out;
}

}  // namespace lsf
