#pragma once

// Stage orchestration. Every stage reads its inputs from, and writes its
// outputs to, the work directory, and records a manifest.json with the digests
// of its inputs, outputs and configuration:
//
//   ingest/            segments.csv, records.txt
//   features/          features.lsfb
//   split/             split.txt, distribution.tsv
//   model/             norm.lsfb, lstm.lsfb, history.csv, svm.lsfb, grid.csv
//   vectors/           vectors.lsfb
//   eval/              baseline.json, lsf.json, *_pr.csv, *_roc.csv
//   bench/             benchmark.json
//   report/            report.md, report.csv
//   export/            features.csv

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsf/dataset.hpp"
#include "lsf/error.hpp"
#include "lsf/lstm.hpp"
#include "lsf/preprocess.hpp"
#include "lsf/svm.hpp"

namespace lsf {

inline constexpr std::string_view kVersion = "0.1.0";

/// A stage's input is missing; the message names the stage to run first.
class MissingArtifactError : public DataError {
 public:
  using DataError::DataError;
};

enum class Stage {
  Ingest,
  Preprocess,
  Split,
  TrainLstm,
  ExtractFeatures,
  TrainSvm,
  Evaluate,
  Benchmark,
  Report,
  ExportFeatures,
};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);
/// Stages run by `lsf run`, in order.
const std::vector<Stage>& pipeline_stages();

struct PipelineConfig {
  std::filesystem::path data_dir;
  std::filesystem::path work_dir = "lsf-work";
  Task task = Task::Arrhythmia;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> records;       // empty: canonical list, else every record in data_dir
  std::vector<std::string> test_records;  // non-empty: custom split
  double validation_fraction = 0.3;
  bool patient_wise_validation = false;

  PreprocessConfig preprocess;
  NormMode norm_mode = NormMode::Elementwise;

  int units = 100;
  TrainConfig train;

  SvmConfig svm;
  std::string grid = "standard";  // standard | coarse
  std::size_t grid_max_train = 0;
  int threads = 1;

  int bench_segments = 1000;
  int bench_warmup = 20;

  /// key=value form of every field, one per line, sorted by key.
  std::string canonical() const;
  /// Sets one field from its key; throws ParameterError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  /// Reads "key = value" lines; '#' starts a comment. Throws ParseError with the line number.
  void load(std::string_view text);
  /// Throws ParameterError when the seed is missing.
  std::uint64_t require_seed(Stage stage) const;
};

/// Keys accepted by PipelineConfig::set, sorted.
std::vector<std::string> config_keys();

struct StageResult {
  std::vector<std::filesystem::path> outputs;
  std::string summary;  // human-readable, for the console
  bool convergence_warning = false;
};

StageResult run_stage(Stage stage, const PipelineConfig& config);

/// Record names in a directory: WFDB headers (*.hea) and interchange files (*.lsfi), sorted.
std::vector<std::string> discover_records(const std::filesystem::path& dir);
/// Loads `<name>.lsfi` when present, else the WFDB record.
EcgRecord load_any_record(const std::filesystem::path& dir, const std::string& name);
bool any_record_available(const std::filesystem::path& dir, const std::string& name);

struct Manifest {
  std::string stage;
  std::string version;
  std::string config_digest;
  std::map<std::string, std::string> inputs;   // name -> sha256
  std::map<std::string, std::string> outputs;  // name -> sha256
};

std::string to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text);
/// SHA-256 of the manifest text.
std::string manifest_digest(const std::filesystem::path& manifest_path);

struct ComparisonRow {
  std::string model;
  std::optional<double> accuracy, recall, specificity, auc_roc, ap;
};

/// Baseline-versus-LSF table.
std::string comparison_markdown(Task task, const std::vector<ComparisonRow>& rows);
std::string comparison_csv(Task task, const std::vector<ComparisonRow>& rows);

}  // namespace lsf
