#pragma once

// Segmentation into fixed windows, binary labeling (AAMI beat classes for the
// arrhythmia task, rhythm annotations for the AFIB task) and inter-patient splits.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsf/wfdb.hpp"

namespace lsf {

enum class Task { Arrhythmia, Afib };

std::string_view to_string(Task task);
/// Accepts "arrhythmia" / "afib". Throws ParameterError otherwise.
Task parse_task(std::string_view name);

enum class ClassTag { Normal, Abnormal, Noisy };

std::string_view to_string(ClassTag tag);
ClassTag parse_class_tag(std::string_view name);
/// 0 for Normal, 1 for Abnormal, nullopt for Noisy.
std::optional<int> binary_label(ClassTag tag);

struct WindowSpan {
  std::int64_t index = 0;
  std::int64_t start = 0;   // native-rate sample index
  std::int64_t length = 0;  // native-rate samples

  std::int64_t end() const { return start + length; }
  bool operator==(const WindowSpan&) const = default;
};

/// Consecutive non-overlapping windows; the trailing partial window is dropped.
std::vector<WindowSpan> segment_record(std::int64_t n_samples, double sampling_rate, double window_s = 10.0);
/// As above; warns when the record is shorter than one window.
std::vector<WindowSpan> segment_record(const EcgRecord& record, double window_s = 10.0);

enum class AamiClass { N, S, V, F, Q, NotBeat };

/// AAMI superclass of a beat annotation symbol; NotBeat for rhythm, noise and other non-beat codes.
AamiClass aami_class(std::string_view symbol);

/// Noisy if the window holds a Q-class beat or no beats at all; otherwise
/// Abnormal if any beat is S/V/F, Normal when every beat is N.
ClassTag label_arrhythmia(const WindowSpan& window, std::span<const AnnotationEvent> annotations);

/// Majority-duration rule over the piecewise-constant rhythm defined by rhythm
/// change annotations ('+' with an aux string such as "(AFIB"). Abnormal (AFIB)
/// or Normal (any other rhythm) when that rhythm covers a strict majority of the
/// window; Noisy otherwise, which includes noise markers and undefined rhythm.
ClassTag label_afib(const WindowSpan& window, std::span<const AnnotationEvent> annotations);

ClassTag label_window(Task task, const WindowSpan& window, std::span<const AnnotationEvent> annotations);

/// Canonical record lists of the two databases.
namespace records {
const std::vector<std::string>& mitdb_all();
const std::vector<std::string>& mitdb_discarded();
const std::vector<std::string>& mitdb_test();  // DS2
const std::vector<std::string>& afdb_all();
const std::vector<std::string>& afdb_test();  // DS4
}  // namespace records

struct SplitSpec {
  Task task = Task::Arrhythmia;
  std::vector<std::string> train_patients;
  std::vector<std::string> test_patients;
  double validation_fraction = 0.3;
  std::uint64_t seed = 0;
  bool patient_wise_validation = false;

  bool operator==(const SplitSpec&) const = default;
};

/// Builds the inter-patient split from the canonical record lists. Arrhythmia:
/// DS2 is fixed, DS1 is every other non-discarded record. Afib: DS4 fixed, DS3 the
/// rest. Records in `available` decide presence: absent test or train records
/// raise DataError listing them, except AFIB records that only ship annotations
/// (no signal file), which are dropped with a warning.
SplitSpec make_split(Task task, std::span<const std::string> available, std::uint64_t seed,
                     double validation_fraction = 0.3);
/// Same, probing `data_dir` for each record.
SplitSpec make_split(Task task, const std::filesystem::path& data_dir, std::uint64_t seed,
                     double validation_fraction = 0.3);

/// Throws ParameterError if the train and test patient sets intersect or the fraction is outside [0, 1).
void validate_split(const SplitSpec& spec);

struct SegmentInfo {
  std::string patient_id;
  std::int64_t index = 0;
  std::int64_t start_sample = 0;
  ClassTag tag = ClassTag::Noisy;

  bool operator==(const SegmentInfo&) const = default;
};

enum class Partition { Train, Validation, Test, Excluded };

std::string_view to_string(Partition p);
Partition parse_partition(std::string_view name);

/// Test patients' labeled segments -> Test; train patients' labeled segments ->
/// Train, except a seeded random `validation_fraction` of them (segment-wise, or
/// whole patients when patient_wise_validation) -> Validation. Noisy segments and
/// records outside the split -> Excluded. Asserts patient disjointness.
std::vector<Partition> assign_partitions(const SplitSpec& spec, std::span<const SegmentInfo> segments);

/// Throws DataError if any patient has segments in both {Train, Validation} and Test.
void check_patient_disjoint(std::span<const SegmentInfo> segments, std::span<const Partition> partitions);

struct DistributionRow {
  std::string name;
  std::int64_t normal = 0;
  std::int64_t abnormal = 0;
  std::int64_t noisy = 0;
  std::int64_t total = 0;
};

struct DistributionReport {
  Task task = Task::Arrhythmia;
  std::vector<DistributionRow> rows;  // train set, test set, total

  const DistributionRow& row(std::string_view name) const;
};

DistributionReport distribution(const SplitSpec& spec, std::span<const SegmentInfo> segments);
/// Tab-separated table with task-specific class names.
std::string format_distribution(const DistributionReport& report);

struct SplitManifest {
  SplitSpec spec;
  std::vector<SegmentInfo> segments;
  std::vector<Partition> partitions;

  bool operator==(const SplitManifest&) const = default;
};

std::string write_split_manifest(const SplitManifest& manifest);
SplitManifest parse_split_manifest(std::string_view text);

/// "patient,index,start_sample,class_tag" CSV with a header row.
std::string write_segment_table(std::span<const SegmentInfo> segments);
std::vector<SegmentInfo> parse_segment_table(std::string_view text);

}  // namespace lsf
