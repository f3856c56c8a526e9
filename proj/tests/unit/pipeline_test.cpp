#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "lsf/benchmark.hpp"
#include "lsf/container.hpp"
#include "lsf/metrics.hpp"
#include "lsf/pipeline.hpp"
#include "synthetic_run.hpp"

namespace fs = std::filesystem;

TEST(Config, SetAndCanonical) {
  lsf::PipelineConfig c;
  c.set("units", "12");
  c.set("learning_rate", "0.005");
  c.set("test_records", "a,b");
  c.set("zero_phase", "true");
  c.set("seed", "42");
  EXPECT_EQ(c.units, 12);
  EXPECT_EQ(c.train.learning_rate, 0.005);
  EXPECT_EQ(c.test_records, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(c.preprocess.zero_phase);
  EXPECT_EQ(c.require_seed(lsf::Stage::Split), 42u);
  const auto text = c.canonical();
  EXPECT_NE(text.find("units=12\n"), std::string::npos);
  EXPECT_NE(text.find("test_records=a,b\n"), std::string::npos);
  lsf::PipelineConfig d;
  d.load(text);
  EXPECT_EQ(d.canonical(), text);
}

TEST(Config, Errors) {
  lsf::PipelineConfig c;
  EXPECT_THROW(c.set("no_such_key", "1"), lsf::ParameterError);
  EXPECT_THROW(c.set("units", "ten"), lsf::ParameterError);
  EXPECT_THROW(c.require_seed(lsf::Stage::TrainLstm), lsf::ParameterError);
  try {
    c.load("units = 4\n# comment\nbogus\n");
    FAIL();
  } catch (const lsf::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
  c.load("units = 4  # trailing\n\n");
  EXPECT_EQ(c.units, 4);
}

TEST(Config, KeysCoverCanonical) {
  const auto keys = lsf::config_keys();
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  std::istringstream in(lsf::PipelineConfig{}.canonical());
  std::string line;
  while (std::getline(in, line)) {
    const auto key = line.substr(0, line.find('='));
    EXPECT_TRUE(std::binary_search(keys.begin(), keys.end(), key)) << key;
  }
}

TEST(Stages, NameRoundTrip) {
  for (int i = 0; i <= static_cast<int>(lsf::Stage::ExportFeatures); ++i) {
    const auto s = static_cast<lsf::Stage>(i);
    EXPECT_EQ(lsf::parse_stage(lsf::to_string(s)), s);
  }
  EXPECT_EQ(lsf::to_string(lsf::Stage::TrainLstm), "train-lstm");
  EXPECT_THROW(lsf::parse_stage("nope"), lsf::ParameterError);
  EXPECT_EQ(lsf::pipeline_stages().front(), lsf::Stage::Ingest);
  EXPECT_EQ(lsf::pipeline_stages().back(), lsf::Stage::Report);
}

TEST(Stages, MissingArtifactNamesProducer) {
  lsf::PipelineConfig c;
  c.work_dir = fs::temp_directory_path() / "lsf_pipeline_empty";
  fs::remove_all(c.work_dir);
  c.seed = 1;
  try {
    lsf::run_stage(lsf::Stage::Evaluate, c);
    FAIL();
  } catch (const lsf::MissingArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("run train-lstm first"), std::string::npos) << e.what();
  }
  try {
    lsf::run_stage(lsf::Stage::Preprocess, c);
    FAIL();
  } catch (const lsf::MissingArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("run ingest first"), std::string::npos) << e.what();
  }
}

TEST(Manifest, JsonRoundTrip) {
  lsf::Manifest m{"split", "0.1.0", "abc", {{"in", "01"}}, {{"out", "02"}, {"z", "03"}}};
  const auto back = lsf::manifest_from_json(lsf::to_json(m));
  EXPECT_EQ(back.stage, "split");
  EXPECT_EQ(back.config_digest, "abc");
  EXPECT_EQ(back.inputs, m.inputs);
  EXPECT_EQ(back.outputs, m.outputs);
}

TEST(Report, MarkdownAndCsvAgree) {
  std::vector<lsf::ComparisonRow> rows{{"baseline", 0.9, 0.8, 0.95, 0.97, 0.93},
                                       {"lsf", 0.91234, std::nullopt, 0.5, 0.98, 0.96}};
  const auto md = lsf::comparison_markdown(lsf::Task::Arrhythmia, rows);
  const auto csv = lsf::comparison_csv(lsf::Task::Arrhythmia, rows);
  EXPECT_NE(md.find("### Arrhythmia detection"), std::string::npos);
  EXPECT_NE(md.find("| Model | Accuracy | Recall | Specificity | AUC ROC | AP score |"), std::string::npos);
  EXPECT_NE(md.find("| lsf | 0.9123 | n/a | 0.5000 | 0.9800 | 0.9600 |"), std::string::npos);
  EXPECT_NE(csv.find("arrhythmia,lsf,0.9123,n/a,0.5000,0.9800,0.9600\n"), std::string::npos);
  EXPECT_NE(lsf::comparison_markdown(lsf::Task::Afib, rows).find("### AFIB detection"), std::string::npos);
}

TEST(Bench, LatencyStats) {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  const auto s = lsf::latency_stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 50.5);
  EXPECT_DOUBLE_EQ(s.p50, 50.0);
  EXPECT_DOUBLE_EQ(s.p95, 95.0);
  const auto one = lsf::latency_stats({2.5});
  EXPECT_EQ(one.p50, 2.5);
  EXPECT_EQ(one.p95, 2.5);
}

TEST(Bench, JsonRoundTrip) {
  lsf::BenchmarkReport r;
  r.n_segments = 1000;
  r.warmup = 20;
  r.total = {0.01, 0.009, 0.02};
  r.svm_score = {1e-5, 9e-6, 2e-5};
  r.hardware = "cpu \"x\", 4 cores";
  const auto back = lsf::benchmark_report_from_json(lsf::to_json(r));
  EXPECT_EQ(back.n_segments, 1000);
  EXPECT_EQ(back.total.p95, 0.02);
  EXPECT_EQ(back.svm_score.mean, 1e-5);
  EXPECT_EQ(back.hardware, r.hardware);
}

class SmallPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "lsf_pipeline_test";
    testing_support::write_synthetic_records(root_ / "data", 6, 12, 5);
    config_ = testing_support::small_config(root_ / "data", root_ / "work", 6, 17);
    testing_support::run_all(config_, true);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path root_;
  static lsf::PipelineConfig config_;
};

fs::path SmallPipeline::root_;
lsf::PipelineConfig SmallPipeline::config_;

TEST_F(SmallPipeline, ProducesEveryArtifact) {
  const auto w = config_.work_dir;
  for (const char* p : {"ingest/segments.csv", "split/split.txt", "model/lstm.lsfb", "model/svm.lsfb",
                        "vectors/vectors.lsfb", "eval/baseline.json", "eval/lsf.json", "bench/benchmark.json",
                        "report/report.md", "report/report.csv"}) {
    EXPECT_TRUE(fs::exists(w / p)) << p;
  }
  for (const char* d : {"ingest", "features", "split", "model", "vectors", "eval", "bench", "report"}) {
    const auto m = lsf::manifest_from_json(lsf::read_file_text(w / d / "manifest.json"));
    EXPECT_FALSE(m.outputs.empty()) << d;
    EXPECT_EQ(m.version, lsf::kVersion);
  }
  const auto report = lsf::read_file_text(w / "report/report.md");
  EXPECT_NE(report.find("| Baseline |"), std::string::npos);
  EXPECT_NE(report.find("| LSF |"), std::string::npos);
}

TEST_F(SmallPipeline, ReportMatchesEvaluation) {
  const auto e = lsf::eval_report_from_json(lsf::read_file_text(config_.work_dir / "eval/lsf.json"));
  const auto csv = lsf::read_file_text(config_.work_dir / "report/report.csv");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f\n", *e.ap);
  EXPECT_NE(csv.find(std::string(",") + buf), std::string::npos) << csv;
}

TEST_F(SmallPipeline, RerunIsIdempotent) {
  const auto before = lsf::manifest_digest(config_.work_dir / "report/manifest.json");
  const auto split_before = lsf::read_file_text(config_.work_dir / "split/split.txt");
  lsf::run_stage(lsf::Stage::Split, config_);
  lsf::run_stage(lsf::Stage::Report, config_);
  EXPECT_EQ(lsf::manifest_digest(config_.work_dir / "report/manifest.json"), before);
  EXPECT_EQ(lsf::read_file_text(config_.work_dir / "split/split.txt"), split_before);
}

TEST_F(SmallPipeline, ExportWritesOneRowPerVector) {
  lsf::run_stage(lsf::Stage::ExportFeatures, config_);
  const auto text = lsf::read_file_text(config_.work_dir / "export/features.csv");
  EXPECT_EQ(text.rfind("partition,patient,index,label,v0,", 0), 0u);
  EXPECT_NE(text.find(",v7\n"), std::string::npos);
}

TEST_F(SmallPipeline, BenchmarkRejectsTooFewSegments) {
  auto c = config_;
  c.bench_segments = 50;
  EXPECT_THROW(lsf::run_stage(lsf::Stage::Benchmark, c), lsf::ParameterError);
}
