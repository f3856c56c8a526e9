#include "synthetic_run.hpp"

#include <cstdio>

#include "lsf/container.hpp"
#include "lsf/interchange.hpp"
#include "lsf/synthetic.hpp"

namespace testing_support {

void write_synthetic_records(const std::filesystem::path& dir, int n_records, int windows_per_record,
                             std::uint64_t seed) {
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  lsf::SyntheticConfig sc;
  sc.windows_per_record = windows_per_record;
  for (const auto& r : lsf::synthesize_dataset(n_records, sc, seed)) {
    lsf::write_file_text(dir / (r.header.record_name + ".lsfi"), lsf::export_interchange(r));
  }
}

lsf::PipelineConfig small_config(const std::filesystem::path& data_dir, const std::filesystem::path& work_dir,
                                 int n_records, std::uint64_t seed) {
  lsf::PipelineConfig c;
  c.data_dir = data_dir;
  c.work_dir = work_dir;
  c.seed = seed;
  char name[32];
  for (int i = n_records - 2; i < n_records; ++i) {
    std::snprintf(name, sizeof name, "syn%03d", i);
    c.test_records.emplace_back(name);
  }
  c.units = 8;
  c.train.max_epochs = 3;
  c.train.batch_size = 16;
  c.train.learning_rate = 0.01;
  c.grid = "coarse";
  c.bench_segments = 100;
  c.bench_warmup = 2;
  return c;
}

void run_all(const lsf::PipelineConfig& config, bool with_benchmark) {
  for (auto stage : lsf::pipeline_stages()) {
    if (with_benchmark && stage == lsf::Stage::Report) lsf::run_stage(lsf::Stage::Benchmark, config);
    lsf::run_stage(stage, config);
  }
}

}  // namespace testing_support
