// lsf: command-line driver for the ECG pipeline.
//
//   lsf <stage> [--config FILE] [--key value ...]
//   lsf run [--with-benchmark] ...
//   lsf dataset build --task arrhythmia --data-dir DIR --seed N
//   lsf synth --out-dir DIR --records 20 --seed N
//   lsf config
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence warning.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsf/container.hpp"
#include "lsf/interchange.hpp"
#include "lsf/pipeline.hpp"
#include "lsf/synthetic.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kConvergence = 3 };

const char* const kBoolKeys[] = {"zero_phase", "svm_shrinking"};

bool is_bool_key(const std::string& key) {
  for (const char* k : kBoolKeys) {
    if (key == k) return true;
  }
  return false;
}

std::string flag_name(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

// Config options shared by every pipeline subcommand.
struct ConfigOptions {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<CLI::App*, std::map<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
    for (const auto& key : lsf::config_keys()) {
      auto* opt = app->add_option(flag_name(key), values[key]);
      if (is_bool_key(key)) opt->expected(0, 1);
      options[app][key] = opt;
    }
  }

  lsf::PipelineConfig build() const {
    lsf::PipelineConfig c;
    if (!config_file.empty()) c.load(lsf::read_file_text(config_file));
    for (const auto& [app, opts] : options) {
      if (!app->parsed()) continue;
      for (const auto& [key, opt] : opts) {
        if (opt->count() == 0) continue;
        const auto& v = values.at(key);
        c.set(key, v.empty() && is_bool_key(key) ? "true" : v);
      }
    }
    return c;
  }
};

int report_stage(lsf::Stage stage, const lsf::StageResult& r) {
  std::printf("[%s] %s\n", std::string(lsf::to_string(stage)).c_str(), r.summary.c_str());
  std::fflush(stdout);
  return r.convergence_warning ? kConvergence : kOk;
}

int run_stages(const std::vector<lsf::Stage>& stages, const lsf::PipelineConfig& config) {
  int code = kOk;
  for (auto s : stages) {
    if (report_stage(s, lsf::run_stage(s, config)) == kConvergence) code = kConvergence;
  }
  return code;
}

int write_synthetic(const std::string& out_dir, int n_records, const lsf::SyntheticConfig& sc, std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  const auto records = lsf::synthesize_dataset(n_records, sc, seed);
  for (const auto& r : records) {
    lsf::write_file_text(std::filesystem::path(out_dir) / (r.header.record_name + ".lsfi"), lsf::export_interchange(r));
  }
  std::printf("wrote %zu records to %s\n", records.size(), out_dir.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG arrhythmia and AFIB detection with an LSTM feature extractor and an RBF SVM"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lsf::kVersion));

  ConfigOptions opts;
  std::map<CLI::App*, lsf::Stage> stage_apps;
  for (const char* name : {"ingest", "preprocess", "split", "train-lstm", "extract-features", "train-svm", "evaluate",
                           "benchmark", "report", "export-features"}) {
    auto* sub = app.add_subcommand(name, "run the " + std::string(name) + " stage");
    opts.attach(sub);
    stage_apps[sub] = lsf::parse_stage(name);
  }

  bool with_benchmark = false;
  auto* run = app.add_subcommand("run", "run ingest through report");
  opts.attach(run);
  run->add_flag("--with-benchmark", with_benchmark, "also run the latency benchmark before the report");

  auto* dataset = app.add_subcommand("dataset", "dataset utilities");
  auto* build = dataset->add_subcommand("build", "segment, label and split a dataset (ingest + split)");
  dataset->require_subcommand(1);
  opts.attach(build);

  std::string synth_dir;
  int synth_records = 20;
  std::uint64_t synth_seed = 0;
  lsf::SyntheticConfig synth_config;
  auto* synth = app.add_subcommand("synth", "write a synthetic two-class dataset as interchange files");
  synth->add_option("--out-dir", synth_dir, "output directory")->required();
  synth->add_option("--records", synth_records, "number of records")->check(CLI::PositiveNumber);
  synth->add_option("--windows", synth_config.windows_per_record, "10 s windows per record")->check(CLI::PositiveNumber);
  synth->add_option("--abnormal-fraction", synth_config.abnormal_fraction, "probability a window is abnormal")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--sampling-rate", synth_config.sampling_rate, "Hz");
  synth->add_option("--seed", synth_seed, "random seed")->required();

  auto* keys = app.add_subcommand("config", "print the configuration keys with their defaults");
  opts.attach(keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  lsf::PipelineConfig config;
  try {
    config = opts.build();
  } catch (const lsf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }

  try {
    for (const auto& [sub, stage] : stage_apps) {
      if (sub->parsed()) return report_stage(stage, lsf::run_stage(stage, config));
    }
    if (run->parsed()) {
      auto stages = lsf::pipeline_stages();
      if (with_benchmark) stages.insert(stages.end() - 1, lsf::Stage::Benchmark);
      return run_stages(stages, config);
    }
    if (build->parsed()) return run_stages({lsf::Stage::Ingest, lsf::Stage::Split}, config);
    if (synth->parsed()) return write_synthetic(synth_dir, synth_records, synth_config, synth_seed);
    if (keys->parsed()) {
      std::fputs(config.canonical().c_str(), stdout);
      return kOk;
    }
  } catch (const lsf::ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const lsf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
