#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "lsf/error.hpp"
#include "lsf/log.hpp"
#include "lsf/metrics.hpp"
#include "lsf/random.hpp"
#include "lsf/svm.hpp"

namespace lsf {

GridSpec GridSpec::standard() {
  GridSpec g;
  for (int k = 1; k <= 20; ++k) g.c_values.push_back(k / 10.0);
  for (int k = 1; k <= 10; ++k) {
    g.w_neg_values.push_back(k / 10.0);
    g.w_pos_values.push_back(k / 10.0);
  }
  return g;
}

std::vector<std::size_t> stratified_subsample(std::span<const int> labels, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (n >= labels.size()) {
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * static_cast<double>(pos.size()) /
                                                      static_cast<double>(labels.size())));
  n_pos = std::clamp<std::size_t>(n_pos, pos.empty() ? 0 : 1, pos.size());
  auto n_neg = std::min(n - std::min(n, n_pos), neg.size());
  if (n_neg == 0 && !neg.empty() && n_pos > 1) {
    --n_pos;
    n_neg = 1;
  }
  Rng rng(seed);
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));
  std::vector<std::size_t> out(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
  out.insert(out.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

bool better(const GridEntry& a, const GridEntry& b) {
  if (a.val_ap != b.val_ap) return a.val_ap > b.val_ap;
  if (a.C != b.C) return a.C < b.C;
  return a.w_neg + a.w_pos < b.w_neg + b.w_pos;
}

}  // namespace

GridResult grid_search(const Eigen::MatrixXd& train_x, std::span<const int> train_y, const Eigen::MatrixXd& val_x,
                       std::span<const int> val_y, const GridSpec& grid, const SvmConfig& base,
                       const GridOptions& options) {
  if (grid.size() == 0) throw ParameterError("empty hyperparameter grid");
  if (static_cast<std::size_t>(train_x.rows()) != train_y.size() ||
      static_cast<std::size_t>(val_x.rows()) != val_y.size()) {
    throw ParameterError("features and labels differ in length");
  }
  if (val_x.rows() == 0 || std::find(val_y.begin(), val_y.end(), 1) == val_y.end()) {
    throw ParameterError("validation set needs at least one positive example");
  }
  if (options.threads < 1) throw ParameterError("threads must be at least 1");

  GridResult result;
  Eigen::MatrixXd x = train_x;
  std::vector<int> y(train_y.begin(), train_y.end());
  if (options.max_train > 0 && options.max_train < y.size()) {
    const auto idx = stratified_subsample(train_y, options.max_train, options.seed);
    x.resize(static_cast<Eigen::Index>(idx.size()), train_x.cols());
    y.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k)) = train_x.row(static_cast<Eigen::Index>(idx[k]));
      y[k] = train_y[idx[k]];
    }
  }
  result.n_train_used = y.size();

  SvmConfig cfg = base;
  if (!(cfg.gamma > 0.0)) cfg.gamma = default_gamma(x);
  const RbfKernel kernel(x, cfg.gamma);
  std::shared_ptr<const Eigen::MatrixXd> gram;
  const auto n = static_cast<std::size_t>(x.rows());
  if (n * n * sizeof(double) <= cfg.cache_bytes) gram = std::make_shared<const Eigen::MatrixXd>(kernel.matrix());
  const std::vector<int> val_labels(val_y.begin(), val_y.end());

  result.entries.resize(grid.size());
  std::size_t k = 0;
  for (double c : grid.c_values) {
    for (double wn : grid.w_neg_values) {
      for (double wp : grid.w_pos_values) result.entries[k++] = {c, wn, wp};
    }
  }

  auto run = [&](GridEntry& e) {
    const auto t0 = std::chrono::steady_clock::now();
    SvmConfig c = cfg;
    c.C = e.C;
    c.w_neg = e.w_neg;
    c.w_pos = e.w_pos;
    const auto trained = smo_train_detailed(x, y, c, gram);
    const Eigen::VectorXd s = decision_scores(trained.model, val_x);
    e.val_ap = average_precision(ScoredPredictions(std::vector<double>(s.data(), s.data() + s.size()), val_labels));
    e.n_sv = trained.model.n_support();
    e.converged = trained.model.converged;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  // Threads share the read-only Gram matrix; without one each solver keeps its own cache.
  const int threads = gram ? options.threads : 1;
  if (threads == 1) {
    for (auto& e : result.entries) run(e);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < result.entries.size();) {
          try {
            run(result.entries[i]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t i = 1; i < result.entries.size(); ++i) {
    if (better(result.entries[i], result.entries[result.best_index])) result.best_index = i;
  }
  for (const auto& e : result.entries) result.all_converged = result.all_converged && e.converged;

  const auto& best = result.entries[result.best_index];
  result.best_config = cfg;
  result.best_config.C = best.C;
  result.best_config.w_neg = best.w_neg;
  result.best_config.w_pos = best.w_pos;
  result.best_model = smo_train_detailed(x, y, result.best_config, gram).model;
  return result;
}

std::string grid_csv(std::span<const GridEntry> entries) {
  std::string out = "C,w_neg,w_pos,val_AP,n_sv,seconds\n";
  char buf[160];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%g,%g,%g,%.17g,%lld,%.6f\n", e.C, e.w_neg, e.w_pos, e.val_ap,
                  static_cast<long long>(e.n_sv), e.seconds);
    out += buf;
  }
  return out;
}

}  // namespace lsf
