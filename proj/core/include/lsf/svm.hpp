#pragma once

// Soft-margin RBF support vector machine. Public labels are 0/1; the solver
// works on y = -1/+1 and the dual
//
//   min 1/2 a'Qa - e'a   s.t.  0 <= a_i <= C * w[y_i],  y'a = 0,  Q_ij = y_i y_j K(x_i, x_j)
//
// using SMO with maximal-violating-pair working sets, shrinking and an LRU
// cache of kernel rows.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsf/container.hpp"

namespace lsf {

struct SvmConfig {
  double C = 1.0;
  double gamma = 0.0;  // <= 0 selects default_gamma() of the training features
  double w_neg = 1.0;
  double w_pos = 1.0;
  double tolerance = 1e-3;
  std::int64_t max_iterations = 10'000'000;
  std::size_t cache_bytes = std::size_t{512} << 20;
  bool shrinking = true;

  void validate() const;
};

/// exp(-gamma * |x - z|^2). Throws ParameterError on a dimension mismatch.
double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);

/// 1 / (d * Var(all entries of X)), d = X.cols(); 1/d when the variance is zero.
double default_gamma(const Eigen::MatrixXd& x);

/// Immutable RBF kernel over the rows of X; safe to share between threads.
class RbfKernel {
 public:
  RbfKernel(Eigen::MatrixXd x, double gamma);

  Eigen::Index size() const { return x_.rows(); }
  double gamma() const { return gamma_; }
  const Eigen::MatrixXd& points() const { return x_; }
  double operator()(Eigen::Index i, Eigen::Index j) const;
  /// out[j] = K(x_i, x_j) for every j.
  void row(Eigen::Index i, double* out) const;
  /// Full Gram matrix.
  Eigen::MatrixXd matrix() const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd sqnorm_;
  double gamma_;
};

/// Row access for one solver: the precomputed Gram matrix when given, otherwise
/// an LRU cache of rows within `budget_bytes` (at least two rows).
class KernelRows {
 public:
  KernelRows(const RbfKernel& kernel, std::size_t budget_bytes,
             std::shared_ptr<const Eigen::MatrixXd> gram = nullptr);

  /// Valid until the next call that inserts a third distinct row.
  const double* row(Eigen::Index i);
  double diag(Eigen::Index) const { return 1.0; }
  std::size_t misses() const { return misses_; }

 private:
  const RbfKernel& kernel_;
  std::shared_ptr<const Eigen::MatrixXd> gram_;
  std::size_t capacity_ = 2;
  std::list<Eigen::Index> lru_;
  std::unordered_map<Eigen::Index, std::pair<std::list<Eigen::Index>::iterator, std::vector<double>>> rows_;
  std::size_t misses_ = 0;
};

struct DualSolution {
  Eigen::VectorXd alpha;
  double rho = 0.0;  // decision = sum a_i y_i K(x_i, x) - rho
  double objective = 0.0;
  double max_violation = 0.0;  // m(a) - M(a) at exit
  std::int64_t iterations = 0;
  bool converged = false;
};

/// y in {-1, +1}; c_pos / c_neg are the per-class upper bounds.
DualSolution solve_dual(KernelRows& rows, std::span<const int> y, double c_pos, double c_neg, double tolerance,
                        std::int64_t max_iterations, bool shrinking);

struct SvmModel {
  Eigen::MatrixXd support_vectors;  // [m x d]
  Eigen::VectorXd dual_coeffs;      // a_i y_i
  double bias = 0.0;
  double gamma = 1.0;
  SvmConfig config;
  std::int64_t iterations = 0;
  bool converged = true;

  Eigen::Index n_support() const { return support_vectors.rows(); }
  bool operator==(const SvmModel& o) const;
};

struct SvmTraining {
  SvmModel model;
  DualSolution solution;
};

/// Labels 0/1. Throws TrainingError unless both classes occur; non-convergence
/// within max_iterations is reported through converged = false and a warning.
SvmTraining smo_train_detailed(const Eigen::MatrixXd& x, std::span<const int> labels, const SvmConfig& config,
                               std::shared_ptr<const Eigen::MatrixXd> gram = nullptr);
SvmModel smo_train(const Eigen::MatrixXd& x, std::span<const int> labels, const SvmConfig& config);

double decision_score(const SvmModel& model, std::span<const double> x);
/// One score per row of X.
Eigen::VectorXd decision_scores(const SvmModel& model, const Eigen::MatrixXd& x);
/// 1 iff score > 0.
int predict(const SvmModel& model, std::span<const double> x);

inline constexpr KindTag kSvmKind = make_kind("SVMM");

std::vector<std::uint8_t> encode_svm(const SvmModel& model);
SvmModel decode_svm(std::span<const std::uint8_t> container_bytes);
void save_svm(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_svm(const std::filesystem::path& path);
std::string model_digest(const SvmModel& model);

struct GridSpec {
  std::vector<double> c_values;
  std::vector<double> w_neg_values;
  std::vector<double> w_pos_values;

  /// C in {0.1, ..., 2.0}, both class weights in {0.1, ..., 1.0}.
  static GridSpec standard();
  std::size_t size() const { return c_values.size() * w_neg_values.size() * w_pos_values.size(); }
};

struct GridOptions {
  std::size_t max_train = 0;  // > 0: stratified random subsample of the training set
  std::uint64_t seed = 0;
  int threads = 1;
};

struct GridEntry {
  double C = 0.0;
  double w_neg = 0.0;
  double w_pos = 0.0;
  double val_ap = 0.0;
  Eigen::Index n_sv = 0;
  double seconds = 0.0;
  bool converged = true;
};

struct GridResult {
  SvmConfig best_config;
  SvmModel best_model;
  std::size_t best_index = 0;
  std::vector<GridEntry> entries;
  std::size_t n_train_used = 0;
  bool all_converged = true;
};

/// Trains every grid candidate on the training set and keeps the one with the
/// best validation AP; ties go to the smaller C, then the smaller weight sum.
GridResult grid_search(const Eigen::MatrixXd& train_x, std::span<const int> train_y, const Eigen::MatrixXd& val_x,
                       std::span<const int> val_y, const GridSpec& grid, const SvmConfig& base,
                       const GridOptions& options = {});

/// Stratified subsample of row indices (sorted), keeping the class ratio.
std::vector<std::size_t> stratified_subsample(std::span<const int> labels, std::size_t n, std::uint64_t seed);

/// "C,w_neg,w_pos,val_AP,n_sv,seconds"
std::string grid_csv(std::span<const GridEntry> entries);

}  // namespace lsf
