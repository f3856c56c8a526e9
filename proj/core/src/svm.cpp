#include "lsf/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsf/error.hpp"
#include "lsf/log.hpp"

namespace lsf {

void SvmConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw ParameterError("C must be positive");
  if (!std::isfinite(gamma)) throw ParameterError("gamma must be finite");
  if (!(w_neg > 0.0) || !(w_pos > 0.0)) throw ParameterError("class weights must be positive");
  if (!(tolerance > 0.0)) throw ParameterError("tolerance must be positive");
  if (max_iterations < 1) throw ParameterError("max_iterations must be at least 1");
}

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  if (x.size() != z.size()) throw ParameterError("kernel arguments differ in dimension");
  double d2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - z[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double default_gamma(const Eigen::MatrixXd& x) {
  if (x.size() == 0) throw ParameterError("cannot derive gamma from an empty feature matrix");
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double d = static_cast<double>(x.cols());
  return var > 0.0 ? 1.0 / (d * var) : 1.0 / d;
}

RbfKernel::RbfKernel(Eigen::MatrixXd x, double gamma) : x_(std::move(x)), gamma_(gamma) {
  if (!(gamma_ > 0.0)) throw ParameterError("gamma must be positive");
  if (!x_.allFinite()) throw ParameterError("non-finite feature value");
  sqnorm_ = x_.rowwise().squaredNorm();
}

double RbfKernel::operator()(Eigen::Index i, Eigen::Index j) const {
  if (i == j) return 1.0;
  return std::exp(-gamma_ * (x_.row(i) - x_.row(j)).squaredNorm());
}

void RbfKernel::row(Eigen::Index i, double* out) const {
  Eigen::Map<Eigen::VectorXd> r(out, x_.rows());
  r.noalias() = x_ * x_.row(i).transpose();
  const double ni = sqnorm_[i];
  for (Eigen::Index j = 0; j < x_.rows(); ++j) {
    out[j] = std::exp(-gamma_ * std::max(0.0, ni + sqnorm_[j] - 2.0 * out[j]));
  }
  out[i] = 1.0;
}

Eigen::MatrixXd RbfKernel::matrix() const {
  Eigen::MatrixXd k(x_.rows(), x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) row(i, k.col(i).data());
  return k;
}

KernelRows::KernelRows(const RbfKernel& kernel, std::size_t budget_bytes,
                       std::shared_ptr<const Eigen::MatrixXd> gram)
    : kernel_(kernel), gram_(std::move(gram)) {
  if (gram_ && (gram_->rows() != kernel.size() || gram_->cols() != kernel.size())) {
    throw ParameterError("Gram matrix does not match the kernel");
  }
  const auto row_bytes = static_cast<std::size_t>(std::max<Eigen::Index>(kernel.size(), 1)) * sizeof(double);
  capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
}

const double* KernelRows::row(Eigen::Index i) {
  if (gram_) return gram_->col(i).data();  // symmetric
  auto it = rows_.find(i);
  if (it != rows_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.first);
    return it->second.second.data();
  }
  ++misses_;
  std::vector<double> data;
  if (rows_.size() >= capacity_) {
    const auto victim = lru_.back();
    lru_.pop_back();
    auto node = rows_.extract(victim);
    data = std::move(node.mapped().second);
  }
  data.resize(static_cast<std::size_t>(kernel_.size()));
  kernel_.row(i, data.data());
  lru_.push_front(i);
  auto& slot = rows_[i];
  slot.first = lru_.begin();
  slot.second = std::move(data);
  return slot.second.data();
}

namespace {

class Solver {
 public:
  Solver(KernelRows& rows, std::span<const int> y, double c_pos, double c_neg, double eps, bool shrinking)
      : rows_(rows), y_(y), n_(static_cast<Eigen::Index>(y.size())), eps_(eps), shrinking_(shrinking) {
    alpha_ = Eigen::VectorXd::Zero(n_);
    grad_ = Eigen::VectorXd::Constant(n_, -1.0);
    cap_.resize(n_);
    for (Eigen::Index t = 0; t < n_; ++t) cap_[t] = y_[static_cast<std::size_t>(t)] > 0 ? c_pos : c_neg;
    active_.resize(static_cast<std::size_t>(n_));
    for (Eigen::Index t = 0; t < n_; ++t) active_[static_cast<std::size_t>(t)] = t;
  }

  DualSolution run(std::int64_t max_iterations) {
    DualSolution out;
    std::int64_t iter = 0;
    std::int64_t counter = std::min<std::int64_t>(n_, 1000) + 1;
    bool unshrunk = false;
    for (;;) {
      if (shrinking_ && --counter == 0) {
        counter = std::min<std::int64_t>(n_, 1000);
        shrink(unshrunk);
      }
      Eigen::Index i = -1, j = -1;
      double gap = select(i, j);
      if (gap < eps_) {
        if (static_cast<Eigen::Index>(active_.size()) == n_) {
          out.max_violation = std::max(gap, 0.0);
          out.converged = true;
          break;
        }
        reactivate();
        counter = 1;
        gap = select(i, j);
        if (gap < eps_) {
          out.max_violation = std::max(gap, 0.0);
          out.converged = true;
          break;
        }
      }
      if (iter >= max_iterations) {
        if (static_cast<Eigen::Index>(active_.size()) < n_) reactivate();
        out.max_violation = std::max(select(i, j), 0.0);
        break;
      }
      ++iter;
      update(i, j);
    }
    out.iterations = iter;
    out.alpha = alpha_;
    out.rho = rho();
    out.objective = 0.5 * (alpha_.dot(grad_) - alpha_.sum());  // G = Qa - e  =>  f = (a'G - e'a) / 2
    return out;
  }

 private:
  int y(Eigen::Index t) const { return y_[static_cast<std::size_t>(t)]; }
  bool upper(Eigen::Index t) const { return alpha_[t] >= cap_[t]; }
  bool lower(Eigen::Index t) const { return alpha_[t] <= 0.0; }
  bool in_up(Eigen::Index t) const { return y(t) > 0 ? !upper(t) : !lower(t); }
  bool in_low(Eigen::Index t) const { return y(t) > 0 ? !lower(t) : !upper(t); }

  // m(a) - M(a) over the active set, with the maximal violating pair.
  double select(Eigen::Index& i, Eigen::Index& j) const {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    i = j = -1;
    for (auto t : active_) {
      const double v = -y(t) * grad_[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i < 0 || j < 0) return -std::numeric_limits<double>::infinity();
    return gmax - gmin;
  }

  void update(Eigen::Index i, Eigen::Index j) {
    const double* ki = rows_.row(i);
    const double* kj = rows_.row(j);
    const double ci = cap_[i], cj = cap_[j];
    const double old_i = alpha_[i], old_j = alpha_[j];
    double ai = old_i, aj = old_j;
    const double kij = ki[j];
    constexpr double tau = 1e-12;
    if (y(i) != y(j)) {
      double quad = 2.0 + 2.0 * kij;  // Q_ii + Q_jj + 2 Q_ij with Q_ij = -K_ij
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > ci - cj) {
        if (ai > ci) {
          ai = ci;
          aj = ci - diff;
        }
      } else if (aj > cj) {
        aj = cj;
        ai = cj + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > ci) {
        if (ai > ci) {
          ai = ci;
          aj = sum - ci;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > cj) {
        if (aj > cj) {
          aj = cj;
          ai = sum - cj;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }
    alpha_[i] = ai;
    alpha_[j] = aj;
    // Q_ti = y_t y_i K_ti
    const double di = (ai - old_i) * y(i);
    const double dj = (aj - old_j) * y(j);
    for (auto t : active_) grad_[t] += y(t) * (ki[t] * di + kj[t] * dj);
  }

  bool shrinkable(Eigen::Index t, double gmax1, double gmax2) const {
    if (upper(t)) return y(t) > 0 ? -grad_[t] > gmax1 : -grad_[t] > gmax2;
    if (lower(t)) return y(t) > 0 ? grad_[t] > gmax2 : grad_[t] > gmax1;
    return false;
  }

  void shrink(bool& unshrunk) {
    double gmax1 = -std::numeric_limits<double>::infinity();  // max over I_up of -y G
    double gmax2 = -std::numeric_limits<double>::infinity();  // max over I_low of y G
    for (auto t : active_) {
      if (in_up(t)) gmax1 = std::max(gmax1, -y(t) * grad_[t]);
      if (in_low(t)) gmax2 = std::max(gmax2, y(t) * grad_[t]);
    }
    if (!unshrunk && gmax1 + gmax2 <= eps_ * 10.0) {
      unshrunk = true;
      reactivate();
    }
    std::erase_if(active_, [&](Eigen::Index t) { return shrinkable(t, gmax1, gmax2); });
  }

  // Restores every variable and recomputes the gradient of the inactive ones.
  void reactivate() {
    std::vector<char> is_active(static_cast<std::size_t>(n_), 0);
    for (auto t : active_) is_active[static_cast<std::size_t>(t)] = 1;
    std::vector<Eigen::Index> inactive;
    for (Eigen::Index t = 0; t < n_; ++t) {
      if (!is_active[static_cast<std::size_t>(t)]) inactive.push_back(t);
    }
    if (!inactive.empty()) {
      for (auto t : inactive) grad_[t] = -1.0;
      for (Eigen::Index s = 0; s < n_; ++s) {
        if (alpha_[s] <= 0.0) continue;
        const double* ks = rows_.row(s);
        const double as = alpha_[s] * y(s);
        for (auto t : inactive) grad_[t] += y(t) * ks[t] * as;
      }
    }
    active_.resize(static_cast<std::size_t>(n_));
    for (Eigen::Index t = 0; t < n_; ++t) active_[static_cast<std::size_t>(t)] = t;
  }

  double rho() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n_; ++t) {
      const double yg = y(t) * grad_[t];
      if (upper(t)) {
        if (y(t) < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (lower(t)) {
        if (y(t) > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    return n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  }

  KernelRows& rows_;
  std::span<const int> y_;
  Eigen::Index n_;
  double eps_;
  bool shrinking_;
  Eigen::VectorXd alpha_, grad_, cap_;
  std::vector<Eigen::Index> active_;
};

}  // namespace

DualSolution solve_dual(KernelRows& rows, std::span<const int> y, double c_pos, double c_neg, double tolerance,
                        std::int64_t max_iterations, bool shrinking) {
  if (y.empty()) throw ParameterError("empty training set");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw ParameterError("dual labels must be -1 or +1");
  }
  if (!has_pos || !has_neg) throw TrainingError("SVM training needs examples of both classes");
  if (!(c_pos > 0.0) || !(c_neg > 0.0)) throw ParameterError("box bounds must be positive");
  Solver solver(rows, y, c_pos, c_neg, tolerance, shrinking);
  return solver.run(max_iterations);
}

bool SvmModel::operator==(const SvmModel& o) const {
  return support_vectors.rows() == o.support_vectors.rows() && support_vectors.cols() == o.support_vectors.cols() &&
         support_vectors == o.support_vectors && dual_coeffs == o.dual_coeffs && bias == o.bias &&
         gamma == o.gamma && iterations == o.iterations && converged == o.converged;
}

SvmTraining smo_train_detailed(const Eigen::MatrixXd& x, std::span<const int> labels, const SvmConfig& config,
                               std::shared_ptr<const Eigen::MatrixXd> gram) {
  config.validate();
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ParameterError("features and labels differ in length");
  std::vector<int> y(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] != 0 && labels[k] != 1) throw ParameterError("labels must be 0 or 1");
    y[k] = labels[k] == 1 ? 1 : -1;
  }
  const double gamma = config.gamma > 0.0 ? config.gamma : default_gamma(x);
  RbfKernel kernel(x, gamma);
  KernelRows rows(kernel, config.cache_bytes, std::move(gram));

  SvmTraining out;
  out.solution = solve_dual(rows, y, config.C * config.w_pos, config.C * config.w_neg, config.tolerance,
                            config.max_iterations, config.shrinking);
  const auto& a = out.solution.alpha;
  Eigen::Index m = 0;
  for (Eigen::Index t = 0; t < a.size(); ++t) m += a[t] > 0.0;
  auto& model = out.model;
  model.support_vectors.resize(m, x.cols());
  model.dual_coeffs.resize(m);
  for (Eigen::Index t = 0, k = 0; t < a.size(); ++t) {
    if (a[t] <= 0.0) continue;
    model.support_vectors.row(k) = x.row(t);
    model.dual_coeffs[k] = a[t] * y[static_cast<std::size_t>(t)];
    ++k;
  }
  model.bias = -out.solution.rho;
  model.gamma = gamma;
  model.config = config;
  model.config.gamma = gamma;
  model.iterations = out.solution.iterations;
  model.converged = out.solution.converged;
  if (!model.converged) {
    warn("SMO stopped at the iteration cap (" + std::to_string(config.max_iterations) +
         ") before reaching the KKT tolerance");
  }
  return out;
}

SvmModel smo_train(const Eigen::MatrixXd& x, std::span<const int> labels, const SvmConfig& config) {
  return smo_train_detailed(x, labels, config).model;
}

double decision_score(const SvmModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.support_vectors.cols()) {
    throw ParameterError("feature dimension does not match the SVM");
  }
  double s = model.bias;
  for (Eigen::Index k = 0; k < model.n_support(); ++k) {
    double d2 = 0.0;
    for (Eigen::Index c = 0; c < model.support_vectors.cols(); ++c) {
      const double d = model.support_vectors(k, c) - x[static_cast<std::size_t>(c)];
      d2 += d * d;
    }
    s += model.dual_coeffs[k] * std::exp(-model.gamma * d2);
  }
  return s;
}

Eigen::VectorXd decision_scores(const SvmModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.support_vectors.cols()) throw ParameterError("feature dimension does not match the SVM");
  const Eigen::VectorXd qn = x.rowwise().squaredNorm();
  const Eigen::VectorXd sn = model.support_vectors.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * x * model.support_vectors.transpose();
  d.colwise() += qn;
  d.rowwise() += sn.transpose();
  const Eigen::MatrixXd k = (-model.gamma * d.array().max(0.0)).exp().matrix();
  return (k * model.dual_coeffs).array() + model.bias;
}

int predict(const SvmModel& model, std::span<const double> x) { return decision_score(model, x) > 0.0 ? 1 : 0; }

namespace {

constexpr std::uint32_t kSvmVersion = 1;

}  // namespace

std::vector<std::uint8_t> encode_svm(const SvmModel& m) {
  ByteWriter w;
  w.f64(m.gamma);
  w.f64(m.bias);
  w.f64(m.config.C);
  w.f64(m.config.w_neg);
  w.f64(m.config.w_pos);
  w.f64(m.config.tolerance);
  w.i64(m.iterations);
  w.u8(m.converged ? 1 : 0);
  w.u64(static_cast<std::uint64_t>(m.support_vectors.rows()));
  w.u64(static_cast<std::uint64_t>(m.support_vectors.cols()));
  for (Eigen::Index k = 0; k < m.support_vectors.rows(); ++k) {
    w.f64(m.dual_coeffs[k]);
    for (Eigen::Index c = 0; c < m.support_vectors.cols(); ++c) w.f64(m.support_vectors(k, c));
  }
  return pack_container(kSvmKind, kSvmVersion, w.bytes());
}

SvmModel decode_svm(std::span<const std::uint8_t> container_bytes) {
  const auto c = unpack_container(container_bytes, kSvmKind);
  if (c.version != kSvmVersion) throw DecodeError("unsupported SVM model version", 8);
  ByteReader r(c.payload);
  SvmModel m;
  m.gamma = r.f64();
  m.bias = r.f64();
  m.config.C = r.f64();
  m.config.w_neg = r.f64();
  m.config.w_pos = r.f64();
  m.config.tolerance = r.f64();
  m.config.gamma = m.gamma;
  m.iterations = r.i64();
  m.converged = r.u8() != 0;
  const auto rows = r.u64();
  const auto cols = r.u64();
  if ((cols + 1) * rows * 8 != r.remaining()) throw DecodeError("support-vector block has the wrong size", r.offset());
  m.support_vectors.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  m.dual_coeffs.resize(static_cast<Eigen::Index>(rows));
  for (Eigen::Index k = 0; k < m.support_vectors.rows(); ++k) {
    m.dual_coeffs[k] = r.f64();
    for (Eigen::Index j = 0; j < m.support_vectors.cols(); ++j) m.support_vectors(k, j) = r.f64();
  }
  r.expect_end();
  return m;
}

void save_svm(const std::filesystem::path& path, const SvmModel& model) { write_file_bytes(path, encode_svm(model)); }

SvmModel load_svm(const std::filesystem::path& path) { return decode_svm(read_file_bytes(path)); }

std::string model_digest(const SvmModel& model) { return sha256_hex(encode_svm(model)); }

}  // namespace lsf
