#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <set>

namespace oracle {

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Eigen::MatrixXd lstm_layer(const lsf::LstmLayerParams& p, const Eigen::MatrixXd& x) {
  const int u = static_cast<int>(p.wh.cols());
  const int in = static_cast<int>(p.wx.cols());
  const int steps = static_cast<int>(x.rows());
  Eigen::MatrixXd h_out(steps, u);
  std::vector<double> h(u, 0.0), c(u, 0.0), z(4 * u);
  for (int t = 0; t < steps; ++t) {
    for (int r = 0; r < 4 * u; ++r) {
      double s = p.b(r);
      for (int k = 0; k < in; ++k) s += p.wx(r, k) * x(t, k);
      for (int k = 0; k < u; ++k) s += p.wh(r, k) * h[k];
      z[r] = s;
    }
    for (int j = 0; j < u; ++j) {
      const double ig = sig(z[j]);
      const double fg = sig(z[u + j]);
      const double og = sig(z[2 * u + j]);
      const double gg = std::tanh(z[3 * u + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
    }
    for (int j = 0; j < u; ++j) h_out(t, j) = h[j];
  }
  return h_out;
}

double network_output(const lsf::LstmModel& m, const lsf::FeatureTensor& x) {
  const auto h1 = lstm_layer(m.layer1, x.values);
  const auto h2 = lstm_layer(m.layer2, h1);
  double logit = m.head_b;
  for (int j = 0; j < h2.cols(); ++j) {
    double best = h2(0, j);
    for (int t = 1; t < h2.rows(); ++t) best = std::max(best, h2(t, j));
    logit += m.head_w(j) * best;
  }
  return sig(logit);
}

double network_loss(const lsf::LstmModel& m, const std::vector<lsf::FeatureTensor>& xs, const std::vector<int>& ys) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double p = std::clamp(network_output(m, xs[i]), 1e-7, 1.0 - 1e-7);
    total += ys[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(xs.size());
}

std::vector<TensorCheck> gradient_check(const lsf::LstmModel& m, const std::vector<lsf::FeatureTensor>& xs,
                                        const std::vector<int>& ys, const lsf::LstmModel& analytic, double step) {
  std::vector<std::vector<double>> grads;
  analytic.visit([&](const char*, const double* p, Eigen::Index n) { grads.emplace_back(p, p + n); });
  std::vector<TensorCheck> out;
  lsf::LstmModel probe = m;
  std::size_t k = 0;
  probe.visit([&](const char* name, double* p, Eigen::Index n) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = network_loss(probe, xs, ys);
      p[i] = saved - step;
      const double down = network_loss(probe, xs, ys);
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[k][static_cast<std::size_t>(i)];
      diff += (a - numeric) * (a - numeric);
      na += a * a;
      nn += numeric * numeric;
    }
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    out.push_back({name, std::sqrt(diff) / scale});
    ++k;
  });
  return out;
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& x, double gamma) {
  const auto n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
  }
  return k;
}

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& v, const Eigen::VectorXd& y, const Eigen::VectorXd& ub) {
  auto at = [&](double lambda) {
    Eigen::VectorXd a(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) a(i) = std::clamp(v(i) - lambda * y(i), 0.0, ub(i));
    return a;
  };
  // y'a(lambda) is non-increasing in lambda.
  double lo = -1.0, hi = 1.0;
  while (y.dot(at(lo)) < 0.0) lo *= 2.0;
  while (y.dot(at(hi)) > 0.0) hi *= 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (y.dot(at(mid)) > 0.0 ? lo : hi) = mid;
  }
  return at(0.5 * (lo + hi));
}

}  // namespace

QpSolution svm_dual_qp(const Eigen::MatrixXd& k, const std::vector<int>& y_pm, const Eigen::VectorXd& ub,
                       int max_iterations) {
  const auto n = k.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = y_pm[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd q = y.asDiagonal() * k * y.asDiagonal();
  const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(lip, 1e-12);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), z = a, prev = a;
  double t = 1.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd grad = q * z - Eigen::VectorXd::Ones(n);
    a = project(z - step * grad, y, ub);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = a + ((t - 1.0) / t_next) * (a - prev);
    t = t_next;
    if ((a - prev).lpNorm<Eigen::Infinity>() < 1e-15 && it > 10) break;
    prev = a;
  }

  QpSolution s;
  s.alpha = a;
  s.objective = 0.5 * a.dot(q * a) - a.sum();
  // Offset from the KKT conditions: mean of y_i * grad_i over free variables,
  // otherwise the midpoint of the feasible interval.
  const Eigen::VectorXd g = q * a - Eigen::VectorXd::Ones(n);
  double sum = 0.0, ub_rho = INFINITY, lb_rho = -INFINITY;
  int free = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yg = y(i) * g(i);
    const double tol = 1e-9 * std::max(1.0, ub(i));
    if (a(i) > tol && a(i) < ub(i) - tol) {
      sum += yg;
      ++free;
    } else if ((a(i) <= tol) == (y(i) > 0)) {
      ub_rho = std::min(ub_rho, yg);
    } else {
      lb_rho = std::max(lb_rho, yg);
    }
  }
  s.rho = free > 0 ? sum / free : 0.5 * (ub_rho + lb_rho);
  return s;
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  double n_pos = 0.0;
  for (int l : labels) n_pos += l;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] ? tp : fp) += 1.0;
    }
    const double recall = tp / n_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

double auc_rank(const std::vector<double>& scores, const std::vector<int>& labels) {
  double u = 0.0, n_pos = 0.0, n_neg = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    n_pos += 1.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) u += 1.0;
      else if (scores[i] == scores[j]) u += 0.5;
    }
  }
  for (int l : labels) n_neg += l ? 0.0 : 1.0;
  return u / (n_pos * n_neg);
}

void pack212(int a, int b, std::uint8_t out[3]) {
  const unsigned ua = static_cast<unsigned>(a) & 0xFFFu;
  const unsigned ub = static_cast<unsigned>(b) & 0xFFFu;
  out[0] = static_cast<std::uint8_t>(ua & 0xFFu);
  out[1] = static_cast<std::uint8_t>(((ub >> 8) << 4) | (ua >> 8));
  out[2] = static_cast<std::uint8_t>(ub & 0xFFu);
}

}  // namespace oracle
