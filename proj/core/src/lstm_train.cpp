#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "lsf/error.hpp"
#include "lsf/lstm.hpp"
#include "lsf/metrics.hpp"
#include "lsf/random.hpp"

namespace lsf {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (batch_size < 1) throw ParameterError("batch size must be at least 1");
  if (max_epochs < 1) throw ParameterError("max_epochs must be at least 1");
  if (patience < 1) throw ParameterError("patience must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ParameterError("Adam epsilon must be positive");
  if (chunk < 1) throw ParameterError("chunk size must be at least 1");
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,val_ap\n";
  char buf[96];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_ap);
    out += buf;
  }
  return out;
}

namespace {

struct Tensor {
  double* data;
  Eigen::Index size;
};

std::vector<Tensor> tensors(LstmModel& m) {
  std::vector<Tensor> out;
  m.visit([&](const char*, double* p, Eigen::Index n) { out.push_back({p, n}); });
  return out;
}

class Adam {
 public:
  Adam(const LstmModel& shape, const TrainConfig& cfg)
      : cfg_(cfg), m_(LstmModel::zeros(shape.units(), shape.input_dim())), v_(m_) {}

  void step(LstmModel& params, LstmModel& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    auto p = tensors(params);
    auto g = tensors(grad);
    auto m = tensors(m_);
    auto v = tensors(v_);
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (Eigen::Index i = 0; i < p[k].size; ++i) {
        const double gi = g[k].data[i];
        double& mi = m[k].data[i];
        double& vi = v[k].data[i];
        mi = cfg_.beta1 * mi + (1.0 - cfg_.beta1) * gi;
        vi = cfg_.beta2 * vi + (1.0 - cfg_.beta2) * gi * gi;
        p[k].data[i] -= cfg_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg_.adam_epsilon);
      }
    }
  }

 private:
  TrainConfig cfg_;
  LstmModel m_, v_;
  int t_ = 0;
};

void clip_global_norm(LstmModel& grad, double max_norm) {
  if (!(max_norm > 0.0)) return;
  double sq = 0.0;
  grad.visit([&](const char*, const double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) sq += p[i] * p[i];
  });
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw TrainingError("non-finite gradient");
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  grad.visit([&](const char*, double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] *= scale;
  });
}

}  // namespace

TrainResult train_lstm(LstmModel initial, std::span<const FeatureTensor> train_x, std::span<const int> train_y,
                       std::span<const FeatureTensor> val_x, std::span<const int> val_y, const TrainConfig& config,
                       const ValidationScorer& scorer, const EpochCallback& on_epoch) {
  config.validate();
  initial.validate();
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size()) {
    throw ParameterError("features and labels differ in length");
  }
  if (train_x.empty()) throw ParameterError("empty training set");
  if (val_x.empty()) throw ParameterError("empty validation set");

  ValidationScorer score = scorer;
  if (!score) {
    if (std::find(val_y.begin(), val_y.end(), 1) == val_y.end()) {
      throw ParameterError("validation set has no positive segment; AP is undefined");
    }
    std::vector<int> labels(val_y.begin(), val_y.end());
    score = [val_x, labels, chunk = std::max(config.chunk, 32)](const LstmModel& m) {
      return average_precision(ScoredPredictions(LstmNet(m).predict(val_x, chunk), labels));
    };
  }

  TrainResult result{initial, {}};
  LstmModel model = std::move(initial);
  Adam adam(model, config);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const FeatureTensor*> batch_x;
  std::vector<int> batch_y;

  double best = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch_x.clear();
      batch_y.clear();
      for (auto k = start; k < end; ++k) {
        batch_x.push_back(&train_x[order[k]]);
        batch_y.push_back(train_y[order[k]]);
      }
      auto lg = loss_and_gradient(model, std::span<const FeatureTensor* const>(batch_x), batch_y, config.chunk);
      if (!std::isfinite(lg.loss)) throw TrainingError("training loss diverged at epoch " + std::to_string(epoch));
      loss_sum += lg.loss * static_cast<double>(end - start);
      clip_global_norm(lg.grad, config.clip_norm);
      adam.step(model, lg.grad);
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), score(model)};
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_ap > best) {
      best = rec.val_ap;
      result.model = model;
      result.history.best_epoch = epoch;
      result.history.best_val_ap = rec.val_ap;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.history.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace lsf
