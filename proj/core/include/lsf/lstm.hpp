#pragma once

// Two stacked LSTM layers, global max pooling over the second layer's hidden
// states and a single sigmoid output unit. Gate blocks are stacked in the order
// input, forget, output, candidate.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsf/container.hpp"
#include "lsf/preprocess.hpp"

namespace lsf {

struct LstmLayerParams {
  Eigen::MatrixXd wx;  // [4u x input_dim]
  Eigen::MatrixXd wh;  // [4u x u]
  Eigen::VectorXd b;   // [4u]

  static LstmLayerParams zeros(int units, int input_dim);
  int units() const { return static_cast<int>(wh.cols()); }
  int input_dim() const { return static_cast<int>(wx.cols()); }
  bool operator==(const LstmLayerParams& o) const;
};

struct LstmModel {
  LstmLayerParams layer1;
  LstmLayerParams layer2;
  Eigen::VectorXd head_w;  // [u]
  double head_b = 0.0;

  static LstmModel zeros(int units, int input_dim = 2);
  /// uniform(-1/sqrt(u), 1/sqrt(u)) weights, forget-gate bias 1, other biases 0.
  static LstmModel initialize(int units, std::uint64_t seed, int input_dim = 2);

  int units() const { return layer1.units(); }
  int input_dim() const { return layer1.input_dim(); }
  std::size_t parameter_count() const;
  /// Throws ParameterError on inconsistent shapes or non-finite entries.
  void validate() const;
  bool operator==(const LstmModel& o) const;

  /// f(name, data, size) for every parameter tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    f("layer1.wx", layer1.wx.data(), layer1.wx.size());
    f("layer1.wh", layer1.wh.data(), layer1.wh.size());
    f("layer1.b", layer1.b.data(), layer1.b.size());
    f("layer2.wx", layer2.wx.data(), layer2.wx.size());
    f("layer2.wh", layer2.wh.data(), layer2.wh.size());
    f("layer2.b", layer2.b.data(), layer2.b.size());
    f("head.w", head_w.data(), head_w.size());
    f("head.b", &head_b, Eigen::Index{1});
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<LstmModel*>(this)->visit([&](const char* name, double* p, Eigen::Index n) {
      f(name, static_cast<const double*>(p), n);
    });
  }
};

/// Hidden states [L x u] of one layer for one sequence x [L x input_dim], h_0 = c_0 = 0.
Eigen::MatrixXd lstm_layer_forward(const LstmLayerParams& params, const Eigen::MatrixXd& x);

/// v[j] = max_t h[t][j]. Throws ParameterError on an empty matrix.
Eigen::VectorXd global_max_pool(const Eigen::MatrixXd& h);
/// Argmax timestep per unit, lowest t on ties.
std::vector<Eigen::Index> global_max_pool_argmax(const Eigen::MatrixXd& h);

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> predictions, std::span<const int> labels);

/// Batched inference; sequences are processed in chunks of `chunk` columns.
class LstmNet {
 public:
  explicit LstmNet(const LstmModel& model) : model_(model) {}

  /// Pooled second-layer features, one row per sequence [n x u].
  Eigen::MatrixXd features(std::span<const FeatureTensor> inputs, int chunk = 32) const;
  /// Sigmoid outputs.
  std::vector<double> predict(std::span<const FeatureTensor> inputs, int chunk = 32) const;
  /// Sigmoid output from pooled features.
  double head(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  const LstmModel& model() const { return model_; }

 private:
  const LstmModel& model_;
};

struct LossAndGradient {
  double loss = 0.0;
  LstmModel grad;
};

/// Mean BCE over the batch and its exact gradient (full BPTT). The head-logit
/// gradient is (p - y) / n; the max-pool gradient goes to the argmax timestep.
/// Chunks of `chunk` sequences are accumulated in a fixed order.
LossAndGradient loss_and_gradient(const LstmModel& model, std::span<const FeatureTensor> inputs,
                                  std::span<const int> labels, int chunk = 16);
LossAndGradient loss_and_gradient(const LstmModel& model, std::span<const FeatureTensor* const> inputs,
                                  std::span<const int> labels, int chunk = 16);

inline constexpr KindTag kLstmKind = make_kind("LSTM");

std::vector<std::uint8_t> encode_lstm(const LstmModel& model);
LstmModel decode_lstm(std::span<const std::uint8_t> container_bytes);
void save_lstm(const std::filesystem::path& path, const LstmModel& model);
LstmModel load_lstm(const std::filesystem::path& path);
/// SHA-256 of the encoded checkpoint.
std::string model_digest(const LstmModel& model);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
  int chunk = 16;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ap = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_ap = 0.0;
  bool stopped_early = false;
};

/// "epoch,train_loss,val_ap"
std::string history_csv(const TrainHistory& history);

using ValidationScorer = std::function<double(const LstmModel&)>;
using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  LstmModel model;  // parameters of the best validation epoch
  TrainHistory history;
};

/// Adam on mini-batches, reshuffled every epoch. Keeps the parameters with the
/// best validation AP and stops after `patience` epochs without improvement.
/// A custom scorer replaces the validation AP.
TrainResult train_lstm(LstmModel initial, std::span<const FeatureTensor> train_x, std::span<const int> train_y,
                       std::span<const FeatureTensor> val_x, std::span<const int> val_y, const TrainConfig& config,
                       const ValidationScorer& scorer = {}, const EpochCallback& on_epoch = {});

}  // namespace lsf
