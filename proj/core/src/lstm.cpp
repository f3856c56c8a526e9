#include "lsf/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "lsf/error.hpp"
#include "lsf/random.hpp"

namespace lsf {

LstmLayerParams LstmLayerParams::zeros(int units, int input_dim) {
  if (units < 1 || input_dim < 1) throw ParameterError("LSTM layer needs units >= 1 and input_dim >= 1");
  return {Eigen::MatrixXd::Zero(4 * units, input_dim), Eigen::MatrixXd::Zero(4 * units, units),
          Eigen::VectorXd::Zero(4 * units)};
}

bool LstmLayerParams::operator==(const LstmLayerParams& o) const {
  return wx.rows() == o.wx.rows() && wx.cols() == o.wx.cols() && wh.rows() == o.wh.rows() &&
         wh.cols() == o.wh.cols() && b.size() == o.b.size() && wx == o.wx && wh == o.wh && b == o.b;
}

LstmModel LstmModel::zeros(int units, int input_dim) {
  LstmModel m;
  m.layer1 = LstmLayerParams::zeros(units, input_dim);
  m.layer2 = LstmLayerParams::zeros(units, units);
  m.head_w = Eigen::VectorXd::Zero(units);
  return m;
}

LstmModel LstmModel::initialize(int units, std::uint64_t seed, int input_dim) {
  LstmModel m = zeros(units, input_dim);
  Rng rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(units));
  for (auto* w : {&m.layer1.wx, &m.layer1.wh, &m.layer2.wx, &m.layer2.wh}) {
    for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = rng.uniform(-k, k);
  }
  for (Eigen::Index i = 0; i < m.head_w.size(); ++i) m.head_w[i] = rng.uniform(-k, k);
  m.layer1.b.segment(units, units).setOnes();
  m.layer2.b.segment(units, units).setOnes();
  return m;
}

std::size_t LstmModel::parameter_count() const {
  std::size_t n = 0;
  visit([&](const char*, const double*, Eigen::Index size) { n += static_cast<std::size_t>(size); });
  return n;
}

void LstmModel::validate() const {
  const auto u = units();
  auto check = [&](const LstmLayerParams& l, int in, const char* name) {
    if (l.wx.rows() != 4 * u || l.wx.cols() != in || l.wh.rows() != 4 * u || l.wh.cols() != u ||
        l.b.size() != 4 * u) {
      throw ParameterError(std::string("inconsistent shapes in ") + name);
    }
  };
  if (u < 1) throw ParameterError("LSTM needs at least one unit");
  check(layer1, input_dim(), "layer1");
  check(layer2, u, "layer2");
  if (head_w.size() != u) throw ParameterError("head width differs from the unit count");
  visit([](const char* name, const double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(p[i])) throw ParameterError(std::string("non-finite parameter in ") + name);
    }
  });
}

bool LstmModel::operator==(const LstmModel& o) const {
  return layer1 == o.layer1 && layer2 == o.layer2 && head_w.size() == o.head_w.size() && head_w == o.head_w &&
         head_b == o.head_b;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename Derived>
void sigmoid_inplace(Eigen::MatrixBase<Derived>&& m) {
  m = (1.0 + (-m.array()).exp()).inverse().matrix();
}

template <typename Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>&& m) {
  m = m.array().tanh().matrix();
}

// Activations of one layer over a chunk of B sequences, time-major: column t*B + b.
struct LayerTrace {
  Eigen::MatrixXd gates;  // [4u x L*B] after the nonlinearity (i, f, o sigmoid; g tanh)
  Eigen::MatrixXd c;      // [u x L*B]
  Eigen::MatrixXd h;      // [u x L*B]
};

void layer_forward(const LstmLayerParams& p, const Eigen::MatrixXd& x, Eigen::Index steps, Eigen::Index batch,
                   LayerTrace& tr) {
  const Eigen::Index u = p.units();
  tr.gates.noalias() = p.wx * x;
  tr.gates.colwise() += p.b;
  tr.c.resize(u, steps * batch);
  tr.h.resize(u, steps * batch);
  for (Eigen::Index t = 0; t < steps; ++t) {
    auto z = tr.gates.middleCols(t * batch, batch);
    if (t > 0) z.noalias() += p.wh * tr.h.middleCols((t - 1) * batch, batch);
    sigmoid_inplace(z.topRows(3 * u));
    tanh_inplace(z.bottomRows(u));
    auto c = tr.c.middleCols(t * batch, batch);
    const auto i = z.topRows(u).array();
    const auto f = z.middleRows(u, u).array();
    const auto o = z.middleRows(2 * u, u).array();
    const auto g = z.bottomRows(u).array();
    if (t > 0) {
      c = (f * tr.c.middleCols((t - 1) * batch, batch).array() + i * g).matrix();
    } else {
      c = (i * g).matrix();
    }
    tr.h.middleCols(t * batch, batch) = (o * c.array().tanh()).matrix();
  }
}

// dh holds dL/dh_t from above (consumed). Accumulates parameter gradients into
// `grad`; writes dL/dx into dx when requested.
void layer_backward(const LstmLayerParams& p, const Eigen::MatrixXd& x, const LayerTrace& tr, Eigen::Index steps,
                    Eigen::Index batch, const Eigen::MatrixXd& dh_in, LstmLayerParams& grad, Eigen::MatrixXd* dx) {
  const Eigen::Index u = p.units();
  Eigen::MatrixXd dz(4 * u, steps * batch);
  Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(u, batch);
  Eigen::ArrayXXd dc_next = Eigen::ArrayXXd::Zero(u, batch);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto z = tr.gates.middleCols(t * batch, batch);
    const auto i = z.topRows(u).array();
    const auto f = z.middleRows(u, u).array();
    const auto o = z.middleRows(2 * u, u).array();
    const auto g = z.bottomRows(u).array();
    const Eigen::ArrayXXd dh = dh_in.middleCols(t * batch, batch).array() + dh_next.array();
    const Eigen::ArrayXXd tc = tr.c.middleCols(t * batch, batch).array().tanh();
    const Eigen::ArrayXXd dc = dc_next + dh * o * (1.0 - tc.square());
    auto d = dz.middleCols(t * batch, batch);
    d.topRows(u) = (dc * g * i * (1.0 - i)).matrix();
    if (t > 0) {
      d.middleRows(u, u) = (dc * tr.c.middleCols((t - 1) * batch, batch).array() * f * (1.0 - f)).matrix();
    } else {
      d.middleRows(u, u).setZero();
    }
    d.middleRows(2 * u, u) = (dh * tc * o * (1.0 - o)).matrix();
    d.bottomRows(u) = (dc * i * (1.0 - g.square())).matrix();
    dc_next = dc * f;
    dh_next.noalias() = p.wh.transpose() * d;
  }
  grad.wx.noalias() += dz * x.transpose();
  grad.b.noalias() += dz.rowwise().sum();
  if (steps > 1) {
    grad.wh.noalias() +=
        dz.rightCols((steps - 1) * batch) * tr.h.leftCols((steps - 1) * batch).transpose();
  }
  if (dx) dx->noalias() = p.wx.transpose() * dz;
}

Eigen::Index sequence_length(std::span<const FeatureTensor* const> inputs, int input_dim) {
  if (inputs.empty()) throw ParameterError("no input sequences");
  const auto steps = inputs.front()->timesteps();
  if (steps < 1) throw ParameterError("input sequences must have at least one timestep");
  for (const auto* t : inputs) {
    if (t->timesteps() != steps) throw ParameterError("input sequences differ in length");
    if (t->channels() != input_dim) throw ParameterError("input channel count does not match the model");
    if (!t->values.allFinite()) throw ComputationError("non-finite value in LSTM input");
  }
  return steps;
}

Eigen::MatrixXd time_major(std::span<const FeatureTensor* const> chunk, Eigen::Index steps, int input_dim) {
  const auto batch = static_cast<Eigen::Index>(chunk.size());
  Eigen::MatrixXd x(input_dim, steps * batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& v = chunk[static_cast<std::size_t>(b)]->values;
    for (Eigen::Index t = 0; t < steps; ++t) x.col(t * batch + b) = v.row(t).transpose();
  }
  return x;
}

struct ChunkForward {
  Eigen::MatrixXd x;
  LayerTrace l1, l2;
  Eigen::MatrixXd pooled;                    // [u x B]
  std::vector<Eigen::Index> argmax;          // u*B, column-major by sequence
};

void chunk_forward(const LstmModel& m, std::span<const FeatureTensor* const> chunk, Eigen::Index steps,
                   ChunkForward& cf) {
  const auto batch = static_cast<Eigen::Index>(chunk.size());
  const Eigen::Index u = m.units();
  cf.x = time_major(chunk, steps, m.input_dim());
  layer_forward(m.layer1, cf.x, steps, batch, cf.l1);
  layer_forward(m.layer2, cf.l1.h, steps, batch, cf.l2);
  cf.pooled.resize(u, batch);
  cf.argmax.assign(static_cast<std::size_t>(u * batch), 0);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index j = 0; j < u; ++j) {
      double best = cf.l2.h(j, b);
      Eigen::Index arg = 0;
      for (Eigen::Index t = 1; t < steps; ++t) {
        const double v = cf.l2.h(j, t * batch + b);
        if (v > best) {
          best = v;
          arg = t;
        }
      }
      cf.pooled(j, b) = best;
      cf.argmax[static_cast<std::size_t>(b * u + j)] = arg;
    }
  }
}

std::vector<const FeatureTensor*> pointers(std::span<const FeatureTensor> inputs) {
  std::vector<const FeatureTensor*> out;
  out.reserve(inputs.size());
  for (const auto& t : inputs) out.push_back(&t);
  return out;
}

constexpr double kClamp = 1e-7;

}  // namespace

Eigen::MatrixXd lstm_layer_forward(const LstmLayerParams& params, const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw ParameterError("empty input sequence");
  if (x.cols() != params.input_dim()) throw ParameterError("input width does not match the layer");
  if (!x.allFinite()) throw ComputationError("non-finite value in LSTM input");
  LayerTrace tr;
  layer_forward(params, x.transpose(), x.rows(), 1, tr);
  return tr.h.transpose();
}

Eigen::VectorXd global_max_pool(const Eigen::MatrixXd& h) {
  if (h.rows() < 1 || h.cols() < 1) throw ParameterError("cannot pool an empty hidden-state matrix");
  return h.colwise().maxCoeff().transpose();
}

std::vector<Eigen::Index> global_max_pool_argmax(const Eigen::MatrixXd& h) {
  if (h.rows() < 1 || h.cols() < 1) throw ParameterError("cannot pool an empty hidden-state matrix");
  std::vector<Eigen::Index> out(static_cast<std::size_t>(h.cols()));
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    Eigen::Index arg = 0;
    for (Eigen::Index t = 1; t < h.rows(); ++t) {
      if (h(t, j) > h(arg, j)) arg = t;
    }
    out[static_cast<std::size_t>(j)] = arg;
  }
  return out;
}

double bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ParameterError("predictions and labels differ in length");
  if (predictions.empty()) throw ParameterError("empty prediction list");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kClamp, 1.0 - kClamp);
    sum -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(predictions.size());
}

double LstmNet::head(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return sigmoid(model_.head_w.dot(v) + model_.head_b);
}

Eigen::MatrixXd LstmNet::features(std::span<const FeatureTensor> inputs, int chunk) const {
  if (chunk < 1) throw ParameterError("chunk size must be positive");
  if (inputs.empty()) return Eigen::MatrixXd(0, model_.units());
  const auto ptrs = pointers(inputs);
  const auto steps = sequence_length(ptrs, model_.input_dim());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), model_.units());
  ChunkForward cf;
  for (std::size_t start = 0; start < ptrs.size(); start += static_cast<std::size_t>(chunk)) {
    const auto n = std::min(ptrs.size() - start, static_cast<std::size_t>(chunk));
    chunk_forward(model_, std::span(ptrs).subspan(start, n), steps, cf);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = cf.pooled.transpose();
  }
  return out;
}

std::vector<double> LstmNet::predict(std::span<const FeatureTensor> inputs, int chunk) const {
  const auto v = features(inputs, chunk);
  std::vector<double> out(static_cast<std::size_t>(v.rows()));
  for (Eigen::Index i = 0; i < v.rows(); ++i) out[static_cast<std::size_t>(i)] = head(v.row(i).transpose());
  return out;
}

LossAndGradient loss_and_gradient(const LstmModel& model, std::span<const FeatureTensor* const> inputs,
                                  std::span<const int> labels, int chunk) {
  if (inputs.size() != labels.size()) throw ParameterError("inputs and labels differ in length");
  if (chunk < 1) throw ParameterError("chunk size must be positive");
  const auto steps = sequence_length(inputs, model.input_dim());
  const Eigen::Index u = model.units();
  const double n = static_cast<double>(inputs.size());

  LossAndGradient out;
  out.grad = LstmModel::zeros(model.units(), model.input_dim());
  ChunkForward cf;
  Eigen::MatrixXd dh2, dx2;
  for (std::size_t start = 0; start < inputs.size(); start += static_cast<std::size_t>(chunk)) {
    const auto count = std::min(inputs.size() - start, static_cast<std::size_t>(chunk));
    const auto batch = static_cast<Eigen::Index>(count);
    chunk_forward(model, inputs.subspan(start, count), steps, cf);

    dh2.setZero(u, steps * batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const int y = labels[start + static_cast<std::size_t>(b)];
      if (y != 0 && y != 1) throw ParameterError("labels must be 0 or 1");
      const double p = sigmoid(model.head_w.dot(cf.pooled.col(b)) + model.head_b);
      const double pc = std::clamp(p, kClamp, 1.0 - kClamp);
      out.loss -= (y == 1 ? std::log(pc) : std::log(1.0 - pc)) / n;
      const double dz = (p - y) / n;
      out.grad.head_w.noalias() += dz * cf.pooled.col(b);
      out.grad.head_b += dz;
      for (Eigen::Index j = 0; j < u; ++j) {
        const auto t = cf.argmax[static_cast<std::size_t>(b * u + j)];
        dh2(j, t * batch + b) = dz * model.head_w[j];
      }
    }
    layer_backward(model.layer2, cf.l1.h, cf.l2, steps, batch, dh2, out.grad.layer2, &dx2);
    layer_backward(model.layer1, cf.x, cf.l1, steps, batch, dx2, out.grad.layer1, nullptr);
  }
  return out;
}

LossAndGradient loss_and_gradient(const LstmModel& model, std::span<const FeatureTensor> inputs,
                                  std::span<const int> labels, int chunk) {
  const auto ptrs = pointers(inputs);
  return loss_and_gradient(model, std::span<const FeatureTensor* const>(ptrs), labels, chunk);
}

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

std::vector<std::uint8_t> encode_lstm(const LstmModel& model) {
  model.validate();
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(model.units()));
  w.u32(static_cast<std::uint32_t>(model.input_dim()));
  model.visit([&](const char* name, const double* p, Eigen::Index n) {
    w.str(name);
    w.u64(static_cast<std::uint64_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) w.f64(p[i]);
  });
  return pack_container(kLstmKind, kCheckpointVersion, w.bytes());
}

LstmModel decode_lstm(std::span<const std::uint8_t> container_bytes) {
  const auto c = unpack_container(container_bytes, kLstmKind);
  if (c.version != kCheckpointVersion) throw DecodeError("unsupported checkpoint version", 8);
  ByteReader r(c.payload);
  const auto units = r.u32();
  const auto input_dim = r.u32();
  if (units < 1 || units > 1u << 16 || input_dim < 1 || input_dim > 1u << 16) {
    throw DecodeError("implausible checkpoint dimensions", 0);
  }
  auto model = LstmModel::zeros(static_cast<int>(units), static_cast<int>(input_dim));
  model.visit([&](const char* name, double* p, Eigen::Index n) {
    const auto at = r.offset();
    if (r.str() != name) throw DecodeError(std::string("expected tensor ") + name, at);
    if (r.u64() != static_cast<std::uint64_t>(n)) throw DecodeError(std::string("wrong size for ") + name, at);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = r.f64();
  });
  r.expect_end();
  model.validate();
  return model;
}

void save_lstm(const std::filesystem::path& path, const LstmModel& model) {
  write_file_bytes(path, encode_lstm(model));
}

LstmModel load_lstm(const std::filesystem::path& path) { return decode_lstm(read_file_bytes(path)); }

std::string model_digest(const LstmModel& model) { return sha256_hex(encode_lstm(model)); }

}  // namespace lsf
