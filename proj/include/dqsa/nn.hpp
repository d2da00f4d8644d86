#pragma once

// Recurrent dueling Q-network.
//
//   x (2K+2) -> tanh dense (H_in) -> LSTM (H) -> value head  tanh(H_v) -> 1     = V
//                                            -> advantage    tanh(H_v) -> K+1   = A
//   Q(a) = V + A(a)
//
// Every batched routine takes one sequence per column. All parameters live in one contiguous
// row-major buffer so optimizers, clipping, copies and checkpoints see a flat vector.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dqsa/error.hpp"
#include "dqsa/random.hpp"

namespace dqsa::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

struct NetworkShape {
  int num_channels = 1;
  int input_width = 32;  // dense layer after the input
  int lstm_width = 64;
  int head_width = 32;   // hidden width of both value and advantage heads

  int input_size() const { return 2 * num_channels + 2; }
  int num_actions() const { return num_channels + 1; }

  void validate() const {
    if (num_channels < 1 || input_width < 1 || lstm_width < 1 || head_width < 1)
      throw ConfigError("network: all widths and K must be >= 1");
  }
  bool operator==(const NetworkShape&) const = default;
};

enum class Param : int {
  InputW, InputB,
  GateW, GateB,      // rows: [input | forget | output | candidate], cols: [dense out | h]
  ValueW1, ValueB1, ValueW2, ValueB2,
  AdvW1, AdvB1, AdvW2, AdvB2,
};
inline constexpr int kParamCount = 12;

inline constexpr std::array<std::string_view, kParamCount> kParamNames = {
    "input.w", "input.b", "lstm.w", "lstm.b",
    "value.w1", "value.b1", "value.w2", "value.b2",
    "adv.w1", "adv.b1", "adv.w2", "adv.b2"};

class NetworkParams {
 public:
  struct Slice {
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  };

  NetworkParams() = default;

  // All-zero parameters for the given shape.
  explicit NetworkParams(NetworkShape shape) : shape_(shape) {
    shape_.validate();
    const int in = shape.input_size(), hi = shape.input_width, h = shape.lstm_width,
              hv = shape.head_width, na = shape.num_actions();
    const std::array<std::pair<int, int>, kParamCount> dims = {{
        {hi, in}, {hi, 1}, {4 * h, hi + h}, {4 * h, 1},
        {hv, h}, {hv, 1}, {1, hv}, {1, 1},
        {hv, h}, {hv, 1}, {na, hv}, {na, 1}}};
    std::size_t offset = 0;
    for (int p = 0; p < kParamCount; ++p) {
      layout_[static_cast<std::size_t>(p)] = {offset, dims[static_cast<std::size_t>(p)].first,
                                              dims[static_cast<std::size_t>(p)].second};
      offset += layout_[static_cast<std::size_t>(p)].size();
    }
    data_.assign(offset, 0.0);
  }

  const NetworkShape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const Slice& slice(Param p) const { return layout_[static_cast<std::size_t>(p)]; }

  MatrixMap mat(Param p) {
    const auto& s = slice(p);
    return MatrixMap(data_.data() + s.offset, s.rows, s.cols);
  }
  ConstMatrixMap mat(Param p) const {
    const auto& s = slice(p);
    return ConstMatrixMap(data_.data() + s.offset, s.rows, s.cols);
  }
  Eigen::Map<Vector> vec(Param p) {
    const auto& s = slice(p);
    return Eigen::Map<Vector>(data_.data() + s.offset, static_cast<Eigen::Index>(s.size()));
  }
  Eigen::Map<const Vector> vec(Param p) const {
    const auto& s = slice(p);
    return Eigen::Map<const Vector>(data_.data() + s.offset, static_cast<Eigen::Index>(s.size()));
  }
  std::span<double> values(Param p) {
    const auto& s = slice(p);
    return std::span<double>(data_).subspan(s.offset, s.size());
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  bool operator==(const NetworkParams& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  NetworkShape shape_{};
  std::array<Slice, kParamCount> layout_{};
  // Eigen's vectorized reductions peel according to the address of the first element, so a
  // fixed base alignment is what makes results reproducible from run to run.
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

using Gradients = NetworkParams;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, forget-gate bias 1.
inline NetworkParams init_params(NetworkShape shape, Rng& rng) {
  NetworkParams p(shape);
  for (Param w : {Param::InputW, Param::GateW, Param::ValueW1, Param::ValueW2, Param::AdvW1,
                  Param::AdvW2}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.slice(w).cols));
    for (double& v : p.values(w)) v = (2.0 * uniform01(rng) - 1.0) * bound;
  }
  const int h = shape.lstm_width;
  p.vec(Param::GateB).segment(h, h).setOnes();
  return p;
}

inline NetworkParams clone_params(const NetworkParams& params) { return params; }

inline void copy_into(NetworkParams& dst, const NetworkParams& src) {
  if (dst.shape() != src.shape() || dst.size() != src.size()) dst = src;
  else std::copy(src.values().begin(), src.values().end(), dst.values().begin());
}

// ---------------------------------------------------------------------------------------------
// Forward pass

// Recurrent state for a batch of sequences (one column each).
struct LstmState {
  Matrix h;
  Matrix c;

  static LstmState zeros(int width, int batch = 1) {
    return {Matrix::Zero(width, batch), Matrix::Zero(width, batch)};
  }
  int batch() const { return static_cast<int>(h.cols()); }
};

namespace detail {

inline Matrix logistic(const Matrix& m) {
  return m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

inline Matrix tanh(const Matrix& m) { return m.array().tanh().matrix(); }

inline void require_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values at ") + where);
}

}  // namespace detail

// One LSTM step on the dense-layer output x (H_in x B).
inline LstmState lstm_step(const NetworkParams& params, const Matrix& x, const LstmState& state) {
  const int h = params.shape().lstm_width;
  if (x.rows() != params.shape().input_width || state.h.rows() != h || state.c.rows() != h ||
      x.cols() != state.h.cols() || state.c.cols() != state.h.cols())
    throw ShapeError("lstm_step: shape mismatch");
  detail::require_finite(x, "lstm input");
  Matrix z(x.rows() + h, x.cols());
  z << x, state.h;
  Matrix pre = params.mat(Param::GateW) * z;
  pre.colwise() += params.vec(Param::GateB);
  const Matrix i = detail::logistic(pre.topRows(h));
  const Matrix f = detail::logistic(pre.middleRows(h, h));
  const Matrix o = detail::logistic(pre.middleRows(2 * h, h));
  const Matrix g = detail::tanh(pre.bottomRows(h));
  LstmState next;
  next.c = f.cwiseProduct(state.c) + i.cwiseProduct(g);
  next.h = o.cwiseProduct(detail::tanh(next.c));
  return next;
}

// Q(a) = V + A(a), literally; no mean-subtraction of the advantage.
inline Matrix dueling_combine(const Matrix& value, const Matrix& advantage) {
  if (value.rows() != 1 || value.cols() != advantage.cols())
    throw ShapeError("dueling_combine: value must be 1 x B matching the advantage batch");
  Matrix q = advantage;
  q.rowwise() += value.row(0);
  return q;
}

inline Vector dueling_combine(double value, const Vector& advantage) {
  return (advantage.array() + value).matrix();
}

// Activations of one step, kept for backpropagation.
struct StepCache {
  Matrix x, dense, z, i, f, o, g, c_prev, c, tanh_c, h, value_hidden, adv_hidden;
};

struct ForwardResult {
  Matrix q;  // (K+1) x B
  LstmState state;
};

namespace detail {

inline ForwardResult forward_impl(const NetworkParams& params, const Matrix& x,
                                  const LstmState& state, StepCache* cache) {
  const auto& shape = params.shape();
  if (x.rows() != shape.input_size())
    throw ShapeError("forward: input must have 2K+2 = " + std::to_string(shape.input_size()) + " rows");
  if (state.h.rows() != shape.lstm_width || state.h.cols() != x.cols())
    throw ShapeError("forward: state does not match network width or batch");
  require_finite(x, "network input");
  const int h = shape.lstm_width;

  Matrix dense = params.mat(Param::InputW) * x;
  dense.colwise() += params.vec(Param::InputB);
  dense = tanh(dense);

  Matrix z(dense.rows() + h, x.cols());
  z << dense, state.h;
  Matrix pre = params.mat(Param::GateW) * z;
  pre.colwise() += params.vec(Param::GateB);
  Matrix i = logistic(pre.topRows(h));
  Matrix f = logistic(pre.middleRows(h, h));
  Matrix o = logistic(pre.middleRows(2 * h, h));
  Matrix g = tanh(pre.bottomRows(h));
  Matrix c = f.cwiseProduct(state.c) + i.cwiseProduct(g);
  Matrix tanh_c = tanh(c);
  Matrix hn = o.cwiseProduct(tanh_c);

  Matrix vh = params.mat(Param::ValueW1) * hn;
  vh.colwise() += params.vec(Param::ValueB1);
  vh = tanh(vh);
  Matrix v = params.mat(Param::ValueW2) * vh;
  v.colwise() += params.vec(Param::ValueB2);

  Matrix ah = params.mat(Param::AdvW1) * hn;
  ah.colwise() += params.vec(Param::AdvB1);
  ah = tanh(ah);
  Matrix a = params.mat(Param::AdvW2) * ah;
  a.colwise() += params.vec(Param::AdvB2);

  ForwardResult out{dueling_combine(v, a), {hn, c}};
  require_finite(out.q, "network output");
  if (cache) {
    *cache = StepCache{x, std::move(dense), std::move(z), std::move(i), std::move(f), std::move(o),
                       std::move(g), state.c, std::move(c), std::move(tanh_c), std::move(hn),
                       std::move(vh), std::move(ah)};
  }
  return out;
}

}  // namespace detail

inline ForwardResult forward(const NetworkParams& params, const Matrix& x, const LstmState& state) {
  return detail::forward_impl(params, x, state, nullptr);
}

// Runs a whole sequence from a zero state; returns Q for every step.
inline std::vector<Matrix> forward_sequence(const NetworkParams& params,
                                            std::span<const Matrix> inputs,
                                            std::vector<StepCache>* cache = nullptr) {
  std::vector<Matrix> qs;
  qs.reserve(inputs.size());
  if (inputs.empty()) return qs;
  if (cache) cache->assign(inputs.size(), {});
  auto state = LstmState::zeros(params.shape().lstm_width, static_cast<int>(inputs[0].cols()));
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto r = detail::forward_impl(params, inputs[t], state, cache ? &(*cache)[t] : nullptr);
    qs.push_back(std::move(r.q));
    state = std::move(r.state);
  }
  return qs;
}

// ---------------------------------------------------------------------------------------------
// Backpropagation through time

struct BpttResult {
  Gradients grads;
  double loss = 0.0;  // sum of masked squared errors
};

// Gradient of sum_t sum_{a,b} mask(a,b) * (Q_t(a,b) - target_t(a,b))^2 over the full unrolled
// sequence. inputs/targets/masks hold one matrix per step with one column per sequence.
inline BpttResult backward_bptt(const NetworkParams& params, std::span<const Matrix> inputs,
                                std::span<const Matrix> targets, std::span<const Matrix> masks) {
  const auto& shape = params.shape();
  if (inputs.size() != targets.size() || inputs.size() != masks.size())
    throw ShapeError("backward_bptt: inputs, targets and masks must have the same length");
  BpttResult result{Gradients(shape), 0.0};
  if (inputs.empty()) return result;

  std::vector<StepCache> cache;
  const auto qs = forward_sequence(params, inputs, &cache);

  const int h = shape.lstm_width;
  const int hi = shape.input_width;
  const auto batch = inputs[0].cols();
  auto& gr = result.grads;
  Matrix dh_next = Matrix::Zero(h, batch);
  Matrix dc_next = Matrix::Zero(h, batch);

  for (std::size_t t = qs.size(); t-- > 0;) {
    const auto& s = cache[t];
    if (targets[t].rows() != qs[t].rows() || targets[t].cols() != batch ||
        masks[t].rows() != qs[t].rows() || masks[t].cols() != batch)
      throw ShapeError("backward_bptt: target/mask shape mismatch at step " + std::to_string(t));
    const Matrix err = (qs[t] - targets[t]).cwiseProduct(masks[t]);
    const double step_loss = err.squaredNorm();
    if (!std::isfinite(step_loss))
      throw NumericError("backward_bptt: non-finite loss at step " + std::to_string(t));
    result.loss += step_loss;

    const Matrix dq = 2.0 * err;
    const Matrix dv = dq.colwise().sum();

    gr.mat(Param::ValueW2) += dv * s.value_hidden.transpose();
    gr.vec(Param::ValueB2) += dv.rowwise().sum();
    const Matrix dvh = (params.mat(Param::ValueW2).transpose() * dv)
                           .cwiseProduct((1.0 - s.value_hidden.array().square()).matrix());
    gr.mat(Param::ValueW1) += dvh * s.h.transpose();
    gr.vec(Param::ValueB1) += dvh.rowwise().sum();

    gr.mat(Param::AdvW2) += dq * s.adv_hidden.transpose();
    gr.vec(Param::AdvB2) += dq.rowwise().sum();
    const Matrix dah = (params.mat(Param::AdvW2).transpose() * dq)
                           .cwiseProduct((1.0 - s.adv_hidden.array().square()).matrix());
    gr.mat(Param::AdvW1) += dah * s.h.transpose();
    gr.vec(Param::AdvB1) += dah.rowwise().sum();

    Matrix dh = params.mat(Param::ValueW1).transpose() * dvh +
                params.mat(Param::AdvW1).transpose() * dah + dh_next;

    const Matrix d_o = dh.cwiseProduct(s.tanh_c);
    const Matrix dc = dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix()) +
                      dc_next;
    Matrix dpre(4 * h, batch);
    dpre.topRows(h) = dc.cwiseProduct(s.g).cwiseProduct(
        s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
    dpre.middleRows(h, h) = dc.cwiseProduct(s.c_prev).cwiseProduct(
        s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
    dpre.middleRows(2 * h, h) = d_o.cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
    dpre.bottomRows(h) = dc.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());

    gr.mat(Param::GateW) += dpre * s.z.transpose();
    gr.vec(Param::GateB) += dpre.rowwise().sum();
    const Matrix dz = params.mat(Param::GateW).transpose() * dpre;
    dh_next = dz.bottomRows(h);
    dc_next = dc.cwiseProduct(s.f);

    const Matrix ddense =
        dz.topRows(hi).cwiseProduct((1.0 - s.dense.array().square()).matrix());
    gr.mat(Param::InputW) += ddense * s.x.transpose();
    gr.vec(Param::InputB) += ddense.rowwise().sum();
  }
  return result;
}

// ---------------------------------------------------------------------------------------------
// Optimization

inline double global_norm(const Gradients& g) {
  double sq = 0.0;
  for (double v : g.values()) sq += v * v;
  return std::sqrt(sq);
}

// Rescales g in place so its global L2 norm is at most max_norm. Returns the norm before clipping.
inline double clip_global_norm(Gradients& g, double max_norm) {
  const double norm = global_norm(g);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& v : g.values()) v *= s;
  }
  return norm;
}

struct AdamConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;

  OptimizerState() = default;
  OptimizerState(const NetworkParams& params, AdamConfig cfg)
      : config(cfg), first_moment(params.size(), 0.0), second_moment(params.size(), 0.0) {}
};

inline void optimizer_step(NetworkParams& params, const Gradients& grads, OptimizerState& opt) {
  if (grads.size() != params.size() || opt.first_moment.size() != params.size() ||
      opt.second_moment.size() != params.size())
    throw ShapeError("optimizer_step: gradient/optimizer state does not match parameters");
  ++opt.step;
  const auto& c = opt.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  auto w = params.values();
  auto g = grads.values();
  for (std::size_t k = 0; k < w.size(); ++k) {
    auto& m = opt.first_moment[k];
    auto& v = opt.second_moment[k];
    m = c.beta1 * m + (1.0 - c.beta1) * g[k];
    v = c.beta2 * v + (1.0 - c.beta2) * g[k] * g[k];
    w[k] -= c.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
  }
}

}  // namespace dqsa::nn
