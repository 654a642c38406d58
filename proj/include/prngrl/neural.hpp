#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prngrl/rng.hpp"

namespace prngrl::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Allowed-action mask, actions x batch. An empty mask allows everything.
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

/// Non-owning view of one parameter tensor and its gradient, both stored
/// column-major with identical shape.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Scalar* value;
  Scalar* grad;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<Vector<Scalar>> values() const { return {value, size()}; }
  Eigen::Map<Vector<Scalar>> grads() const { return {grad, size()}; }
};

template <typename Scalar, typename Derived>
ParamRef<Scalar> param_ref(std::string name, Eigen::PlainObjectBase<Derived>& value, Eigen::PlainObjectBase<Derived>& grad) {
  return {std::move(name), value.data(), grad.data(), value.rows(), value.cols()};
}

template <typename Scalar>
void zero_grads(const std::vector<ParamRef<Scalar>>& params) {
  for (const auto& p : params) p.grads().setZero();
}

template <typename Scalar>
Scalar grad_norm(const std::vector<ParamRef<Scalar>>& params) {
  Scalar sq = 0;
  for (const auto& p : params) sq += p.grads().squaredNorm();
  return std::sqrt(sq);
}

/// Rescales gradients to `max_norm` when their joint norm exceeds it.
/// Returns true when clipping fired.
template <typename Scalar>
bool clip_grad_norm(const std::vector<ParamRef<Scalar>>& params, Scalar max_norm) {
  const Scalar norm = grad_norm(params);
  if (!(norm > max_norm)) return false;
  for (const auto& p : params) p.grads() *= max_norm / norm;
  return true;
}

/// Entries i.i.d. uniform on +-sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
Matrix<Scalar> xavier_init(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("xavier_init: fan sizes must be >= 1");
  const Scalar bound = std::sqrt(Scalar(6) / Scalar(fan_in + fan_out));
  Matrix<Scalar> w(fan_out, fan_in);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = bound * (Scalar(2) * Scalar(uniform01(rng)) - Scalar(1));
  }
  return w;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

// --- log-softmax ------------------------------------------------------------

/// Column-wise log-softmax over allowed entries; masked entries get -inf.
/// Subtracts the column max before exponentiating.
template <typename Scalar>
Matrix<Scalar> log_softmax(const Matrix<Scalar>& logits, const MaskMatrix& mask = {}) {
  const bool masked = mask.size() != 0;
  require_shape(!masked || (mask.rows() == logits.rows() && mask.cols() == logits.cols()), "log_softmax: mask shape");
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Scalar top = kNegInf;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      if (!masked || mask(i, j)) top = std::max(top, logits(i, j));
    }
    if (top == kNegInf) throw std::invalid_argument("log_softmax: mask allows no action");
    Scalar sum = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      if (!masked || mask(i, j)) sum += std::exp(logits(i, j) - top);
    }
    const Scalar lse = top + std::log(sum);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) out(i, j) = (!masked || mask(i, j)) ? logits(i, j) - lse : kNegInf;
  }
  return out;
}

/// exp of log-probabilities with masked (-inf) entries mapped to exactly 0.
/// Eigen's vectorized exp clamps its argument, so it is not used here.
template <typename Scalar>
Matrix<Scalar> probabilities(const Matrix<Scalar>& log_probs) {
  return log_probs.unaryExpr([](Scalar v) { return std::exp(v); });
}

/// Gradient with respect to the logits given the gradient with respect to
/// the log-probabilities. Masked entries receive zero.
template <typename Scalar>
Matrix<Scalar> log_softmax_backward(const Matrix<Scalar>& log_probs, const Matrix<Scalar>& d_log_probs) {
  Matrix<Scalar> d(log_probs.rows(), log_probs.cols());
  for (Eigen::Index j = 0; j < log_probs.cols(); ++j) {
    Scalar total = 0;
    for (Eigen::Index i = 0; i < log_probs.rows(); ++i) {
      if (std::isfinite(log_probs(i, j))) total += d_log_probs(i, j);
    }
    for (Eigen::Index i = 0; i < log_probs.rows(); ++i) {
      d(i, j) = std::isfinite(log_probs(i, j)) ? d_log_probs(i, j) - std::exp(log_probs(i, j)) * total : Scalar(0);
    }
  }
  return d;
}

// --- dense ------------------------------------------------------------------

enum class Activation { identity, relu, softmax };

/// Fully connected layer y = act(W x + b) over column batches.
template <typename Scalar>
struct Dense {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;
  Activation activation = Activation::identity;
  Matrix<Scalar> weight_grad;
  Vector<Scalar> bias_grad;

  struct Tape {
    Matrix<Scalar> input;
    Matrix<Scalar> output;
  };

  Dense() = default;
  Dense(Eigen::Index in, Eigen::Index out, Activation act)
      : weight(Matrix<Scalar>::Zero(out, in)),
        bias(Vector<Scalar>::Zero(out)),
        activation(act),
        weight_grad(Matrix<Scalar>::Zero(out, in)),
        bias_grad(Vector<Scalar>::Zero(out)) {}

  Eigen::Index in_features() const { return weight.cols(); }
  Eigen::Index out_features() const { return weight.rows(); }

  void init(Rng& rng) {
    weight = xavier_init<Scalar>(in_features(), out_features(), rng);
    bias.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Tape* tape = nullptr) const {
    require_shape(x.rows() == in_features(), "dense: input size mismatch");
    Matrix<Scalar> z = weight * x;
    z.colwise() += bias;
    switch (activation) {
      case Activation::identity: break;
      case Activation::relu: z = z.cwiseMax(Scalar(0)); break;
      case Activation::softmax: z = log_softmax<Scalar>(z).array().exp().matrix(); break;
    }
    if (tape) {
      tape->input = x;
      tape->output = z;
    }
    return z;
  }

  /// Accumulates parameter gradients; returns the gradient at the input.
  Matrix<Scalar> backward(const Tape& tape, const Matrix<Scalar>& d_output) {
    require_shape(d_output.rows() == tape.output.rows() && d_output.cols() == tape.output.cols(), "dense: gradient shape");
    Matrix<Scalar> dz;
    switch (activation) {
      case Activation::identity: dz = d_output; break;
      case Activation::relu: dz = (tape.output.array() > Scalar(0)).select(d_output, Scalar(0)); break;
      case Activation::softmax: {
        const RowVector<Scalar> dot = tape.output.cwiseProduct(d_output).colwise().sum();
        dz = tape.output.cwiseProduct(d_output - dot.replicate(d_output.rows(), 1));
        break;
      }
    }
    weight_grad.noalias() += dz * tape.input.transpose();
    bias_grad += dz.rowwise().sum();
    return weight.transpose() * dz;
  }

  void append_params(std::vector<ParamRef<Scalar>>& out, const std::string& prefix) {
    out.push_back(param_ref<Scalar>(prefix + ".weight", weight, weight_grad));
    out.push_back(param_ref<Scalar>(prefix + ".bias", bias, bias_grad));
  }
};

/// Single-vector convenience form of Dense::forward.
template <typename Scalar>
Vector<Scalar> dense_forward(const Dense<Scalar>& layer, const Vector<Scalar>& x) {
  return layer.forward(Matrix<Scalar>(x)).col(0);
}

/// Stack of dense layers.
template <typename Scalar>
struct Mlp {
  std::vector<Dense<Scalar>> layers;

  struct Tape {
    std::vector<typename Dense<Scalar>::Tape> layers;
  };

  Mlp() = default;
  /// widths = {in, hidden..., out}; hidden layers use `hidden_act`.
  Mlp(const std::vector<Eigen::Index>& widths, Activation hidden_act, Activation output_act) {
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
      layers.emplace_back(widths[k], widths[k + 1], k + 2 == widths.size() ? output_act : hidden_act);
    }
  }

  void init(Rng& rng) {
    for (auto& l : layers) l.init(rng);
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Tape* tape = nullptr) const {
    if (tape) tape->layers.resize(layers.size());
    Matrix<Scalar> h = x;
    for (std::size_t k = 0; k < layers.size(); ++k) h = layers[k].forward(h, tape ? &tape->layers[k] : nullptr);
    return h;
  }

  Matrix<Scalar> backward(const Tape& tape, Matrix<Scalar> d_output) {
    if (tape.layers.size() != layers.size()) throw std::logic_error("mlp: no recorded computation");
    for (std::size_t k = layers.size(); k-- > 0;) d_output = layers[k].backward(tape.layers[k], d_output);
    return d_output;
  }

  void append_params(std::vector<ParamRef<Scalar>>& out, const std::string& prefix) {
    for (std::size_t k = 0; k < layers.size(); ++k) layers[k].append_params(out, prefix + "." + std::to_string(k));
  }
};

// --- LSTM -------------------------------------------------------------------

/// Hidden and cell vectors of one LSTM layer, hidden x batch.
template <typename Scalar>
struct LstmState {
  Matrix<Scalar> h;
  Matrix<Scalar> c;

  static LstmState zeros(Eigen::Index hidden, Eigen::Index batch) {
    return {Matrix<Scalar>::Zero(hidden, batch), Matrix<Scalar>::Zero(hidden, batch)};
  }
};

/// LSTM cell with gate blocks stacked as [input; forget; cell; output].
template <typename Scalar>
struct Lstm {
  Matrix<Scalar> w_input;   // 4H x in
  Matrix<Scalar> w_hidden;  // 4H x H
  Vector<Scalar> bias;      // 4H
  Matrix<Scalar> w_input_grad;
  Matrix<Scalar> w_hidden_grad;
  Vector<Scalar> bias_grad;

  struct Tape {
    Matrix<Scalar> x, h_prev, c_prev;
    Matrix<Scalar> i, f, g, o, c, tanh_c;
  };

  Lstm() = default;
  Lstm(Eigen::Index in, Eigen::Index hidden)
      : w_input(Matrix<Scalar>::Zero(4 * hidden, in)),
        w_hidden(Matrix<Scalar>::Zero(4 * hidden, hidden)),
        bias(Vector<Scalar>::Zero(4 * hidden)),
        w_input_grad(Matrix<Scalar>::Zero(4 * hidden, in)),
        w_hidden_grad(Matrix<Scalar>::Zero(4 * hidden, hidden)),
        bias_grad(Vector<Scalar>::Zero(4 * hidden)) {}

  Eigen::Index hidden_size() const { return w_hidden.cols(); }
  Eigen::Index input_size() const { return w_input.cols(); }

  /// Xavier per gate block; forget-gate bias 1, other biases 0.
  void init(Rng& rng) {
    const Eigen::Index hs = hidden_size();
    for (Eigen::Index gate = 0; gate < 4; ++gate) {
      w_input.middleRows(gate * hs, hs) = xavier_init<Scalar>(input_size(), hs, rng);
      w_hidden.middleRows(gate * hs, hs) = xavier_init<Scalar>(hs, hs, rng);
    }
    bias.setZero();
    bias.segment(hs, hs).setOnes();
  }

  /// One time step. Returns the new state (its h is the layer output).
  LstmState<Scalar> step(const Matrix<Scalar>& x, const LstmState<Scalar>& state, Tape* tape = nullptr) const {
    const Eigen::Index hs = hidden_size();
    require_shape(x.rows() == input_size(), "lstm: input size mismatch");
    require_shape(state.h.rows() == hs && state.c.rows() == hs && state.h.cols() == x.cols() && state.c.cols() == x.cols(),
                  "lstm: state shape mismatch");
    Matrix<Scalar> gates = w_input * x;
    gates.noalias() += w_hidden * state.h;
    gates.colwise() += bias;
    auto sig = [](Scalar v) { return sigmoid(v); };
    auto tanh = [](Scalar v) { return std::tanh(v); };
    Matrix<Scalar> i = gates.middleRows(0, hs).unaryExpr(sig);
    Matrix<Scalar> f = gates.middleRows(hs, hs).unaryExpr(sig);
    Matrix<Scalar> g = gates.middleRows(2 * hs, hs).unaryExpr(tanh);
    Matrix<Scalar> o = gates.middleRows(3 * hs, hs).unaryExpr(sig);
    LstmState<Scalar> next;
    next.c = f.cwiseProduct(state.c) + i.cwiseProduct(g);
    Matrix<Scalar> tanh_c = next.c.unaryExpr(tanh);
    next.h = o.cwiseProduct(tanh_c);
    if (tape) {
      *tape = Tape{x, state.h, state.c, std::move(i), std::move(f), std::move(g), std::move(o), next.c, std::move(tanh_c)};
    }
    return next;
  }

  struct InputGrads {
    Matrix<Scalar> x;
    Matrix<Scalar> h_prev;
    Matrix<Scalar> c_prev;
  };

  /// d_h and d_c are the total gradients reaching this step's outputs.
  InputGrads backward(const Tape& t, const Matrix<Scalar>& d_h, const Matrix<Scalar>& d_c) {
    const Eigen::Index hs = hidden_size();
    const auto ones = Matrix<Scalar>::Ones(hs, d_h.cols()).array();
    const Matrix<Scalar> dc = d_c.array() + d_h.array() * t.o.array() * (ones - t.tanh_c.array().square());
    Matrix<Scalar> d_gates(4 * hs, d_h.cols());
    d_gates.middleRows(0, hs) = dc.array() * t.g.array() * t.i.array() * (ones - t.i.array());
    d_gates.middleRows(hs, hs) = dc.array() * t.c_prev.array() * t.f.array() * (ones - t.f.array());
    d_gates.middleRows(2 * hs, hs) = dc.array() * t.i.array() * (ones - t.g.array().square());
    d_gates.middleRows(3 * hs, hs) = d_h.array() * t.tanh_c.array() * t.o.array() * (ones - t.o.array());
    w_input_grad.noalias() += d_gates * t.x.transpose();
    w_hidden_grad.noalias() += d_gates * t.h_prev.transpose();
    bias_grad += d_gates.rowwise().sum();
    return {w_input.transpose() * d_gates, w_hidden.transpose() * d_gates, dc.cwiseProduct(t.f)};
  }

  void append_params(std::vector<ParamRef<Scalar>>& out, const std::string& prefix) {
    out.push_back(param_ref<Scalar>(prefix + ".w_input", w_input, w_input_grad));
    out.push_back(param_ref<Scalar>(prefix + ".w_hidden", w_hidden, w_hidden_grad));
    out.push_back(param_ref<Scalar>(prefix + ".bias", bias, bias_grad));
  }
};

// --- Adam -------------------------------------------------------------------

template <typename Scalar>
struct AdamConfig {
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

/// Moment accumulators for one flat parameter block.
template <typename Scalar>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  long step = 0;
};

class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bias-corrected Adam update of one block; `step` must already count this
/// update (>= 1).
template <typename Scalar>
void adam_update(Eigen::Ref<Vector<Scalar>> params, const Eigen::Ref<const Vector<Scalar>>& grads, Vector<Scalar>& m,
                 Vector<Scalar>& v, long step, Scalar lr, const AdamConfig<Scalar>& cfg = {}) {
  m = cfg.beta1 * m + (Scalar(1) - cfg.beta1) * grads;
  v = cfg.beta2 * v + (Scalar(1) - cfg.beta2) * grads.cwiseAbs2();
  const Scalar m_scale = Scalar(1) / (Scalar(1) - std::pow(cfg.beta1, Scalar(step)));
  const Scalar v_scale = Scalar(1) / (Scalar(1) - std::pow(cfg.beta2, Scalar(step)));
  params.array() -= lr * (m.array() * m_scale) / ((v.array() * v_scale).sqrt() + cfg.epsilon);
}

/// Adam over a parameter group. Rejects the whole update if any gradient is
/// non-finite.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ParamRef<Scalar>> params, Scalar lr, AdamConfig<Scalar> cfg = {})
      : params_(std::move(params)), lr_(lr), cfg_(cfg) {
    for (const auto& p : params_) states_.push_back({Vector<Scalar>::Zero(p.size()), Vector<Scalar>::Zero(p.size()), 0});
  }

  void step() {
    for (const auto& p : params_) {
      if (!p.grads().allFinite()) throw NonFiniteGradientError("non-finite gradient in " + p.name);
    }
    ++step_count_;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      states_[k].step = step_count_;
      adam_update<Scalar>(params_[k].values(), params_[k].grads(), states_[k].m, states_[k].v, step_count_, lr_, cfg_);
    }
  }

  const std::vector<ParamRef<Scalar>>& params() const { return params_; }
  const std::vector<AdamState<Scalar>>& states() const { return states_; }
  long step_count() const { return step_count_; }
  Scalar learning_rate() const { return lr_; }

 private:
  std::vector<ParamRef<Scalar>> params_;
  std::vector<AdamState<Scalar>> states_;
  long step_count_ = 0;
  Scalar lr_ = Scalar(1e-3);
  AdamConfig<Scalar> cfg_;
};

}  // namespace prngrl::nn
