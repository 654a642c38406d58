#pragma once

#include <span>
#include <string>
#include <vector>

#include "prngrl/neural.hpp"

namespace prngrl::nn {

enum class Heads { policy = 1, value = 2, both = 3 };

inline bool wants_policy(Heads h) { return (static_cast<int>(h) & 1) != 0; }
inline bool wants_value(Heads h) { return (static_cast<int>(h) & 2) != 0; }

template <typename Scalar>
struct PolicyValue {
  Matrix<Scalar> log_probs;  // actions x batch; -inf where masked
  RowVector<Scalar> values;  // 1 x batch
  Matrix<Scalar> state;      // recurrent state after the step (empty for BF)
};

/// Recurrent actor-critic: a stack of LSTM layers shared by a softmax policy
/// head and a scalar value head. The recurrent state is carried as one
/// column per sample, laid out [h_1; c_1; h_2; c_2; ...].
template <typename Scalar>
class RFNetwork {
 public:
  struct Spec {
    Eigen::Index pattern_bits = 5;
    std::vector<Eigen::Index> lstm_hidden{128, 128};
    std::vector<Eigen::Index> head_widths{256, 128, 64};
  };

  struct StepTape {
    std::vector<typename Lstm<Scalar>::Tape> lstm;
    typename Mlp<Scalar>::Tape policy;
    typename Mlp<Scalar>::Tape value;
    Matrix<Scalar> log_probs;
    Heads heads = Heads::both;
  };

  /// Steps recorded in order. Consecutive steps are treated as one chained
  /// sequence: backward propagates state gradients from step k+1 into step k.
  struct Tape {
    std::vector<StepTape> steps;
  };

  RFNetwork() = default;
  explicit RFNetwork(Spec spec) : spec_(std::move(spec)) {
    if (spec_.pattern_bits < 1 || spec_.lstm_hidden.empty()) throw std::invalid_argument("RFNetwork: bad spec");
    Eigen::Index in = spec_.pattern_bits;
    for (auto h : spec_.lstm_hidden) {
      lstm_.emplace_back(in, h);
      in = h;
    }
    std::vector<Eigen::Index> widths{in};
    widths.insert(widths.end(), spec_.head_widths.begin(), spec_.head_widths.end());
    auto policy_widths = widths;
    policy_widths.push_back(Eigen::Index{1} << spec_.pattern_bits);
    widths.push_back(1);
    policy_ = Mlp<Scalar>(policy_widths, Activation::relu, Activation::identity);
    value_ = Mlp<Scalar>(widths, Activation::relu, Activation::identity);
  }

  void init(Rng& rng) {
    for (auto& l : lstm_) l.init(rng);
    policy_.init(rng);
    value_.init(rng);
  }

  const Spec& spec() const { return spec_; }
  Eigen::Index observation_size() const { return spec_.pattern_bits; }
  Eigen::Index action_count() const { return Eigen::Index{1} << spec_.pattern_bits; }
  Eigen::Index state_size() const {
    Eigen::Index s = 0;
    for (auto h : spec_.lstm_hidden) s += 2 * h;
    return s;
  }
  Matrix<Scalar> initial_state(Eigen::Index batch) const { return Matrix<Scalar>::Zero(state_size(), batch); }

  std::vector<Lstm<Scalar>>& lstm_layers() { return lstm_; }
  const std::vector<Lstm<Scalar>>& lstm_layers() const { return lstm_; }
  Mlp<Scalar>& policy_head() { return policy_; }
  Mlp<Scalar>& value_head() { return value_; }

  PolicyValue<Scalar> forward(const Matrix<Scalar>& obs, const Matrix<Scalar>& state, const MaskMatrix& mask = {},
                              Heads heads = Heads::both, Tape* tape = nullptr) const {
    require_shape(obs.rows() == observation_size(), "rf: observation size mismatch");
    require_shape(state.rows() == state_size() && state.cols() == obs.cols(), "rf: state shape mismatch");
    StepTape* st = nullptr;
    if (tape) {
      tape->steps.emplace_back();
      st = &tape->steps.back();
      st->lstm.resize(lstm_.size());
      st->heads = heads;
    }
    PolicyValue<Scalar> out;
    out.state.resize(state_size(), obs.cols());
    Matrix<Scalar> x = obs;
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
      const Eigen::Index hs = spec_.lstm_hidden[l];
      const LstmState<Scalar> prev{state.middleRows(offset, hs), state.middleRows(offset + hs, hs)};
      auto next = lstm_[l].step(x, prev, st ? &st->lstm[l] : nullptr);
      out.state.middleRows(offset, hs) = next.h;
      out.state.middleRows(offset + hs, hs) = next.c;
      x = std::move(next.h);
      offset += 2 * hs;
    }
    if (wants_policy(heads)) {
      out.log_probs = log_softmax<Scalar>(policy_.forward(x, st ? &st->policy : nullptr), mask);
      if (st) st->log_probs = out.log_probs;
    }
    if (wants_value(heads)) out.values = value_.forward(x, st ? &st->value : nullptr);
    return out;
  }

  /// Backpropagation through every recorded step. Empty gradient matrices
  /// skip the corresponding head. Returns the gradient at the tape's initial
  /// state.
  Matrix<Scalar> backward(const Tape& tape, std::span<const Matrix<Scalar>> d_log_probs,
                          std::span<const RowVector<Scalar>> d_values) {
    if (tape.steps.empty()) throw std::logic_error("rf: no recorded computation");
    require_shape(d_log_probs.size() == tape.steps.size() && d_values.size() == tape.steps.size(),
                  "rf: one gradient per recorded step required");
    const Eigen::Index batch = tape.steps.front().lstm.front().x.cols();
    Matrix<Scalar> d_state = Matrix<Scalar>::Zero(state_size(), batch);
    for (std::size_t k = tape.steps.size(); k-- > 0;) {
      const auto& st = tape.steps[k];
      const Eigen::Index top = spec_.lstm_hidden.back();
      Matrix<Scalar> d_top = Matrix<Scalar>::Zero(top, batch);
      if (d_log_probs[k].size() != 0) {
        if (!wants_policy(st.heads)) throw std::logic_error("rf: policy head was not recorded");
        d_top += policy_.backward(st.policy, log_softmax_backward<Scalar>(st.log_probs, d_log_probs[k]));
      }
      if (d_values[k].size() != 0) {
        if (!wants_value(st.heads)) throw std::logic_error("rf: value head was not recorded");
        d_top += value_.backward(st.value, d_values[k]);
      }
      Eigen::Index offset = state_size();
      Matrix<Scalar> d_h = d_top;
      for (std::size_t l = lstm_.size(); l-- > 0;) {
        const Eigen::Index hs = spec_.lstm_hidden[l];
        offset -= 2 * hs;
        d_h += d_state.middleRows(offset, hs);
        const Matrix<Scalar> d_c = d_state.middleRows(offset + hs, hs);
        auto g = lstm_[l].backward(st.lstm[l], d_h, d_c);
        d_state.middleRows(offset, hs) = g.h_prev;
        d_state.middleRows(offset + hs, hs) = g.c_prev;
        d_h = std::move(g.x);
      }
    }
    return d_state;
  }

  std::vector<ParamRef<Scalar>> trunk_params() {
    std::vector<ParamRef<Scalar>> out;
    for (std::size_t l = 0; l < lstm_.size(); ++l) lstm_[l].append_params(out, "lstm." + std::to_string(l));
    return out;
  }
  std::vector<ParamRef<Scalar>> policy_params() {
    auto out = trunk_params();
    policy_.append_params(out, "policy");
    return out;
  }
  std::vector<ParamRef<Scalar>> value_params() {
    auto out = trunk_params();
    value_.append_params(out, "value");
    return out;
  }
  std::vector<ParamRef<Scalar>> all_params() {
    auto out = trunk_params();
    policy_.append_params(out, "policy");
    value_.append_params(out, "value");
    return out;
  }
  void zero_grad() { zero_grads(all_params()); }

 private:
  Spec spec_;
  std::vector<Lstm<Scalar>> lstm_;
  Mlp<Scalar> policy_;
  Mlp<Scalar> value_;
};

/// Fully observable actor-critic: disjoint dense policy and value networks
/// over the B-bit state. The policy head is mask-aware.
template <typename Scalar>
class BFNetworks {
 public:
  struct Spec {
    Eigen::Index length = 80;
    std::vector<Eigen::Index> hidden{256, 512, 256};
  };

  struct StepTape {
    typename Mlp<Scalar>::Tape policy;
    typename Mlp<Scalar>::Tape value;
    Matrix<Scalar> log_probs;
    Heads heads = Heads::both;
  };
  /// Steps are independent; their gradients are summed.
  struct Tape {
    std::vector<StepTape> steps;
  };

  BFNetworks() = default;
  explicit BFNetworks(Spec spec) : spec_(std::move(spec)) {
    if (spec_.length < 1) throw std::invalid_argument("BFNetworks: bad spec");
    std::vector<Eigen::Index> widths{spec_.length};
    widths.insert(widths.end(), spec_.hidden.begin(), spec_.hidden.end());
    auto policy_widths = widths;
    policy_widths.push_back(2 * spec_.length);
    widths.push_back(1);
    policy_ = Mlp<Scalar>(policy_widths, Activation::relu, Activation::identity);
    value_ = Mlp<Scalar>(widths, Activation::relu, Activation::identity);
  }

  void init(Rng& rng) {
    policy_.init(rng);
    value_.init(rng);
  }

  const Spec& spec() const { return spec_; }
  Eigen::Index observation_size() const { return spec_.length; }
  Eigen::Index action_count() const { return 2 * spec_.length; }
  Eigen::Index state_size() const { return 0; }
  Matrix<Scalar> initial_state(Eigen::Index batch) const { return Matrix<Scalar>::Zero(0, batch); }

  Mlp<Scalar>& policy_net() { return policy_; }
  Mlp<Scalar>& value_net() { return value_; }

  PolicyValue<Scalar> forward(const Matrix<Scalar>& obs, const Matrix<Scalar>& /*state*/, const MaskMatrix& mask = {},
                              Heads heads = Heads::both, Tape* tape = nullptr) const {
    require_shape(obs.rows() == observation_size(), "bf: observation size mismatch");
    StepTape* st = nullptr;
    if (tape) {
      tape->steps.emplace_back();
      st = &tape->steps.back();
      st->heads = heads;
    }
    PolicyValue<Scalar> out;
    out.state = initial_state(obs.cols());
    if (wants_policy(heads)) {
      out.log_probs = log_softmax<Scalar>(policy_.forward(obs, st ? &st->policy : nullptr), mask);
      if (st) st->log_probs = out.log_probs;
    }
    if (wants_value(heads)) out.values = value_.forward(obs, st ? &st->value : nullptr);
    return out;
  }

  Matrix<Scalar> backward(const Tape& tape, std::span<const Matrix<Scalar>> d_log_probs,
                          std::span<const RowVector<Scalar>> d_values) {
    if (tape.steps.empty()) throw std::logic_error("bf: no recorded computation");
    require_shape(d_log_probs.size() == tape.steps.size() && d_values.size() == tape.steps.size(),
                  "bf: one gradient per recorded step required");
    for (std::size_t k = 0; k < tape.steps.size(); ++k) {
      const auto& st = tape.steps[k];
      if (d_log_probs[k].size() != 0) {
        if (!wants_policy(st.heads)) throw std::logic_error("bf: policy head was not recorded");
        policy_.backward(st.policy, log_softmax_backward<Scalar>(st.log_probs, d_log_probs[k]));
      }
      if (d_values[k].size() != 0) {
        if (!wants_value(st.heads)) throw std::logic_error("bf: value head was not recorded");
        value_.backward(st.value, d_values[k]);
      }
    }
    return Matrix<Scalar>::Zero(0, 0);
  }

  std::vector<ParamRef<Scalar>> policy_params() {
    std::vector<ParamRef<Scalar>> out;
    policy_.append_params(out, "policy");
    return out;
  }
  std::vector<ParamRef<Scalar>> value_params() {
    std::vector<ParamRef<Scalar>> out;
    value_.append_params(out, "value");
    return out;
  }
  std::vector<ParamRef<Scalar>> all_params() {
    auto out = policy_params();
    value_.append_params(out, "value");
    return out;
  }
  void zero_grad() { zero_grads(all_params()); }

 private:
  Spec spec_;
  Mlp<Scalar> policy_;
  Mlp<Scalar> value_;
};

}  // namespace prngrl::nn
