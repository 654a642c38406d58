#pragma once

// One randomized finite-difference check per layer type and architecture.
// Each call draws fresh parameters, inputs and loss weights from `rng`; the
// loss is a random linear functional of every output, so every parameter
// receives gradient.

#include "prngrl/envs.hpp"
#include "prngrl/networks.hpp"
#include "oracles.hpp"

namespace prngrl::testing {

using Probe = long double;

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * (2.0 * uniform01(rng) - 1.0);
  }
  return m;
}

inline Mat random_bits(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<double>(rng() >> 63);
  }
  return m;
}

/// sum(w .* x) over finite entries of x; masked (-inf) log-probabilities
/// carry no loss.
template <typename Scalar>
Scalar weighted(const Mat& w, const nn::Matrix<Scalar>& x) {
  Scalar s = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (std::isfinite(x(k))) s += static_cast<Scalar>(w(k)) * x(k);
  }
  return s;
}

inline void perturb(const std::vector<nn::ParamRef<double>>& params, Rng& rng, double scale) {
  for (const auto& p : params) p.values() += scale * random_matrix(p.size(), 1, rng);
}

/// Instances with a ReLU pre-activation closer to zero than this are redrawn:
/// a central difference straddling the kink does not estimate the derivative.
inline constexpr double kKinkMargin = 1e-3;

inline double relu_margin(const nn::Dense<double>& layer, const nn::Dense<double>::Tape& tape) {
  if (layer.activation != nn::Activation::relu) return std::numeric_limits<double>::infinity();
  Mat z = layer.weight * tape.input;
  z.colwise() += layer.bias;
  return z.cwiseAbs().minCoeff();
}

inline double relu_margin(const nn::Mlp<double>& mlp, const nn::Mlp<double>::Tape& tape) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) margin = std::min(margin, relu_margin(mlp.layers[k], tape.layers[k]));
  return margin;
}

inline GradCheckResult check_dense(nn::Activation act, Rng& rng) {
  nn::Dense<double> layer(5, 4, act);
  Mat x;
  Mat w;
  nn::Dense<double>::Tape tape;
  do {
    layer.init(rng);
    layer.bias = random_matrix(4, 1, rng, 0.3);
    x = random_matrix(5, 3, rng);
    w = random_matrix(4, 3, rng);
    layer.forward(x, &tape);
  } while (relu_margin(layer, tape) < kKinkMargin);
  layer.weight_grad.setZero();
  layer.bias_grad.setZero();
  layer.backward(tape, w);

  nn::Dense<Probe> probe(5, 4, act);
  std::vector<nn::ParamRef<double>> params;
  std::vector<nn::ParamRef<Probe>> probe_params;
  layer.append_params(params, "dense");
  probe.append_params(probe_params, "dense");
  copy_params(params, probe_params);
  const nn::Matrix<Probe> xp = x.cast<Probe>();
  return finite_difference_check(params, probe_params, [&] { return weighted(w, probe.forward(xp)); }, rng);
}

/// Hidden size 4, three chained steps from a random initial state; the loss
/// touches every step's h and the final c.
inline GradCheckResult check_lstm(Rng& rng) {
  constexpr int kSteps = 3;
  nn::Lstm<double> cell(3, 4);
  cell.init(rng);
  cell.bias += random_matrix(16, 1, rng, 0.5);
  std::vector<Mat> xs;
  std::vector<Mat> wh;
  for (int t = 0; t < kSteps; ++t) {
    xs.push_back(random_matrix(3, 2, rng));
    wh.push_back(random_matrix(4, 2, rng));
  }
  const Mat wc = random_matrix(4, 2, rng);
  const nn::LstmState<double> start{random_matrix(4, 2, rng, 0.5), random_matrix(4, 2, rng, 0.5)};

  std::vector<nn::Lstm<double>::Tape> tapes(kSteps);
  nn::LstmState<double> s = start;
  for (int t = 0; t < kSteps; ++t) s = cell.step(xs[t], s, &tapes[t]);
  std::vector<nn::ParamRef<double>> params;
  cell.append_params(params, "lstm");
  nn::zero_grads(params);
  Mat d_h = Mat::Zero(4, 2);
  Mat d_c = wc;
  for (int t = kSteps - 1; t >= 0; --t) {
    auto g = cell.backward(tapes[t], d_h + wh[t], d_c);
    d_h = g.h_prev;
    d_c = g.c_prev;
  }

  nn::Lstm<Probe> probe(3, 4);
  std::vector<nn::ParamRef<Probe>> probe_params;
  probe.append_params(probe_params, "lstm");
  copy_params(params, probe_params);
  auto loss = [&] {
    nn::LstmState<Probe> ps{start.h.cast<Probe>(), start.c.cast<Probe>()};
    Probe total = 0;
    for (int t = 0; t < kSteps; ++t) {
      ps = probe.step(xs[t].cast<Probe>(), ps);
      total += weighted(wh[t], ps.h);
    }
    return total + weighted(wc, ps.c);
  };
  return finite_difference_check(params, probe_params, loss, rng);
}

/// N = 2, two LSTM layers of hidden size 8, three steps from the zero state
/// (full backpropagation through time), both heads in the loss.
inline GradCheckResult check_rf(Rng& rng) {
  constexpr int kSteps = 3;
  constexpr Eigen::Index kBatch = 2;
  const nn::RFNetwork<double>::Spec spec{2, {8, 8}, {16, 8}};
  nn::RFNetwork<double> net(spec);
  std::vector<Mat> obs;
  std::vector<Mat> dl;
  std::vector<nn::RowVector<double>> dv;
  nn::RFNetwork<double>::Tape tape;
  double margin = 0.0;
  while (margin < kKinkMargin) {
    net.init(rng);
    perturb(net.all_params(), rng, 0.1);
    obs.clear();
    dl.clear();
    dv.clear();
    for (int t = 0; t < kSteps; ++t) {
      obs.push_back(random_bits(2, kBatch, rng));
      dl.push_back(random_matrix(4, kBatch, rng));
      dv.push_back(random_matrix(1, kBatch, rng));
    }
    tape.steps.clear();
    Mat state = net.initial_state(kBatch);
    for (int t = 0; t < kSteps; ++t) state = net.forward(obs[t], state, {}, nn::Heads::both, &tape).state;
    margin = std::numeric_limits<double>::infinity();
    for (const auto& st : tape.steps) {
      margin = std::min({margin, relu_margin(net.policy_head(), st.policy), relu_margin(net.value_head(), st.value)});
    }
  }
  net.zero_grad();
  net.backward(tape, dl, dv);

  nn::RFNetwork<Probe> probe({spec.pattern_bits, spec.lstm_hidden, spec.head_widths});
  copy_params(net.all_params(), probe.all_params());
  auto loss = [&] {
    nn::Matrix<Probe> s = probe.initial_state(kBatch);
    Probe total = 0;
    for (int t = 0; t < kSteps; ++t) {
      auto out = probe.forward(obs[t].cast<Probe>(), s);
      total += weighted(dl[t], out.log_probs) + weighted(Mat(dv[t]), nn::Matrix<Probe>(out.values));
      s = std::move(out.state);
    }
    return total;
  };
  return finite_difference_check(net.all_params(), probe.all_params(), loss, rng);
}

/// B = 4 with the wanderer mask applied to the policy.
inline GradCheckResult check_bf(Rng& rng) {
  constexpr Eigen::Index kBatch = 3;
  const nn::BFNetworks<double>::Spec spec{4, {16, 32, 16}};
  nn::BFNetworks<double> net(spec);
  Mat obs;
  nn::MaskMatrix mask(8, kBatch);
  Mat dl;
  nn::RowVector<double> dv;
  nn::BFNetworks<double>::Tape tape;
  do {
    net.init(rng);
    perturb(net.all_params(), rng, 0.05);
    obs = random_bits(4, kBatch, rng);
    for (Eigen::Index j = 0; j < kBatch; ++j) {
      BitSequence bits;
      for (Eigen::Index i = 0; i < 4; ++i) bits.push_back(static_cast<std::uint8_t>(obs(i, j)));
      const auto m = BinaryEnv::wanderer_mask(bits);
      for (Eigen::Index a = 0; a < 8; ++a) mask(a, j) = m[static_cast<std::size_t>(a)];
    }
    dl = random_matrix(8, kBatch, rng);
    dv = random_matrix(1, kBatch, rng);
    tape.steps.clear();
    net.forward(obs, {}, mask, nn::Heads::both, &tape);
  } while (std::min(relu_margin(net.policy_net(), tape.steps[0].policy), relu_margin(net.value_net(), tape.steps[0].value)) <
           kKinkMargin);
  net.zero_grad();
  net.backward(tape, std::span(&dl, 1), std::span(&dv, 1));

  nn::BFNetworks<Probe> probe({spec.length, spec.hidden});
  copy_params(net.all_params(), probe.all_params());
  const nn::Matrix<Probe> obs_p = obs.cast<Probe>();
  auto loss = [&] {
    auto out = probe.forward(obs_p, {}, mask);
    return weighted(dl, out.log_probs) + weighted(Mat(dv), nn::Matrix<Probe>(out.values));
  };
  return finite_difference_check(net.all_params(), probe.all_params(), loss, rng);
}

}  // namespace prngrl::testing
