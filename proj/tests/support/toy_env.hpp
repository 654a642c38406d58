#pragma once

#include <memory>

#include "prngrl/envs.hpp"
#include "prngrl/ppo.hpp"

namespace prngrl::testing {

/// One-step, two-action MDP: a constant one-bit observation; action 0 pays 1,
/// action 1 pays 0.
class ToyBandit final : public Environment {
 public:
  BitSequence reset(Rng&) override {
    state_ = {BitSequence{1}, 0};
    return state_.full;
  }
  StepResult step(std::size_t action) override {
    if (action >= 2) throw InvalidActionError("toy bandit: action out of range");
    if (done()) throw EpisodeFinishedError("toy bandit: episode finished");
    ++state_.t;
    return {state_.full, action == 0 ? 1.0 : 0.0, true};
  }
  std::size_t action_count() const override { return 2; }
  std::size_t observation_size() const override { return 1; }
  std::size_t horizon() const override { return 1; }
};

inline ppo::EnvFactory toy_factory() {
  return [] { return std::make_unique<ToyBandit>(); };
}

/// Probability of the better action under the current policy.
inline double toy_optimal_probability(const nn::BFNetworks<double>& net) {
  const auto out = net.forward(nn::Matrix<double>::Ones(1, 1), {});
  return std::exp(out.log_probs(0, 0));
}

struct ToyRun {
  double final_probability = 0.0;
  std::size_t epochs = 0;
};

/// PPO on the toy bandit with the default configuration: `buffer` episodes
/// per epoch, stopping as soon as the better action exceeds `target`.
inline ToyRun run_toy_ppo(std::uint64_t seed, std::size_t max_epochs, std::size_t buffer, double target) {
  Rng init = make_stream(seed, "param-init");
  Rng env_rng = make_stream(seed, "env-init");
  Rng action_rng = make_stream(seed, "action-sampling");
  Rng shuffle_rng = make_stream(seed, "minibatch-shuffle");
  nn::BFNetworks<double> net({1, {256, 512, 256}});
  net.init(init);
  ppo::Trainer<nn::BFNetworks<double>> trainer(std::move(net), {});
  ToyRun run;
  for (run.epochs = 0; run.epochs < max_epochs; ++run.epochs) {
    run.final_probability = toy_optimal_probability(trainer.net());
    if (run.final_probability > target) return run;
    ppo::RolloutBuffer buf(buffer);
    for (auto& ep : trainer.collect(toy_factory(), buffer, env_rng, action_rng)) buf.add(std::move(ep));
    trainer.train_epoch(buf, shuffle_rng);
  }
  run.final_probability = toy_optimal_probability(trainer.net());
  return run;
}

}  // namespace prngrl::testing
