#include "prngrl/envs.hpp"

#include <algorithm>
#include <ostream>
#include <random>
#include <string>

#include "prngrl/nist.hpp"

namespace prngrl {

std::size_t ActionMask::count_allowed() const {
  return static_cast<std::size_t>(std::count_if(allowed.begin(), allowed.end(), [](std::uint8_t a) { return a != 0; }));
}

void BFConfig::validate() const {
  if (length < 1) throw std::invalid_argument("BF sequence length must be >= 1");
  if (horizon < 1) throw std::invalid_argument("BF horizon must be >= 1");
}

BinaryEnv::BinaryEnv(BFConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  state_.full = BitSequence(cfg_.length, 0);
  state_.t = cfg_.horizon;  // must reset before stepping
}

BitSequence BinaryEnv::reset(Rng& rng) {
  BitSequence full(cfg_.length, 0);
  if (cfg_.initial_state == BFInitialState::uniform) {
    for (std::size_t i = 0; i < cfg_.length; ++i) full.assign(i, static_cast<std::uint8_t>(rng() >> 63));
  }
  return reset_to(std::move(full));
}

BitSequence BinaryEnv::reset_to(BitSequence initial) {
  if (initial.size() != cfg_.length) throw std::invalid_argument("initial state must have B bits");
  state_ = {std::move(initial), 0};
  return state_.full;
}

StepResult BinaryEnv::step(std::size_t action) {
  if (done()) throw EpisodeFinishedError("episode already finished");
  if (action >= action_count()) {
    throw InvalidActionError("action " + std::to_string(action) + " outside [0, " + std::to_string(action_count()) + ")");
  }
  const auto [n, v] = decode(action);
  state_.full = set_bit(state_.full, n, v);
  ++state_.t;
  StepResult out{state_.full, 0.0, done()};
  if (out.done) out.reward = nist::avg_nist(state_.full);
  return out;
}

std::optional<ActionMask> BinaryEnv::action_mask() const {
  if (!cfg_.wanderer) return std::nullopt;
  return wanderer_mask(state_.full);
}

ActionMask BinaryEnv::wanderer_mask(const BitSequence& state) {
  ActionMask mask;
  mask.allowed.resize(2 * state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    mask.allowed[2 * i] = state[i] != 0;      // set to 0
    mask.allowed[2 * i + 1] = state[i] == 0;  // set to 1
  }
  return mask;
}

void RFConfig::validate() const {
  if (pattern_bits < 1 || pattern_bits > kMaxPatternBits) {
    throw std::invalid_argument("RF pattern width must be in [1, " + std::to_string(kMaxPatternBits) + "]");
  }
  if (horizon < 1) throw std::invalid_argument("RF horizon must be >= 1");
}

RecurrentEnv::RecurrentEnv(RFConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  state_.t = cfg_.horizon;
}

BitSequence seed_from_normals(std::span<const double> draws) {
  BitSequence out;
  for (double d : draws) out.push_back(d >= 0.0 ? 1 : 0);
  return out;
}

BitSequence RecurrentEnv::reset(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> draws(cfg_.pattern_bits);
  for (auto& d : draws) d = normal(rng);
  return reset_to(seed_from_normals(draws));
}

BitSequence RecurrentEnv::reset_to(BitSequence seed) {
  if (seed.size() != cfg_.pattern_bits) throw std::invalid_argument("seed must have N bits");
  state_ = {std::move(seed), 0};
  return state_.full;
}

StepResult RecurrentEnv::step(std::size_t action) {
  if (done()) throw EpisodeFinishedError("episode already finished");
  if (action >= action_count()) {
    throw InvalidActionError("action " + std::to_string(action) + " outside [0, " + std::to_string(action_count()) + ")");
  }
  const auto pattern = bits_from_index(action, cfg_.pattern_bits);
  state_.full = append_pattern(state_.full, pattern);
  ++state_.t;
  StepResult out{pattern, 0.0, done()};
  if (out.done) out.reward = nist::avg_nist(state_.full);
  return out;
}

void EpisodeTrace::begin_episode(std::size_t episode) { *os_ << "# episode " << episode << '\n'; }

void EpisodeTrace::record(std::size_t t, const BitSequence& observation, std::size_t action, double reward) {
  *os_ << t << ' ' << observation.to_string() << ' ' << action << ' ' << std::to_string(reward) << '\n';
}

double random_agent_episode(Environment& env, Rng& rng, EpisodeTrace* trace) {
  auto observation = env.reset(rng);
  double total = 0.0;
  while (!env.done()) {
    std::size_t action = 0;
    if (auto mask = env.action_mask()) {
      auto pick = uniform_index(rng, mask->count_allowed());
      for (action = 0; action < mask->size(); ++action) {
        if ((*mask)[action] && pick-- == 0) break;
      }
    } else {
      action = uniform_index(rng, env.action_count());
    }
    const std::size_t t = env.state().t;
    auto result = env.step(action);
    if (trace) trace->record(t, observation, action, result.reward);
    total += result.reward;
    observation = std::move(result.observation);
  }
  return total;
}

}  // namespace prngrl
