#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "prngrl/bitseq.hpp"
#include "prngrl/rng.hpp"

namespace prngrl {

class InvalidActionError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class EpisodeFinishedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Hidden (full) state and step counter.
struct EnvState {
  BitSequence full;
  std::size_t t = 0;
};

struct StepResult {
  BitSequence observation;
  double reward = 0.0;
  bool done = false;
};

struct ActionMask {
  std::vector<std::uint8_t> allowed;

  std::size_t size() const { return allowed.size(); }
  std::size_t count_allowed() const;
  bool operator[](std::size_t a) const { return allowed[a] != 0; }
};

/// Episodic environment with a fixed horizon and a terminal-only reward.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual BitSequence reset(Rng& rng) = 0;
  virtual StepResult step(std::size_t action) = 0;

  virtual std::size_t action_count() const = 0;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t horizon() const = 0;
  /// Allowed actions in the current state; nullopt when every action is allowed.
  virtual std::optional<ActionMask> action_mask() const { return std::nullopt; }

  const EnvState& state() const { return state_; }
  bool done() const { return state_.t >= horizon(); }

 protected:
  EnvState state_;
};

enum class BFInitialState { zeros, uniform };

struct BFConfig {
  std::size_t length = 80;   // B
  std::size_t horizon = 40;  // T
  bool wanderer = false;
  BFInitialState initial_state = BFInitialState::zeros;

  void validate() const;
};

/// Fully observable formulation: the state is a B-bit sequence and action a
/// sets bit a/2 + 1 (1-based) to a mod 2.
class BinaryEnv final : public Environment {
 public:
  explicit BinaryEnv(BFConfig cfg);

  BitSequence reset(Rng& rng) override;
  /// Starts an episode from a given B-bit state.
  BitSequence reset_to(BitSequence initial);
  StepResult step(std::size_t action) override;

  std::size_t action_count() const override { return 2 * cfg_.length; }
  std::size_t observation_size() const override { return cfg_.length; }
  std::size_t horizon() const override { return cfg_.horizon; }
  std::optional<ActionMask> action_mask() const override;

  /// The wanderer mask for an arbitrary state: (n, v) allowed iff bit n != v.
  static ActionMask wanderer_mask(const BitSequence& state);
  static std::pair<std::size_t, std::uint8_t> decode(std::size_t action) { return {action / 2 + 1, action % 2}; }

  const BFConfig& config() const { return cfg_; }

 private:
  BFConfig cfg_;
};

/// Pattern width is capped at 10 bits.
inline constexpr std::size_t kMaxPatternBits = 10;

struct RFConfig {
  std::size_t pattern_bits = 5;  // N
  std::size_t horizon = 100;     // T

  void validate() const;
};

/// Partially observable formulation: each action appends an N-bit pattern
/// (big-endian expansion of the action index); only the last N bits are seen.
class RecurrentEnv final : public Environment {
 public:
  explicit RecurrentEnv(RFConfig cfg);

  BitSequence reset(Rng& rng) override;
  /// Starts an episode from a given N-bit seed.
  BitSequence reset_to(BitSequence seed);
  StepResult step(std::size_t action) override;

  std::size_t action_count() const override { return std::size_t{1} << cfg_.pattern_bits; }
  std::size_t observation_size() const override { return cfg_.pattern_bits; }
  std::size_t horizon() const override { return cfg_.horizon; }

  const RFConfig& config() const { return cfg_; }

 private:
  RFConfig cfg_;
};

/// Seed bits from standard normal draws: 1 iff the draw is >= 0.
BitSequence seed_from_normals(std::span<const double> draws);

/// Writes one "t observation action reward" line per step.
class EpisodeTrace {
 public:
  explicit EpisodeTrace(std::ostream& os) : os_(&os) {}
  void begin_episode(std::size_t episode);
  void record(std::size_t t, const BitSequence& observation, std::size_t action, double reward);

 private:
  std::ostream* os_;
};

/// Plays one episode choosing uniformly among allowed actions; returns the
/// total reward (the terminal avg_nist score).
double random_agent_episode(Environment& env, Rng& rng, EpisodeTrace* trace = nullptr);

}  // namespace prngrl
