#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prngrl/envs.hpp"
#include "prngrl/networks.hpp"

namespace prngrl::ppo {

struct PPOConfig {
  double clip_ratio = 0.2;
  double kl_threshold = 1.5e-2;
  double gae_lambda = 0.95;
  double gamma = 1.0;
  std::size_t minibatch = 32;
  double lr_policy = 3e-4;
  double lr_value = 1e-3;
  std::size_t value_epochs_per_policy_epoch = 1;
  double max_grad_norm = 10.0;
  // Early stop compares the threshold with the mean KL over a probe set of
  // buffered transitions (the whole buffer when it holds at most `kl_probe`
  // transitions, or when kl_probe = 0; otherwise a uniform subset), checked
  // at `kl_checks` evenly spaced points of the epoch, the first one before
  // minibatch 0 (0: before every minibatch).
  std::size_t kl_probe = 4096;
  std::size_t kl_checks = 10;

  /// Names of out-of-range fields, in declaration order.
  std::vector<std::string> invalid_fields() const;
  /// Throws std::invalid_argument naming every offending field.
  void validate() const;
  bool operator==(const PPOConfig&) const = default;
};

/// One environment step as seen at collection time.
struct Transition {
  nn::Vector<double> observation;  // bits as 0/1
  std::size_t action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  nn::Vector<double> snapshot;        // recurrent state before this step (RF); empty otherwise
  std::vector<std::uint8_t> allowed;  // action mask at this step; empty when unmasked
};

struct Episode {
  std::vector<Transition> steps;
  BitSequence final_sequence;

  double total_reward() const;
  bool complete() const { return !steps.empty() && steps.back().done; }
};

class BufferError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Whole episodes only; training runs exactly when the buffer is full.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity_episodes);

  void add(Episode episode);
  bool full() const { return episodes_.size() == capacity_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return episodes_.size(); }
  std::size_t transition_count() const;
  const std::vector<Episode>& episodes() const { return episodes_; }
  void clear() { episodes_.clear(); }

 private:
  std::size_t capacity_;
  std::vector<Episode> episodes_;
};

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // rewards-to-go
};

/// GAE(gamma, lambda) with a zero bootstrap after the terminal step.
AdvantageResult compute_gae(std::span<const Transition> episode, double gamma, double lambda);

/// Standardizes to mean 0 and population standard deviation 1 (sigma
/// clamped below at 1e-8).
std::vector<double> normalize_advantages(std::span<const double> advantages);

/// min(r A, clip(r, 1 - eps, 1 + eps) A) for one sample.
double clip_objective(double ratio, double advantage, double clip_ratio);

struct ClipLoss {
  double loss = 0.0;                // -mean(objective)
  std::vector<double> d_log_prob;   // d loss / d log_prob_new per sample
  std::size_t clipped = 0;          // samples on the flat (clipped) branch
};
ClipLoss ppo_clip_loss(std::span<const double> log_prob_new, std::span<const double> log_prob_old,
                       std::span<const double> advantages, double clip_ratio);

double value_loss(std::span<const double> predicted, std::span<const double> returns);

/// Sampled forward-KL estimate mean(log_prob_old - log_prob_new).
double kl_estimate(std::span<const double> log_prob_old, std::span<const double> log_prob_new);

struct TrainStats {
  std::size_t epoch = 0;
  double policy_loss = 0.0;  // mean over applied policy steps
  double value_loss = 0.0;   // mean over value steps
  double mean_kl = 0.0;      // probe-set KL of the policy when policy training ended
  std::optional<std::size_t> early_stop_step;  // minibatch index at which policy updates stopped
  std::size_t minibatches = 0;
  std::size_t remainder = 0;  // size of the final short minibatch (0 if none)
  std::size_t policy_steps = 0;
  std::size_t value_steps = 0;
  std::size_t grad_clip_events = 0;
  std::size_t episodes = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
};

/// Reported after every minibatch of train_epoch (value step included);
/// `kl` is the probe-set estimate when a check preceded this minibatch.
struct MinibatchEvent {
  std::size_t pass = 0;
  std::size_t index = 0;
  std::size_t size = 0;
  bool kl_checked = false;
  double kl = 0.0;
  bool policy_updated = false;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// Samples an action index from one column of log-probabilities by inverse
/// CDF with a single uniform draw; masked actions have probability 0.
std::size_t sample_action(const nn::Matrix<double>& log_probs, Eigen::Index column, Rng& rng);
std::size_t greedy_action(const nn::Matrix<double>& log_probs, Eigen::Index column);

/// Owns the networks and both optimizers: the policy optimizer covers the
/// policy head (plus the shared trunk for RF), the value optimizer the value
/// head (plus the shared trunk for RF). Not movable: the optimizers hold views
/// into the network.
template <typename Net>
class Trainer {
 public:
  Trainer(Net net, PPOConfig cfg);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// Plays `count` episodes in lockstep batches of at most `batch` episodes.
  /// Environments are reset in order from `env_rng`; each episode draws its
  /// actions from its own stream seeded from `action_rng` in episode order,
  /// so the batch size does not change the outcome.
  std::vector<Episode> collect(const EnvFactory& make_env, std::size_t count, Rng& env_rng, Rng& action_rng,
                               bool greedy = false, std::size_t batch = 1000) const;

  /// One pass over the full buffer in shuffled minibatches; empties it.
  TrainStats train_epoch(RolloutBuffer& buffer, Rng& shuffle_rng);

  void set_minibatch_observer(std::function<void(const MinibatchEvent&)> fn) { observer_ = std::move(fn); }

  Net& net() { return net_; }
  const Net& net() const { return net_; }
  const PPOConfig& config() const { return cfg_; }
  std::size_t epochs_trained() const { return epochs_; }

 private:
  Net net_;
  PPOConfig cfg_;
  nn::Adam<double> policy_opt_;
  nn::Adam<double> value_opt_;
  std::size_t epochs_ = 0;
  std::function<void(const MinibatchEvent&)> observer_;
};

extern template class Trainer<nn::RFNetwork<double>>;
extern template class Trainer<nn::BFNetworks<double>>;

/// Column of 0/1 reals for a bit sequence.
nn::Vector<double> encode_bits(const BitSequence& bits);

}  // namespace prngrl::ppo
