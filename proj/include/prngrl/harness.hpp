#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prngrl/checkpoint.hpp"
#include "prngrl/envs.hpp"
#include "prngrl/nist.hpp"
#include "prngrl/ppo.hpp"

namespace prngrl::harness {

/// Malformed config text (carries the line) or an invalid configuration
/// (lists every offending field).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NetworkConfig {
  std::vector<std::size_t> lstm_hidden{128, 128};
  std::vector<std::size_t> head_widths{256, 128, 64};
  std::vector<std::size_t> bf_hidden{256, 512, 256};

  bool operator==(const NetworkConfig&) const = default;
};

struct ExperimentConfig {
  Formulation formulation = Formulation::rf;
  std::optional<std::size_t> length;        // B, bf and bf_wanderer only
  std::optional<std::size_t> pattern_bits;  // N, rf only
  std::size_t horizon = 100;                // T
  BFInitialState initial_state = BFInitialState::zeros;
  std::size_t buffer_episodes = 1000;
  std::size_t epochs = 10;
  std::size_t volley_epochs = 2;
  ppo::PPOConfig ppo;
  NetworkConfig network;
  std::uint64_t master_seed = 0;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::string output_dir = "run";
  bool record_wall_time = false;        // off keeps wall_s = 0 and the CSV reproducible

  /// Throws ConfigError naming every offending field.
  void validate() const;
  std::size_t size() const { return pattern_bits ? *pattern_bits : length.value_or(0); }
  Architecture architecture() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// `[section]` headers and `key = value` lines; '#' starts a comment.
/// Unknown sections or keys, duplicates and unparsable values are errors.
/// Parsing does not validate.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every field, reals in shortest round-trip form.
std::string serialize_config(const ExperimentConfig& cfg);

struct VolleyRecord {
  std::size_t volley = 0;
  std::size_t epoch_start = 0;
  std::size_t episodes = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;  // population
  std::optional<double> policy_loss;  // empty for the random baseline
  std::optional<double> value_loss;
  std::optional<double> mean_kl;
  double wall_s = 0.0;
};

inline constexpr std::string_view kCsvHeader =
    "volley,epoch_start,episodes,mean_reward,std_reward,policy_loss,value_loss,mean_kl,wall_s";
std::string format_csv_row(const VolleyRecord& r);

/// Relative output directories resolve against `output_root`.
struct RunOptions {
  std::filesystem::path output_root = ".";
  std::ostream* log = nullptr;    // one line per volley
  std::ostream* trace = nullptr;  // per-step episode dump
};

/// Output root from PRNGRL_OUTPUT_ROOT, else the working directory.
std::filesystem::path default_output_root();
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opts);

struct ExperimentResult {
  std::vector<VolleyRecord> volleys;
  std::vector<ppo::TrainStats> epochs;
  std::filesystem::path output_dir;
};

/// Alternates collection of `buffer_episodes` episodes and one training
/// epoch. Writes into the output directory:
///   config.ini      the effective configuration
///   metrics.csv     one row per volley (kCsvHeader schema)
///   episodes.csv    epoch,episode,total_reward for every episode
///   checkpoints/    epoch_NNNNNN.ckpt every checkpoint_interval epochs, final.ckpt
/// Randomness: make_stream(master_seed, ·) with "param-init", "env-init",
/// "action-sampling" and "minibatch-shuffle".
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct BaselineResult {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;
  std::filesystem::path output_dir;
};

/// Uniform-over-allowed-actions agent, no training. Env resets and actions
/// share the "random-agent" stream. Writes baseline.csv (one row, loss fields
/// empty) and baseline_episodes.csv into the output directory.
BaselineResult random_baseline(const ExperimentConfig& cfg, std::size_t episodes, const RunOptions& opts = {});

/// Same agent without touching the filesystem.
std::vector<double> random_rewards(const ExperimentConfig& cfg, std::size_t episodes, std::ostream* trace = nullptr);

struct EvaluateOptions {
  std::size_t episodes = 1;
  bool greedy = false;
  std::uint64_t seed = 0;
  std::optional<Formulation> expected;  // architecture mismatch check
  BFInitialState initial_state = BFInitialState::zeros;
  std::optional<std::filesystem::path> emit_dir;  // sequence_NNN.bits per episode
  std::ostream* trace = nullptr;
};

struct EvaluatedEpisode {
  double total_reward = 0.0;
  nist::BatteryReport report;  // battery run on the final sequence
  BitSequence sequence;
  std::optional<std::filesystem::path> bitfile;
};

/// Plays episodes with the checkpointed policy (sampled unless greedy).
std::vector<EvaluatedEpisode> evaluate(const Checkpoint& ckpt, const EvaluateOptions& opts);
std::vector<EvaluatedEpisode> evaluate(const std::filesystem::path& checkpoint, const EvaluateOptions& opts);

/// `test_id  p_values...  pass|fail  score` per eligible test, then
/// `avg_nist <value>`; all reals with 6 decimals.
std::string format_report(const nist::BatteryReport& report);

/// Renders a bitfile with the default image spec, or an explicit grid.
GrayImage render_bits(const std::filesystem::path& bitfile, const std::filesystem::path& pgm,
                      std::optional<std::size_t> rows = std::nullopt, std::optional<std::size_t> cols = std::nullopt);

/// Fixed-point with 6 decimals.
std::string fixed6(double v);

}  // namespace prngrl::harness
