#include "prngrl/harness.hpp"

#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>

namespace prngrl::harness {

namespace {

using Clock = std::chrono::steady_clock;

std::string full_precision(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string optional_fixed(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

ppo::EnvFactory make_factory(Formulation f, std::size_t size, std::size_t horizon, BFInitialState init) {
  if (f == Formulation::rf) {
    const RFConfig rc{size, horizon};
    rc.validate();
    return [rc] { return std::make_unique<RecurrentEnv>(rc); };
  }
  const BFConfig bc{size, horizon, f == Formulation::bf_wanderer, init};
  bc.validate();
  return [bc] { return std::make_unique<BinaryEnv>(bc); };
}

template <typename T>
std::vector<Eigen::Index> to_index(const std::vector<T>& xs) {
  return {xs.begin(), xs.end()};
}

nn::RFNetwork<double> make_rf(const Architecture& a) {
  return nn::RFNetwork<double>({static_cast<Eigen::Index>(a.size), to_index(a.lstm_hidden), to_index(a.dense_hidden)});
}

nn::BFNetworks<double> make_bf(const Architecture& a) {
  return nn::BFNetworks<double>({static_cast<Eigen::Index>(a.size), to_index(a.dense_hidden)});
}

template <typename Net>
Checkpoint snapshot(const Architecture& arch, ppo::Trainer<Net>& trainer) {
  return {arch, trainer.epochs_trained(), capture(trainer.net().all_params())};
}

BitSequence decode_observation(const nn::Vector<double>& x) {
  BitSequence bits;
  for (Eigen::Index i = 0; i < x.size(); ++i) bits.push_back(x(i) > 0.5 ? 1 : 0);
  return bits;
}

void trace_episode(std::ostream* os, std::size_t index, const ppo::Episode& ep) {
  if (!os) return;
  EpisodeTrace trace(*os);
  trace.begin_episode(index);
  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    const auto& s = ep.steps[t];
    trace.record(t, decode_observation(s.observation), s.action, s.reward);
  }
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

template <typename Net>
void training_loop(const ExperimentConfig& cfg, const RunOptions& opts, ppo::Trainer<Net>& trainer,
                   ExperimentResult& result) {
  const auto& out = result.output_dir;
  const auto factory = make_factory(cfg.formulation, cfg.size(), cfg.horizon, cfg.initial_state);
  const Architecture arch = cfg.architecture();
  Rng env_rng = make_stream(cfg.master_seed, "env-init");
  Rng action_rng = make_stream(cfg.master_seed, "action-sampling");
  Rng shuffle_rng = make_stream(cfg.master_seed, "minibatch-shuffle");

  auto metrics = open_output(out / "metrics.csv");
  auto episodes_log = open_output(out / "episodes.csv");
  metrics << kCsvHeader << '\n';
  episodes_log << "epoch,episode,total_reward\n";

  std::vector<double> volley_rewards;
  std::vector<const ppo::TrainStats*> volley_stats;
  std::size_t volley_start = 0;
  auto volley_clock = Clock::now();
  std::size_t episode_index = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ppo::RolloutBuffer buffer(cfg.buffer_episodes);
    for (auto& ep : trainer.collect(factory, cfg.buffer_episodes, env_rng, action_rng)) {
      const double r = ep.total_reward();
      episodes_log << epoch << ',' << episode_index << ',' << full_precision(r) << '\n';
      trace_episode(opts.trace, episode_index, ep);
      ++episode_index;
      volley_rewards.push_back(r);
      buffer.add(std::move(ep));
    }
    result.epochs.push_back(trainer.train_epoch(buffer, shuffle_rng));

    if (cfg.checkpoint_interval > 0 && (epoch + 1) % cfg.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%06zu.ckpt", epoch + 1);
      save_checkpoint(out / "checkpoints" / name, snapshot(arch, trainer));
    }

    if ((epoch + 1 - volley_start) == cfg.volley_epochs || epoch + 1 == cfg.epochs) {
      VolleyRecord rec;
      rec.volley = result.volleys.size();
      rec.epoch_start = volley_start;
      rec.episodes = volley_rewards.size();
      const auto ms = mean_std(volley_rewards);
      rec.mean_reward = ms.mean;
      rec.std_reward = ms.std;
      double pl = 0.0, vl = 0.0, kl = 0.0;
      const std::size_t k = epoch + 1 - volley_start;
      for (std::size_t i = result.epochs.size() - k; i < result.epochs.size(); ++i) {
        pl += result.epochs[i].policy_loss;
        vl += result.epochs[i].value_loss;
        kl += result.epochs[i].mean_kl;
      }
      rec.policy_loss = pl / static_cast<double>(k);
      rec.value_loss = vl / static_cast<double>(k);
      rec.mean_kl = kl / static_cast<double>(k);
      if (cfg.record_wall_time) rec.wall_s = std::chrono::duration<double>(Clock::now() - volley_clock).count();
      metrics << format_csv_row(rec) << '\n' << std::flush;
      if (opts.log) {
        *opts.log << "volley " << rec.volley << " epochs " << rec.epoch_start << "-" << epoch << " mean_reward "
                  << fixed6(rec.mean_reward) << " std " << fixed6(rec.std_reward) << " kl " << fixed6(*rec.mean_kl)
                  << '\n'
                  << std::flush;
      }
      result.volleys.push_back(rec);
      volley_rewards.clear();
      volley_start = epoch + 1;
      volley_clock = Clock::now();
    }
  }
  save_checkpoint(out / "checkpoints" / "final.ckpt", snapshot(arch, trainer));
  if (!metrics.flush() || !episodes_log.flush()) throw std::runtime_error("write failed in " + out.string());
}

template <typename Net>
std::vector<EvaluatedEpisode> play(Net net, const Checkpoint& ckpt, const EvaluateOptions& opts) {
  restore(net.all_params(), ckpt.tensors);
  const auto factory =
      make_factory(ckpt.arch.formulation, ckpt.arch.size, ckpt.arch.horizon, opts.initial_state);
  ppo::Trainer<Net> trainer(std::move(net), {});
  Rng env_rng = make_stream(opts.seed, "env-init");
  Rng action_rng = make_stream(opts.seed, "action-sampling");
  const auto episodes = trainer.collect(factory, opts.episodes, env_rng, action_rng, opts.greedy);
  if (opts.emit_dir) std::filesystem::create_directories(*opts.emit_dir);
  std::vector<EvaluatedEpisode> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    trace_episode(opts.trace, i, episodes[i]);
    EvaluatedEpisode e;
    e.total_reward = episodes[i].total_reward();
    e.sequence = episodes[i].final_sequence;
    e.report = nist::run_battery(e.sequence);
    if (opts.emit_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "sequence_%03zu.bits", i);
      e.bitfile = *opts.emit_dir / name;
      write_bitfile(e.sequence, *e.bitfile);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_csv_row(const VolleyRecord& r) {
  return std::to_string(r.volley) + ',' + std::to_string(r.epoch_start) + ',' + std::to_string(r.episodes) + ',' +
         fixed6(r.mean_reward) + ',' + fixed6(r.std_reward) + ',' + optional_fixed(r.policy_loss) + ',' +
         optional_fixed(r.value_loss) + ',' + optional_fixed(r.mean_kl) + ',' + fixed6(r.wall_s);
}

std::filesystem::path default_output_root() {
  if (const char* root = std::getenv("PRNGRL_OUTPUT_ROOT"); root && *root) return root;
  return ".";
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
  const std::filesystem::path dir(cfg.output_dir);
  return dir.is_absolute() ? dir : opts.output_root / dir;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  ExperimentResult result;
  result.output_dir = resolve_output_dir(cfg, opts);
  std::filesystem::create_directories(result.output_dir / "checkpoints");
  open_output(result.output_dir / "config.ini") << serialize_config(cfg);

  Rng init = make_stream(cfg.master_seed, "param-init");
  if (cfg.formulation == Formulation::rf) {
    auto net = make_rf(cfg.architecture());
    net.init(init);
    ppo::Trainer<nn::RFNetwork<double>> trainer(std::move(net), cfg.ppo);
    training_loop(cfg, opts, trainer, result);
  } else {
    auto net = make_bf(cfg.architecture());
    net.init(init);
    ppo::Trainer<nn::BFNetworks<double>> trainer(std::move(net), cfg.ppo);
    training_loop(cfg, opts, trainer, result);
  }
  return result;
}

std::vector<double> random_rewards(const ExperimentConfig& cfg, std::size_t episodes, std::ostream* trace) {
  cfg.validate();
  if (episodes < 1) throw std::invalid_argument("random baseline: episodes must be >= 1");
  const auto factory = make_factory(cfg.formulation, cfg.size(), cfg.horizon, cfg.initial_state);
  Rng rng = make_stream(cfg.master_seed, "random-agent");
  auto env = factory();
  std::optional<EpisodeTrace> tr;
  if (trace) tr.emplace(*trace);
  std::vector<double> rewards;
  rewards.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    if (tr) tr->begin_episode(i);
    rewards.push_back(random_agent_episode(*env, rng, tr ? &*tr : nullptr));
  }
  return rewards;
}

BaselineResult random_baseline(const ExperimentConfig& cfg, std::size_t episodes, const RunOptions& opts) {
  const auto start = Clock::now();
  BaselineResult result;
  result.rewards = random_rewards(cfg, episodes, opts.trace);
  const auto ms = mean_std(result.rewards);
  result.mean = ms.mean;
  result.std = ms.std;
  result.output_dir = resolve_output_dir(cfg, opts);
  std::filesystem::create_directories(result.output_dir);

  VolleyRecord rec;
  rec.episodes = episodes;
  rec.mean_reward = ms.mean;
  rec.std_reward = ms.std;
  if (cfg.record_wall_time) rec.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
  auto summary = open_output(result.output_dir / "baseline.csv");
  summary << kCsvHeader << '\n' << format_csv_row(rec) << '\n';
  auto per_episode = open_output(result.output_dir / "baseline_episodes.csv");
  per_episode << "episode,total_reward\n";
  for (std::size_t i = 0; i < result.rewards.size(); ++i) {
    per_episode << i << ',' << full_precision(result.rewards[i]) << '\n';
  }
  if (!summary.flush() || !per_episode.flush()) throw std::runtime_error("write failed in " + result.output_dir.string());
  return result;
}

std::vector<EvaluatedEpisode> evaluate(const Checkpoint& ckpt, const EvaluateOptions& opts) {
  if (opts.expected && *opts.expected != ckpt.arch.formulation) {
    throw CheckpointError("architecture mismatch: checkpoint holds a " + std::string(to_string(ckpt.arch.formulation)) +
                          " network, " + std::string(to_string(*opts.expected)) + " was requested");
  }
  if (opts.episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  if (ckpt.arch.formulation == Formulation::rf) return play(make_rf(ckpt.arch), ckpt, opts);
  return play(make_bf(ckpt.arch), ckpt, opts);
}

std::vector<EvaluatedEpisode> evaluate(const std::filesystem::path& checkpoint, const EvaluateOptions& opts) {
  return evaluate(load_checkpoint(checkpoint), opts);
}

std::string format_report(const nist::BatteryReport& report) {
  std::string out;
  for (const auto& o : report.outcomes) {
    out += nist::to_string(o.test_id);
    out += ' ';
    for (double p : o.p_values) out += ' ' + fixed6(p);
    out += o.passed ? "  pass  " : "  fail  ";
    out += fixed6(o.score) + '\n';
  }
  out += "avg_nist " + fixed6(report.avg_score) + '\n';
  return out;
}

GrayImage render_bits(const std::filesystem::path& bitfile, const std::filesystem::path& pgm,
                      std::optional<std::size_t> rows, std::optional<std::size_t> cols) {
  if (rows.has_value() != cols.has_value()) throw DimensionError("render: --rows and --cols must be given together");
  BitImageSpec spec;
  if (rows) {
    spec.rows = *rows;
    spec.cols = *cols;
  }
  const auto image = render_image(read_bitfile(bitfile), spec);
  write_pgm(image, pgm);
  return image;
}

}  // namespace prngrl::harness
