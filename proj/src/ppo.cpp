#include "prngrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace prngrl::ppo {

std::vector<std::string> PPOConfig::invalid_fields() const {
  std::vector<std::string> bad;
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) bad.emplace_back("clip_ratio");
  if (!(kl_threshold >= 0.0)) bad.emplace_back("kl_threshold");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) bad.emplace_back("gae_lambda");
  if (!(gamma >= 0.0 && gamma <= 1.0)) bad.emplace_back("gamma");
  if (minibatch < 1) bad.emplace_back("minibatch");
  if (!(lr_policy > 0.0)) bad.emplace_back("lr_policy");
  if (!(lr_value > 0.0)) bad.emplace_back("lr_value");
  if (value_epochs_per_policy_epoch < 1) bad.emplace_back("value_epochs_per_policy_epoch");
  if (!(max_grad_norm > 0.0)) bad.emplace_back("max_grad_norm");
  return bad;
}

void PPOConfig::validate() const {
  const auto bad = invalid_fields();
  if (bad.empty()) return;
  std::string msg = "invalid ppo config:";
  for (const auto& f : bad) msg += " " + f;
  throw std::invalid_argument(msg);
}

double Episode::total_reward() const {
  double s = 0.0;
  for (const auto& t : steps) s += t.reward;
  return s;
}

RolloutBuffer::RolloutBuffer(std::size_t capacity_episodes) : capacity_(capacity_episodes) {
  if (capacity_ < 1) throw std::invalid_argument("rollout buffer: capacity must be >= 1");
}

void RolloutBuffer::add(Episode episode) {
  if (!episode.complete()) throw BufferError("rollout buffer: only complete episodes may be stored");
  if (full()) throw BufferError("rollout buffer: already at capacity");
  episodes_.push_back(std::move(episode));
}

std::size_t RolloutBuffer::transition_count() const {
  std::size_t n = 0;
  for (const auto& e : episodes_) n += e.steps.size();
  return n;
}

AdvantageResult compute_gae(std::span<const Transition> episode, double gamma, double lambda) {
  if (episode.empty() || !episode.back().done) throw std::invalid_argument("compute_gae: episode is incomplete");
  const std::size_t n = episode.size();
  AdvantageResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_value = 0.0;
  double gae = 0.0;
  double ret = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const auto& t = episode[k];
    const double delta = t.reward + gamma * next_value - t.value;
    gae = delta + gamma * lambda * gae;
    ret = t.reward + gamma * ret;
    out.advantages[k] = gae;
    out.returns[k] = ret;
    next_value = t.value;
  }
  return out;
}

std::vector<double> normalize_advantages(std::span<const double> advantages) {
  const auto n = static_cast<double>(advantages.size());
  std::vector<double> out(advantages.begin(), advantages.end());
  if (out.empty()) return out;
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / n;
  double var = 0.0;
  for (double a : out) var += (a - mean) * (a - mean);
  const double sigma = std::max(std::sqrt(var / n), 1e-8);
  for (double& a : out) a = (a - mean) / sigma;
  return out;
}

double clip_objective(double ratio, double advantage, double clip_ratio) {
  const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
  return std::min(ratio * advantage, clipped * advantage);
}

ClipLoss ppo_clip_loss(std::span<const double> log_prob_new, std::span<const double> log_prob_old,
                       std::span<const double> advantages, double clip_ratio) {
  const std::size_t m = log_prob_new.size();
  if (log_prob_old.size() != m || advantages.size() != m || m == 0) {
    throw std::invalid_argument("ppo_clip_loss: inputs must be non-empty and of equal length");
  }
  ClipLoss out;
  out.d_log_prob.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double ratio = std::exp(log_prob_new[j] - log_prob_old[j]);
    const double a = advantages[j];
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * a;
    out.loss -= std::min(unclipped, clipped);
    // The gradient flows only when the unclipped term is the active minimum.
    if (unclipped <= clipped) {
      out.d_log_prob[j] = -unclipped / static_cast<double>(m);
    } else {
      ++out.clipped;
    }
  }
  out.loss /= static_cast<double>(m);
  return out;
}

double value_loss(std::span<const double> predicted, std::span<const double> returns) {
  if (predicted.size() != returns.size() || predicted.empty()) {
    throw std::invalid_argument("value_loss: inputs must be non-empty and of equal length");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < predicted.size(); ++j) s += (predicted[j] - returns[j]) * (predicted[j] - returns[j]);
  return s / static_cast<double>(predicted.size());
}

double kl_estimate(std::span<const double> log_prob_old, std::span<const double> log_prob_new) {
  if (log_prob_old.size() != log_prob_new.size() || log_prob_old.empty()) {
    throw std::invalid_argument("kl_estimate: inputs must be non-empty and of equal length");
  }
  double s = 0.0;
  for (std::size_t j = 0; j < log_prob_old.size(); ++j) s += log_prob_old[j] - log_prob_new[j];
  return s / static_cast<double>(log_prob_old.size());
}

std::size_t sample_action(const nn::Matrix<double>& log_probs, Eigen::Index column, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last = 0;
  bool any = false;
  for (Eigen::Index i = 0; i < log_probs.rows(); ++i) {
    const double p = std::exp(log_probs(i, column));
    if (p == 0.0) continue;
    any = true;
    last = static_cast<std::size_t>(i);
    cumulative += p;
    if (u < cumulative) return last;
  }
  if (!any) throw std::invalid_argument("sample_action: no action has positive probability");
  return last;  // rounding left the total a hair below u
}

std::size_t greedy_action(const nn::Matrix<double>& log_probs, Eigen::Index column) {
  Eigen::Index best = 0;
  log_probs.col(column).maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

nn::Vector<double> encode_bits(const BitSequence& bits) {
  nn::Vector<double> v(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) v(static_cast<Eigen::Index>(i)) = bits.at(i);
  return v;
}

// --- Trainer ----------------------------------------------------------------

template <typename Net>
Trainer<Net>::Trainer(Net net, PPOConfig cfg)
    : net_(std::move(net)),
      cfg_(cfg),
      policy_opt_(net_.policy_params(), cfg.lr_policy),
      value_opt_(net_.value_params(), cfg.lr_value) {
  cfg_.validate();
}

template <typename Net>
std::vector<Episode> Trainer<Net>::collect(const EnvFactory& make_env, std::size_t count, Rng& env_rng,
                                           Rng& action_rng, bool greedy, std::size_t batch) const {
  if (count < 1) throw std::invalid_argument("collect: count must be >= 1");
  batch = std::max<std::size_t>(batch, 1);
  std::vector<Episode> out;
  out.reserve(count);
  const Eigen::Index obs_size = net_.observation_size();
  const Eigen::Index n_actions = net_.action_count();
  for (std::size_t start = 0; start < count; start += batch) {
    const std::size_t b = std::min(batch, count - start);
    const auto cols = static_cast<Eigen::Index>(b);
    std::vector<std::unique_ptr<Environment>> envs;
    std::vector<BitSequence> obs(b);
    std::vector<Episode> episodes(b);
    std::vector<Rng> episode_rng;
    for (std::size_t j = 0; j < b; ++j) {
      envs.push_back(make_env());
      if (static_cast<Eigen::Index>(envs[j]->observation_size()) != obs_size ||
          static_cast<Eigen::Index>(envs[j]->action_count()) != n_actions) {
        throw std::invalid_argument("collect: environment does not match the network architecture");
      }
      obs[j] = envs[j]->reset(env_rng);
      // One action stream per episode keeps results independent of batching.
      episode_rng.emplace_back(action_rng());
      episodes[j].steps.reserve(envs[j]->horizon());
    }
    nn::Matrix<double> state = net_.initial_state(cols);
    nn::Matrix<double> x(obs_size, cols);
    while (!envs.front()->done()) {
      for (std::size_t j = 0; j < b; ++j) x.col(static_cast<Eigen::Index>(j)) = encode_bits(obs[j]);
      nn::MaskMatrix mask;
      std::vector<std::vector<std::uint8_t>> allowed(b);
      if (envs.front()->action_mask()) {
        mask.resize(n_actions, cols);
        for (std::size_t j = 0; j < b; ++j) {
          allowed[j] = envs[j]->action_mask()->allowed;
          for (Eigen::Index a = 0; a < n_actions; ++a) mask(a, static_cast<Eigen::Index>(j)) = allowed[j][static_cast<std::size_t>(a)] != 0;
        }
      }
      auto result = net_.forward(x, state, mask, nn::Heads::both);
      for (std::size_t j = 0; j < b; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        const std::size_t a = greedy ? greedy_action(result.log_probs, c) : sample_action(result.log_probs, c, episode_rng[j]);
        Transition tr;
        tr.observation = x.col(c);
        tr.action = a;
        tr.log_prob = result.log_probs(static_cast<Eigen::Index>(a), c);
        tr.value = result.values(c);
        if (state.rows() > 0) tr.snapshot = state.col(c);
        tr.allowed = std::move(allowed[j]);
        auto step = envs[j]->step(a);
        tr.reward = step.reward;
        tr.done = step.done;
        obs[j] = std::move(step.observation);
        episodes[j].steps.push_back(std::move(tr));
      }
      state = std::move(result.state);
    }
    for (std::size_t j = 0; j < b; ++j) {
      episodes[j].final_sequence = envs[j]->state().full;
      out.push_back(std::move(episodes[j]));
    }
  }
  return out;
}

template <typename Net>
TrainStats Trainer<Net>::train_epoch(RolloutBuffer& buffer, Rng& shuffle_rng) {
  if (!buffer.full()) {
    throw BufferError("train_epoch: buffer holds " + std::to_string(buffer.size()) + " of " +
                      std::to_string(buffer.capacity()) + " episodes");
  }
  TrainStats stats;
  stats.epoch = epochs_;
  stats.episodes = buffer.size();

  std::vector<const Transition*> items;
  std::vector<double> raw_adv;
  std::vector<double> returns;
  std::vector<double> rewards;
  items.reserve(buffer.transition_count());
  for (const auto& ep : buffer.episodes()) {
    auto gae = compute_gae(ep.steps, cfg_.gamma, cfg_.gae_lambda);
    for (std::size_t k = 0; k < ep.steps.size(); ++k) {
      items.push_back(&ep.steps[k]);
      raw_adv.push_back(gae.advantages[k]);
      returns.push_back(gae.returns[k]);
    }
    rewards.push_back(ep.total_reward());
  }
  const auto advantages = normalize_advantages(raw_adv);
  {
    const auto n = static_cast<double>(rewards.size());
    stats.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - stats.mean_reward) * (r - stats.mean_reward);
    stats.std_reward = std::sqrt(var / n);
  }

  const std::size_t total = items.size();
  const std::size_t mb = cfg_.minibatch;
  const std::size_t batches = (total + mb - 1) / mb;
  stats.remainder = total % mb;
  const Eigen::Index obs_size = net_.observation_size();
  const Eigen::Index state_size = net_.state_size();
  const Eigen::Index n_actions = net_.action_count();
  const bool masked = !items.front()->allowed.empty();

  // Inputs for a list of buffer indices, column by column.
  struct Batch {
    nn::Matrix<double> x, s;
    nn::MaskMatrix mask;
    std::vector<double> old_lp;
  };
  const auto gather = [&](std::span<const std::size_t> idx) {
    const auto cols = static_cast<Eigen::Index>(idx.size());
    Batch b{nn::Matrix<double>(obs_size, cols), nn::Matrix<double>(state_size, cols), {}, std::vector<double>(idx.size())};
    if (masked) b.mask.resize(n_actions, cols);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const Transition& t = *items[idx[j]];
      const auto c = static_cast<Eigen::Index>(j);
      b.x.col(c) = t.observation;
      if (state_size > 0) b.s.col(c) = t.snapshot;
      if (masked) {
        for (Eigen::Index a = 0; a < n_actions; ++a) b.mask(a, c) = t.allowed[static_cast<std::size_t>(a)] != 0;
      }
      b.old_lp[j] = t.log_prob;
    }
    return b;
  };
  const auto new_log_probs = [&](const nn::Matrix<double>& log_probs, std::span<const std::size_t> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out[j] = log_probs(static_cast<Eigen::Index>(items[idx[j]]->action), static_cast<Eigen::Index>(j));
    }
    return out;
  };

  // KL probe set: the whole buffer, or a uniform subset of kl_probe transitions.
  std::vector<std::size_t> probe(total);
  std::iota(probe.begin(), probe.end(), std::size_t{0});
  if (cfg_.kl_probe > 0 && total > cfg_.kl_probe) {
    for (std::size_t i = 0; i < cfg_.kl_probe; ++i) std::swap(probe[i], probe[i + uniform_index(shuffle_rng, total - i)]);
    probe.resize(cfg_.kl_probe);
    std::sort(probe.begin(), probe.end());
  }
  const auto probe_kl = [&] {
    constexpr std::size_t kChunk = 1024;
    double sum = 0.0;
    for (std::size_t start = 0; start < probe.size(); start += kChunk) {
      const auto idx = std::span<const std::size_t>(probe).subspan(start, std::min(kChunk, probe.size() - start));
      const auto b = gather(idx);
      const auto out = net_.forward(b.x, b.s, b.mask, nn::Heads::policy);
      const auto lp = new_log_probs(out.log_probs, idx);
      for (std::size_t j = 0; j < idx.size(); ++j) sum += b.old_lp[j] - lp[j];
    }
    return sum / static_cast<double>(probe.size());
  };
  // Check before minibatch 0 and whenever k * kl_checks / batches crosses an integer.
  const auto check_before = [&](std::size_t k) {
    if (k == 0 || cfg_.kl_checks == 0) return true;
    return k * cfg_.kl_checks / batches != (k - 1) * cfg_.kl_checks / batches;
  };

  std::vector<std::size_t> order(total);
  bool policy_active = true;
  double policy_loss_sum = 0.0;
  double value_loss_sum = 0.0;
  std::optional<double> last_kl;

  for (std::size_t pass = 0; pass < cfg_.value_epochs_per_policy_epoch; ++pass) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = total; i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);

    for (std::size_t start = 0, k = 0; start < total; start += mb, ++k) {
      const std::size_t m = std::min(mb, total - start);
      const auto idx = std::span<const std::size_t>(order).subspan(start, m);
      const auto b = gather(idx);
      nn::RowVector<double> ret(static_cast<Eigen::Index>(m));
      std::vector<double> adv(m);
      for (std::size_t j = 0; j < m; ++j) {
        ret(static_cast<Eigen::Index>(j)) = returns[idx[j]];
        adv[j] = advantages[idx[j]];
      }

      MinibatchEvent event{pass, k, m};
      if (pass == 0) ++stats.minibatches;
      if (pass == 0 && policy_active && check_before(k)) {
        const double kl = probe_kl();
        last_kl = kl;
        event.kl_checked = true;
        event.kl = kl;
        if (kl > cfg_.kl_threshold) {
          policy_active = false;
          stats.early_stop_step = k;
        }
      }
      if (pass == 0 && policy_active) {
        typename Net::Tape tape;
        const auto out = net_.forward(b.x, b.s, b.mask, nn::Heads::policy, &tape);
        const auto new_lp = new_log_probs(out.log_probs, idx);
        const auto loss = ppo_clip_loss(new_lp, b.old_lp, adv, cfg_.clip_ratio);
        nn::Matrix<double> d_lp = nn::Matrix<double>::Zero(n_actions, static_cast<Eigen::Index>(m));
        for (std::size_t j = 0; j < m; ++j) {
          d_lp(static_cast<Eigen::Index>(items[idx[j]]->action), static_cast<Eigen::Index>(j)) = loss.d_log_prob[j];
        }
        const nn::RowVector<double> no_value;
        net_.zero_grad();
        net_.backward(tape, std::span(&d_lp, 1), std::span(&no_value, 1));
        if (nn::clip_grad_norm(policy_opt_.params(), cfg_.max_grad_norm)) ++stats.grad_clip_events;
        policy_opt_.step();
        policy_loss_sum += loss.loss;
        ++stats.policy_steps;
        event.policy_updated = true;
      }

      typename Net::Tape tape;
      const auto out = net_.forward(b.x, b.s, {}, nn::Heads::value, &tape);
      const nn::RowVector<double> residual = out.values - ret;
      value_loss_sum += residual.squaredNorm() / static_cast<double>(m);
      const nn::RowVector<double> d_v = (2.0 / static_cast<double>(m)) * residual;
      const nn::Matrix<double> no_policy;
      net_.zero_grad();
      net_.backward(tape, std::span(&no_policy, 1), std::span(&d_v, 1));
      if (nn::clip_grad_norm(value_opt_.params(), cfg_.max_grad_norm)) ++stats.grad_clip_events;
      value_opt_.step();
      ++stats.value_steps;
      if (observer_) observer_(event);
    }
    // KL of the policy that finished the pass (the stopping value if it stopped).
    if (pass == 0) stats.mean_kl = policy_active ? probe_kl() : *last_kl;
  }

  stats.policy_loss = stats.policy_steps ? policy_loss_sum / static_cast<double>(stats.policy_steps) : 0.0;
  stats.value_loss = value_loss_sum / static_cast<double>(stats.value_steps);
  buffer.clear();
  ++epochs_;
  return stats;
}

template class Trainer<nn::RFNetwork<double>>;
template class Trainer<nn::BFNetworks<double>>;

}  // namespace prngrl::ppo
