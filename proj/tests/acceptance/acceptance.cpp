// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all
// selected criteria pass. Usage: acceptance [criterion ids...]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "prngrl/envs.hpp"
#include "prngrl/harness.hpp"
#include "prngrl/nist.hpp"
#include "support/gradcheck.hpp"
#include "support/toy_env.hpp"

using namespace prngrl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("prngrl_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Runs a shell command; returns (exit status, stdout).
std::pair<int, std::string> shell(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, out};
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  return {pclose(pipe), out};
}

// --- 1 -----------------------------------------------------------------------

/// Straight-formula monobit and runs P-values, written independently of the
/// battery (no shared helpers beyond libm).
double formula_monobit(const std::string& bits) {
  double s = 0;
  for (char c : bits) s += c == '1' ? 1 : -1;
  return std::erfc(std::fabs(s) / std::sqrt(static_cast<double>(bits.size())) / std::sqrt(2.0));
}

double formula_runs(const std::string& bits) {
  const double n = static_cast<double>(bits.size());
  double ones = 0;
  for (char c : bits) ones += c == '1';
  const double pi = ones / n;
  double v = 1;
  for (std::size_t k = 0; k + 1 < bits.size(); ++k) v += bits[k] != bits[k + 1];
  return std::erfc(std::fabs(v - 2 * n * pi * (1 - pi)) / (2 * std::sqrt(2 * n) * pi * (1 - pi)));
}

Verdict nist_oracles() {
  const double mono = formula_monobit("1011010101");
  const double runs = formula_runs("1001101011");
  const double bat_mono = nist::monobit_test(BitSequence::from_string("1011010101"))->p_values[0];
  const double bat_runs = nist::runs_test(BitSequence::from_string("1001101011"))->p_values[0];
  bool ok = std::fabs(mono - 0.527089) <= 1e-4 && std::fabs(runs - 0.147232) <= 1e-4 &&
            std::fabs(bat_mono - 0.527089) <= 1e-4 && std::fabs(bat_runs - 0.147232) <= 1e-4;

  std::ifstream is(std::string(PRNGRL_TEST_DATA_DIR) + "/nist_oracle_vectors.txt");
  if (!is) return {false, "oracle vector file missing"};
  std::size_t records = 0;
  std::size_t values = 0;
  std::set<std::string> sequences;
  double worst = 0.0;
  for (std::string line; std::getline(is, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, bits;
    std::size_t param = 0;
    ls >> name >> param >> bits;
    const auto id = nist::test_from_string(name);
    const auto seq = BitSequence::from_string(bits);
    std::optional<nist::TestOutcome> out;
    switch (*id) {
      case nist::TestId::block_frequency: out = nist::block_frequency_test(seq, param); break;
      case nist::TestId::serial: out = nist::serial_test(seq, param); break;
      case nist::TestId::approximate_entropy: out = nist::approximate_entropy_test(seq, param); break;
      default: out = nist::run_test(*id, seq);
    }
    std::vector<double> expected;
    for (double p; ls >> p;) expected.push_back(p);
    if (!out || out->p_values.size() != expected.size()) return {false, name + ": shape mismatch"};
    for (std::size_t k = 0; k < expected.size(); ++k) {
      worst = std::max(worst, std::fabs(out->p_values[k] - expected[k]));
      ++values;
    }
    if (seq.size() >= 80) sequences.insert(bits);
    ++records;
  }
  ok = ok && worst <= 1e-6 && sequences.size() >= 50;
  return {ok, "monobit " + fmt("%.6f", bat_mono) + " (formula " + fmt("%.6f", mono) + "), runs " + fmt("%.6f", bat_runs) +
                  " (formula " + fmt("%.6f", runs) + "); " + std::to_string(values) + " oracle P-values over " +
                  std::to_string(sequences.size()) + " long sequences, max |diff| " + fmt("%.2e", worst)};
}

// --- 2 -----------------------------------------------------------------------

Verdict gradient_checks() {
  Rng rng(8);
  double worst = 0.0;
  std::string where;
  const auto take = [&](const testing::GradCheckResult& r, const char* what) {
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = std::string(what) + " " + r.describe();
    }
  };
  for (int draw = 0; draw < 10; ++draw) {
    for (auto act : {nn::Activation::identity, nn::Activation::relu, nn::Activation::softmax}) {
      take(testing::check_dense(act, rng), "dense");
    }
    take(testing::check_lstm(rng), "lstm");
    take(testing::check_rf(rng), "rf N=2 hidden 8");
    take(testing::check_bf(rng), "bf B=4");
  }
  return {worst <= 1e-4, "10 draws x {dense x3, lstm, rf, bf}; max relative error " + fmt("%.2e", worst) +
                             " (" + where + ")"};
}

// --- 3 -----------------------------------------------------------------------

harness::ExperimentConfig rf_config(std::size_t n, std::size_t horizon, std::uint64_t seed) {
  harness::ExperimentConfig c;
  c.formulation = Formulation::rf;
  c.pattern_bits = n;
  c.horizon = horizon;
  c.master_seed = seed;
  return c;
}

harness::ExperimentConfig bf_config(std::size_t b, std::size_t horizon, std::uint64_t seed) {
  harness::ExperimentConfig c;
  c.formulation = Formulation::bf;
  c.length = b;
  c.horizon = horizon;
  c.master_seed = seed;
  return c;
}

double mean(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

Verdict baseline_ordering() {
  const double rf5 = mean(harness::random_rewards(rf_config(5, 100, 1), 200));
  const double bf200 = mean(harness::random_rewards(bf_config(200, 100, 1), 200));
  const double rf10 = mean(harness::random_rewards(rf_config(10, 100, 2), 200));
  const double bf400 = mean(harness::random_rewards(bf_config(400, 200, 2), 200));
  return {rf5 > bf200 && rf10 > bf400, "rho_RF(N=5,T=100) " + fmt("%.4f", rf5) + " vs rho_BF(B=200,T=100) " +
                                           fmt("%.4f", bf200) + "; rho_RF(N=10,T=100) " + fmt("%.4f", rf10) +
                                           " vs rho_BF(B=400,T=200) " + fmt("%.4f", bf400)};
}

// --- 4 -----------------------------------------------------------------------

Verdict desk_training() {
  const auto root = scratch("desk");
  const double baseline = mean(harness::random_rewards(rf_config(5, 100, 1000), 200));
  std::size_t wins = 0;
  std::string detail = "rho_RF " + fmt("%.4f", baseline) + ";";
  for (std::uint64_t seed : {1, 2, 3}) {
    auto cfg = rf_config(5, 100, seed);
    cfg.buffer_episodes = 100;
    cfg.epochs = 10;
    cfg.output_dir = "seed" + std::to_string(seed);
    const auto run = harness::run_experiment(cfg, {root});
    const double first = run.volleys.front().mean_reward;
    const double last = run.volleys.back().mean_reward;
    const bool win = last - first >= 0.02 && last - baseline >= 0.02;
    wins += win;
    detail += " seed " + std::to_string(seed) + ": first " + fmt("%.4f", first) + " final " + fmt("%.4f", last) +
              (win ? " ok;" : " no;");
  }
  return {wins >= 2, detail + " " + std::to_string(wins) + "/3 seeds improve by >= 0.02"};
}

// --- 5 -----------------------------------------------------------------------

Verdict toy_ppo() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto run = testing::run_toy_ppo(seed, 50, 64, 0.9);
    ok = ok && run.final_probability > 0.9;
    detail += "seed " + std::to_string(seed) + ": p=" + fmt("%.3f", run.final_probability) + " after " +
              std::to_string(run.epochs) + " epochs; ";
  }
  return {ok, detail};
}

// --- 6 -----------------------------------------------------------------------

Verdict cli_determinism() {
  const auto root = scratch("cli");
  const std::string cli = PRNGRL_CLI;
  std::ofstream(root / "desk.ini") << "[experiment]\nformulation = rf\nepochs = 4\nbuffer_episodes = 8\n"
                                      "output_dir = run\n[env]\npattern_bits = 10\nhorizon = 20\n"
                                      "[network]\nlstm_hidden = 16, 16\nhead_widths = 32, 16\n";
  for (const char* side : {"a", "b"}) {
    const auto [status, out] = shell("PRNGRL_OUTPUT_ROOT=" + (root / side).string() + " " + cli + " train " +
                                     (root / "desk.ini").string() + " --seed 7");
    if (status != 0) return {false, "train exited with " + std::to_string(status)};
  }
  const auto csv_a = slurp(root / "a" / "run" / "metrics.csv");
  const bool same_csv = !csv_a.empty() && csv_a == slurp(root / "b" / "run" / "metrics.csv");
  const bool same_ckpt = slurp(root / "a" / "run" / "checkpoints" / "final.ckpt") ==
                         slurp(root / "b" / "run" / "checkpoints" / "final.ckpt");

  const auto [status, out] = shell(cli + " evaluate " + (root / "a" / "run" / "checkpoints" / "final.ckpt").string() +
                                   " --episodes 3 --emit-sequences " + (root / "seqs").string());
  if (status != 0) return {false, "evaluate exited with " + std::to_string(status)};
  std::size_t matched = 0;
  std::size_t episodes = 0;
  std::istringstream lines(out);
  for (std::string line; std::getline(lines, line);) {
    if (!line.starts_with("episode ")) continue;
    ++episodes;
    std::istringstream ls(line);
    std::string word, reported, file;
    while (ls >> word) {
      if (word == "avg_nist") ls >> reported;
      if (word == "file") ls >> file;
    }
    const auto [st, report] = shell(cli + " nist-test " + file);
    const auto pos = report.rfind("avg_nist ");
    if (st == 0 && pos != std::string::npos && report.substr(pos + 9, reported.size()) == reported &&
        report.size() == pos + 9 + reported.size() + 1) {
      ++matched;
    }
  }
  const bool ok = same_csv && same_ckpt && episodes == 3 && matched == 3;
  return {ok, std::string("train rerun: metrics.csv ") + (same_csv ? "identical" : "DIFFERS") + ", final.ckpt " +
                  (same_ckpt ? "identical" : "DIFFERS") + "; evaluate -> nist-test avg_nist reproduced for " +
                  std::to_string(matched) + "/" + std::to_string(episodes) + " sequences"};
}

// --- 7 -----------------------------------------------------------------------

Verdict environment_properties() {
  std::vector<std::string> failures;
  std::size_t checks = 0;
  const auto expect = [&](bool cond, const std::string& what) {
    ++checks;
    if (!cond && failures.size() < 5) failures.push_back(what);
  };
  {
    RecurrentEnv env({3, 100});
    env.reset_to({0, 0, 1});
    env.step(index_from_bits({1, 1, 1}));
    expect(env.state().full == BitSequence{0, 0, 1, 1, 1, 1}, "worked example step 1");
    env.step(index_from_bits({1, 0, 1}));
    expect(env.state().full == BitSequence{0, 0, 1, 1, 1, 1, 1, 0, 1}, "worked example step 2");
  }
  Rng rng(2024);
  std::size_t episodes = 0;
  for (; episodes < 1000; ++episodes) {
    const auto kind = episodes % 3;
    std::unique_ptr<Environment> env;
    std::size_t n = 0;
    std::size_t b = 0;
    const std::size_t horizon = 1 + uniform_index(rng, 40);
    if (kind == 0) {
      n = 1 + uniform_index(rng, kMaxPatternBits);
      env = std::make_unique<RecurrentEnv>(RFConfig{n, horizon});
    } else {
      b = 1 + uniform_index(rng, 120);
      const auto init = uniform_index(rng, 2) ? BFInitialState::uniform : BFInitialState::zeros;
      env = std::make_unique<BinaryEnv>(BFConfig{b, horizon, kind == 2, init});
    }
    env->reset(rng);
    StepResult last;
    for (std::size_t t = 0; t < horizon; ++t) {
      const BitSequence before = env->state().full;
      std::size_t action = uniform_index(rng, env->action_count());
      if (kind == 2) {
        const auto mask = env->action_mask();
        expect(mask && mask->count_allowed() == b, "wanderer mask cardinality != B");
        while (!(*mask)[action]) action = uniform_index(rng, env->action_count());
      }
      last = env->step(action);
      const auto& after = env->state().full;
      if (kind == 0) {
        const auto pattern = bits_from_index(action, n);
        expect(after.size() == before.size() + n, "RF step must append N bits");
        expect(after == append_pattern(before, pattern), "RF step appends the action's big-endian pattern");
        expect(last.observation == pattern, "RF observation is the appended pattern");
      } else {
        const auto [pos, bit] = BinaryEnv::decode(action);
        expect(after == set_bit(before, pos, bit), "BF step sets bit n to v");
        if (kind == 2) expect(after != before, "wanderer step must change the state");
      }
      expect(last.done == (t + 1 == horizon), "done exactly at the horizon");
      if (!last.done) expect(last.reward == 0.0, "non-terminal reward must be 0");
    }
    const auto& full = env->state().full;
    expect(last.reward == nist::avg_nist(full), "terminal reward == avg_nist(final state)");
    expect(last.reward >= 0.0 && last.reward <= 1.0, "reward within [0, 1]");
    if (kind == 0) expect(full.size() == n * (horizon + 1), "RF final length N(T+1)");
    if (kind != 0) expect(full.size() == b, "BF length stays B");
    bool threw = false;
    try {
      env->step(0);
    } catch (const EpisodeFinishedError&) {
      threw = true;
    }
    expect(threw, "stepping a finished episode must throw");
  }
  std::string detail = std::to_string(episodes) + " randomized episodes (rf, bf, bf_wanderer) + worked example, " +
                       std::to_string(checks) + " checks";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> all = {
      {1, "NIST oracle equivalence", nist_oracles},
      {2, "gradient checks", gradient_checks},
      {3, "random-baseline ordering", baseline_ordering},
      {4, "desk-scale training improvement", desk_training},
      {5, "PPO sanity on the toy MDP", toy_ppo},
      {6, "CLI determinism and rescoring", cli_determinism},
      {7, "environment semantics", environment_properties},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << ", " << fmt("%.1f", secs)
              << " s): " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
