// prngrl: train, baseline, evaluate and inspect PRNG agents.
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prngrl/harness.hpp"

namespace fs = std::filesystem;
using namespace prngrl;

namespace {

std::optional<std::ofstream> open_trace(const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open trace file " + path);
  return os;
}

harness::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = harness::load_config(path);
  if (seed) cfg.master_seed = *seed;
  cfg.validate();
  return cfg;
}

BFInitialState initial_state(const std::string& name) {
  if (name == "zeros") return BFInitialState::zeros;
  if (name == "uniform") return BFInitialState::uniform;
  throw std::invalid_argument("unknown initial state '" + name + "' (expected zeros or uniform)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learned PRNG toolkit"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string trace_path;
  std::string config_path;

  auto* train = app.add_subcommand("train", "Run a PPO experiment described by a config file");
  train->add_option("config", config_path, "Experiment config")->required();
  train->add_option("--seed", seed, "Override master_seed");
  train->add_option("--trace", trace_path, "Dump every episode (t observation action reward)");

  std::size_t episodes = 1;
  auto* baseline = app.add_subcommand("random-baseline", "Score the uniform random agent");
  baseline->add_option("config", config_path, "Experiment config")->required();
  baseline->add_option("--episodes", episodes, "Episodes to play")->required()->check(CLI::PositiveNumber);
  baseline->add_option("--seed", seed, "Override master_seed");
  baseline->add_option("--trace", trace_path, "Dump every episode");

  std::string checkpoint_path;
  std::string emit_dir;
  std::string formulation;
  std::string init_name = "zeros";
  bool greedy = false;
  auto* evaluate = app.add_subcommand("evaluate", "Play episodes with a trained checkpoint");
  evaluate->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  evaluate->add_option("--episodes", episodes, "Episodes to play")->required()->check(CLI::PositiveNumber);
  evaluate->add_option("--emit-sequences", emit_dir, "Write each final sequence as a bitfile into DIR");
  evaluate->add_flag("--greedy", greedy, "Argmax actions instead of sampling");
  evaluate->add_option("--seed", seed, "Seed for environment resets and action sampling (default 0)");
  evaluate->add_option("--formulation", formulation, "Require this formulation (bf, bf_wanderer, rf)");
  evaluate->add_option("--initial-state", init_name, "BF initial state: zeros or uniform");
  evaluate->add_option("--trace", trace_path, "Dump every episode");

  std::string bitfile;
  auto* nist_test = app.add_subcommand("nist-test", "Run the statistical battery on a bitfile");
  nist_test->add_option("bitfile", bitfile, "File of '0'/'1' characters")->required();

  std::string pgm;
  std::optional<std::size_t> rows, cols;
  auto* render = app.add_subcommand("render-bits", "Render a bitfile as a smoothed PGM image");
  render->add_option("bitfile", bitfile, "File of '0'/'1' characters")->required();
  render->add_option("-o,--output", pgm, "Output PGM")->required();
  render->add_option("--rows", rows, "Grid rows (with --cols)");
  render->add_option("--cols", cols, "Grid columns (with --rows)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    auto trace = open_trace(trace_path);
    std::ostream* trace_os = trace ? &*trace : nullptr;
    harness::RunOptions opts;
    opts.output_root = harness::default_output_root();
    opts.trace = trace_os;

    if (*train) {
      const auto cfg = load(config_path, seed);
      opts.log = &std::cout;
      const auto result = harness::run_experiment(cfg, opts);
      std::cout << "wrote " << (result.output_dir / "metrics.csv").string() << '\n';
    } else if (*baseline) {
      const auto cfg = load(config_path, seed);
      const auto result = harness::random_baseline(cfg, episodes, opts);
      std::cout << "episodes " << result.rewards.size() << " mean_reward " << harness::fixed6(result.mean)
                << " std_reward " << harness::fixed6(result.std) << '\n'
                << "wrote " << (result.output_dir / "baseline.csv").string() << '\n';
    } else if (*evaluate) {
      harness::EvaluateOptions eo;
      eo.episodes = episodes;
      eo.greedy = greedy;
      eo.seed = seed.value_or(0);
      if (!formulation.empty()) eo.expected = formulation_from_string(formulation);
      eo.initial_state = initial_state(init_name);
      if (!emit_dir.empty()) eo.emit_dir = fs::path(emit_dir);
      eo.trace = trace_os;
      const auto results = harness::evaluate(fs::path(checkpoint_path), eo);
      double sum = 0.0;
      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::cout << "episode " << i << " bits " << r.sequence.size() << " avg_nist "
                  << harness::fixed6(r.report.avg_score);
        if (r.bitfile) std::cout << " file " << r.bitfile->string();
        std::cout << '\n';
        sum += r.report.avg_score;
      }
      std::cout << "mean_avg_nist " << harness::fixed6(sum / static_cast<double>(results.size())) << '\n';
    } else if (*nist_test) {
      std::cout << harness::format_report(nist::run_battery(read_bitfile(bitfile)));
    } else if (*render) {
      const auto image = harness::render_bits(bitfile, pgm, rows, cols);
      std::cout << "wrote " << pgm << " (" << image.width << "x" << image.height << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
