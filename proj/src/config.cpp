#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "prngrl/harness.hpp"

namespace prngrl::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> parse_list(std::string_view v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = v.find(',', pos);
    out.push_back(parse_integer<std::size_t>(trim(v.substr(pos, comma - pos))));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

BFInitialState parse_initial_state(std::string_view v) {
  if (v == "zeros") return BFInitialState::zeros;
  if (v == "uniform") return BFInitialState::uniform;
  throw std::invalid_argument("expected zeros or uniform, got '" + std::string(v) + "'");
}

std::string real_text(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string list_text(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + std::to_string(xs[i]);
  return out;
}

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  // nullopt: field omitted from the serialized form
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

template <typename T>
Field size_field(std::string_view section, std::string_view key, T ExperimentConfig::*member) {
  return {section, key, [member](ExperimentConfig& c, std::string_view v) { c.*member = parse_integer<T>(v); },
          [member](const ExperimentConfig& c) { return std::optional<std::string>(std::to_string(c.*member)); }};
}

template <typename T>
Field ppo_field(std::string_view key, T ppo::PPOConfig::*member) {
  return {"ppo", key,
          [member](ExperimentConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.ppo.*member = parse_real(v);
            } else {
              c.ppo.*member = parse_integer<T>(v);
            }
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return std::optional<std::string>(real_text(c.ppo.*member));
            } else {
              return std::optional<std::string>(std::to_string(c.ppo.*member));
            }
          }};
}

Field list_field(std::string_view key, std::vector<std::size_t> NetworkConfig::*member) {
  return {"network", key, [member](ExperimentConfig& c, std::string_view v) { c.network.*member = parse_list(v); },
          [member](const ExperimentConfig& c) { return std::optional<std::string>(list_text(c.network.*member)); }};
}

Field optional_size(std::string_view key, std::optional<std::size_t> ExperimentConfig::*member) {
  return {"env", key, [member](ExperimentConfig& c, std::string_view v) { c.*member = parse_integer<std::size_t>(v); },
          [member](const ExperimentConfig& c) -> std::optional<std::string> {
            if (!(c.*member)) return std::nullopt;
            return std::to_string(*(c.*member));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"experiment", "formulation",
       [](ExperimentConfig& c, std::string_view v) { c.formulation = formulation_from_string(v); },
       [](const ExperimentConfig& c) { return std::optional<std::string>(to_string(c.formulation)); }},
      size_field("experiment", "master_seed", &ExperimentConfig::master_seed),
      size_field("experiment", "epochs", &ExperimentConfig::epochs),
      size_field("experiment", "volley_epochs", &ExperimentConfig::volley_epochs),
      size_field("experiment", "buffer_episodes", &ExperimentConfig::buffer_episodes),
      size_field("experiment", "checkpoint_interval", &ExperimentConfig::checkpoint_interval),
      {"experiment", "output_dir", [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); },
       [](const ExperimentConfig& c) { return std::optional<std::string>(c.output_dir); }},
      {"experiment", "record_wall_time",
       [](ExperimentConfig& c, std::string_view v) { c.record_wall_time = parse_bool(v); },
       [](const ExperimentConfig& c) { return std::optional<std::string>(c.record_wall_time ? "true" : "false"); }},
      optional_size("length", &ExperimentConfig::length),
      optional_size("pattern_bits", &ExperimentConfig::pattern_bits),
      size_field("env", "horizon", &ExperimentConfig::horizon),
      {"env", "initial_state",
       [](ExperimentConfig& c, std::string_view v) { c.initial_state = parse_initial_state(v); },
       [](const ExperimentConfig& c) {
         return std::optional<std::string>(c.initial_state == BFInitialState::zeros ? "zeros" : "uniform");
       }},
      list_field("lstm_hidden", &NetworkConfig::lstm_hidden),
      list_field("head_widths", &NetworkConfig::head_widths),
      list_field("bf_hidden", &NetworkConfig::bf_hidden),
      ppo_field("clip_ratio", &ppo::PPOConfig::clip_ratio),
      ppo_field("kl_threshold", &ppo::PPOConfig::kl_threshold),
      ppo_field("gae_lambda", &ppo::PPOConfig::gae_lambda),
      ppo_field("gamma", &ppo::PPOConfig::gamma),
      ppo_field("minibatch", &ppo::PPOConfig::minibatch),
      ppo_field("lr_policy", &ppo::PPOConfig::lr_policy),
      ppo_field("lr_value", &ppo::PPOConfig::lr_value),
      ppo_field("value_epochs_per_policy_epoch", &ppo::PPOConfig::value_epochs_per_policy_epoch),
      ppo_field("max_grad_norm", &ppo::PPOConfig::max_grad_norm),
      ppo_field("kl_probe", &ppo::PPOConfig::kl_probe),
      ppo_field("kl_checks", &ppo::PPOConfig::kl_checks),
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  if (formulation == Formulation::rf) {
    if (!pattern_bits) {
      bad.emplace_back("env.pattern_bits (required for rf)");
    } else if (*pattern_bits < 1 || *pattern_bits > kMaxPatternBits) {
      bad.emplace_back("env.pattern_bits (must be in [1, " + std::to_string(kMaxPatternBits) + "])");
    }
    if (length) bad.emplace_back("env.length (not allowed for rf)");
    if (network.lstm_hidden.empty()) bad.emplace_back("network.lstm_hidden (empty)");
  } else {
    if (!length) {
      bad.emplace_back("env.length (required for " + std::string(to_string(formulation)) + ")");
    } else if (*length < 1) {
      bad.emplace_back("env.length (must be >= 1)");
    }
    if (pattern_bits) bad.emplace_back("env.pattern_bits (not allowed for " + std::string(to_string(formulation)) + ")");
  }
  if (horizon < 1) bad.emplace_back("env.horizon (must be >= 1)");
  if (buffer_episodes < 1) bad.emplace_back("experiment.buffer_episodes (must be >= 1)");
  if (epochs < 1) bad.emplace_back("experiment.epochs (must be >= 1)");
  if (volley_epochs < 1) bad.emplace_back("experiment.volley_epochs (must be >= 1)");
  if (output_dir.empty()) bad.emplace_back("experiment.output_dir (empty)");
  for (const auto* list : {&network.lstm_hidden, &network.head_widths, &network.bf_hidden}) {
    for (auto w : *list) {
      if (w < 1) {
        bad.emplace_back("network (layer widths must be >= 1)");
        break;
      }
    }
  }
  for (const auto& f : ppo.invalid_fields()) bad.push_back("ppo." + f);
  if (bad.empty()) return;
  std::string msg = "invalid config: ";
  for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? ", " : "") + bad[i];
  throw ConfigError(msg);
}

Architecture ExperimentConfig::architecture() const {
  Architecture a;
  a.formulation = formulation;
  a.size = size();
  a.horizon = horizon;
  if (formulation == Formulation::rf) {
    a.lstm_hidden.assign(network.lstm_hidden.begin(), network.lstm_hidden.end());
    a.dense_hidden.assign(network.head_widths.begin(), network.head_widths.end());
  } else {
    a.dense_hidden.assign(network.bf_hidden.begin(), network.bf_hidden.end());
  }
  return a;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto fail = [&](const std::string& what) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
    };
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "experiment" && section != "env" && section != "network" && section != "ppo") {
        fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of a section");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (!field) fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) fail("duplicate key '" + key + "'");
    try {
      field->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      fail(key + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string_view section;
  for (const auto& f : fields()) {
    const auto value = f.get(cfg);
    if (!value) continue;
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + std::string(section) + "]\n";
    }
    out += std::string(f.key) + " = " + *value + "\n";
  }
  return out;
}

}  // namespace prngrl::harness
