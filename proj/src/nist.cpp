#include "prngrl/nist.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "prngrl/special.hpp"

namespace prngrl::nist {

namespace {

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

std::size_t floor_log2(std::size_t n) {
  std::size_t r = 0;
  while (n >>= 1) ++r;
  return r;
}

// Overlapping m-bit pattern frequencies with the first m-1 bits wrapped
// around the end; index = big-endian value of the pattern.
std::vector<std::size_t> cyclic_pattern_counts(const BitSequence& seq, std::size_t m) {
  const std::size_t n = seq.size();
  std::vector<std::size_t> counts(std::size_t{1} << m, 0);
  const std::size_t mask = (std::size_t{1} << m) - 1;
  std::size_t value = 0;
  for (std::size_t i = 0; i < m - 1; ++i) value = (value << 1) | seq[i % n];
  for (std::size_t i = 0; i < n; ++i) {
    value = ((value << 1) | seq[(i + m - 1) % n]) & mask;
    ++counts[value];
  }
  return counts;
}

double psi_squared(const BitSequence& seq, std::size_t m) {
  if (m == 0) return 0.0;
  const auto n = static_cast<double>(seq.size());
  double sum = 0.0;
  for (auto c : cyclic_pattern_counts(seq, m)) sum += static_cast<double>(c) * static_cast<double>(c);
  return std::ldexp(sum, static_cast<int>(m)) / n - n;
}

double phi(const BitSequence& seq, std::size_t m) {
  if (m == 0) return 0.0;
  const auto n = static_cast<double>(seq.size());
  double sum = 0.0;
  for (auto c : cyclic_pattern_counts(seq, m)) {
    if (c == 0) continue;
    const double freq = static_cast<double>(c) / n;
    sum += freq * std::log(freq);
  }
  return sum;
}

double cusum_p_value(double n, double z) {
  const double sq = std::sqrt(n);
  double sum1 = 0.0;
  for (auto k = static_cast<long>(std::floor((-n / z + 1.0) / 4.0)); k <= static_cast<long>(std::floor((n / z - 1.0) / 4.0)); ++k) {
    sum1 += normal_cdf((4.0 * k + 1.0) * z / sq) - normal_cdf((4.0 * k - 1.0) * z / sq);
  }
  double sum2 = 0.0;
  for (auto k = static_cast<long>(std::floor((-n / z - 3.0) / 4.0)); k <= static_cast<long>(std::floor((n / z - 1.0) / 4.0)); ++k) {
    sum2 += normal_cdf((4.0 * k + 3.0) * z / sq) - normal_cdf((4.0 * k + 1.0) * z / sq);
  }
  return clamp01(1.0 - sum1 + sum2);
}

double max_excursion(const BitSequence& seq, bool forward) {
  long s = 0;
  long z = 0;
  const std::size_t n = seq.size();
  for (std::size_t i = 0; i < n; ++i) {
    s += seq[forward ? i : n - 1 - i] ? 1 : -1;
    z = std::max(z, std::labs(s));
  }
  return static_cast<double>(z);
}

std::size_t block_frequency_size(std::size_t n) { return n < 200 ? 8 : 20; }
std::size_t serial_length(std::size_t n) { return std::min<std::size_t>(3, floor_log2(n) - 3); }
std::size_t apen_length(std::size_t) { return 2; }

}  // namespace

std::string_view to_string(TestId id) {
  switch (id) {
    case TestId::monobit: return "monobit";
    case TestId::block_frequency: return "block_frequency";
    case TestId::runs: return "runs";
    case TestId::longest_run: return "longest_run";
    case TestId::dft_spectral: return "dft_spectral";
    case TestId::serial: return "serial";
    case TestId::approximate_entropy: return "approximate_entropy";
    case TestId::cumulative_sums: return "cumulative_sums";
  }
  return "unknown";
}

std::optional<TestId> test_from_string(std::string_view name) {
  for (auto id : kAllTests) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

TestOutcome make_outcome(TestId id, std::vector<double> p_values, double alpha) {
  TestOutcome out{id, std::move(p_values), true, 0.0};
  for (double p : out.p_values) out.passed = out.passed && p >= alpha;
  if (out.passed && !out.p_values.empty()) {
    out.score = std::accumulate(out.p_values.begin(), out.p_values.end(), 0.0) / static_cast<double>(out.p_values.size());
  }
  return out;
}

BatteryReport aggregate(std::vector<TestOutcome> outcomes) {
  BatteryReport report;
  report.eligible_count = outcomes.size();
  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.score;
  report.avg_score = outcomes.empty() ? 0.0 : sum / static_cast<double>(outcomes.size());
  report.outcomes = std::move(outcomes);
  return report;
}

std::optional<TestOutcome> monobit_test(const BitSequence& seq) {
  const std::size_t n = seq.size();
  if (n < 1) return std::nullopt;
  const double s = 2.0 * static_cast<double>(seq.count_ones()) - static_cast<double>(n);
  const double s_obs = std::fabs(s) / std::sqrt(static_cast<double>(n));
  return make_outcome(TestId::monobit, {clamp01(erfc(s_obs / std::numbers::sqrt2))});
}

std::optional<TestOutcome> block_frequency_test(const BitSequence& seq, std::size_t block_size) {
  const std::size_t n = seq.size();
  if (block_size < 1 || n < block_size) return std::nullopt;
  const std::size_t blocks = n / block_size;
  double chi2 = 0.0;
  for (std::size_t j = 0; j < blocks; ++j) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < block_size; ++k) ones += seq[j * block_size + k];
    const double pi = static_cast<double>(ones) / static_cast<double>(block_size) - 0.5;
    chi2 += pi * pi;
  }
  chi2 *= 4.0 * static_cast<double>(block_size);
  return make_outcome(TestId::block_frequency, {clamp01(igamc(static_cast<double>(blocks) / 2.0, chi2 / 2.0))});
}

std::optional<TestOutcome> runs_test(const BitSequence& seq) {
  const std::size_t n = seq.size();
  if (n < 2) return std::nullopt;
  const double nd = static_cast<double>(n);
  const double pi = static_cast<double>(seq.count_ones()) / nd;
  if (std::fabs(pi - 0.5) >= 2.0 / std::sqrt(nd)) return make_outcome(TestId::runs, {0.0});
  std::size_t runs = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) runs += seq[k] != seq[k + 1];
  const double num = std::fabs(static_cast<double>(runs) - 2.0 * nd * pi * (1.0 - pi));
  const double den = 2.0 * std::sqrt(2.0 * nd) * pi * (1.0 - pi);
  return make_outcome(TestId::runs, {clamp01(erfc(num / den))});
}

std::optional<TestOutcome> longest_run_test(const BitSequence& seq) {
  const std::size_t n = seq.size();
  if (n < 128) return std::nullopt;

  std::size_t block_size = 0;
  std::size_t lowest = 0;
  std::size_t highest = 0;
  std::vector<double> probs;
  if (n < 6272) {
    block_size = 8;
    lowest = 1;
    highest = 4;
    probs = {0.2148, 0.3672, 0.2305, 0.1875};
  } else if (n < 750000) {
    block_size = 128;
    lowest = 4;
    highest = 9;
    probs = {0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124};
  } else {
    block_size = 10000;
    lowest = 10;
    highest = 16;
    probs = {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727};
  }

  const std::size_t blocks = n / block_size;
  std::vector<std::size_t> nu(probs.size(), 0);
  for (std::size_t j = 0; j < blocks; ++j) {
    std::size_t best = 0;
    std::size_t run = 0;
    for (std::size_t k = 0; k < block_size; ++k) {
      run = seq[j * block_size + k] ? run + 1 : 0;
      best = std::max(best, run);
    }
    ++nu[std::clamp(best, lowest, highest) - lowest];
  }
  double chi2 = 0.0;
  const auto nb = static_cast<double>(blocks);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double expected = nb * probs[i];
    const double diff = static_cast<double>(nu[i]) - expected;
    chi2 += diff * diff / expected;
  }
  const double k = static_cast<double>(probs.size() - 1);
  return make_outcome(TestId::longest_run, {clamp01(igamc(k / 2.0, chi2 / 2.0))});
}

std::optional<TestOutcome> dft_spectral_test(const BitSequence& seq) {
  const std::size_t n = seq.size() - seq.size() % 2;
  if (n < 2) return std::nullopt;

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = seq[i] ? 1.0 : -1.0;

  // Direct transform over the first n/2 bins with an exact twiddle table.
  std::vector<double> cos_table(n);
  std::vector<double> sin_table(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    cos_table[k] = std::cos(angle);
    sin_table[k] = std::sin(angle);
  }
  const double nd = static_cast<double>(n);
  const double threshold = std::sqrt(std::log(1.0 / 0.05) * nd);
  std::size_t below = 0;
  for (std::size_t j = 0; j < n / 2; ++j) {
    double re = 0.0;
    double im = 0.0;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < n; ++k) {
      re += x[k] * cos_table[idx];
      im -= x[k] * sin_table[idx];
      idx += j;
      if (idx >= n) idx -= n;
    }
    below += std::hypot(re, im) < threshold;
  }
  const double expected = 0.95 * nd / 2.0;
  const double d = (static_cast<double>(below) - expected) / std::sqrt(nd * 0.95 * 0.05 / 4.0);
  return make_outcome(TestId::dft_spectral, {clamp01(erfc(std::fabs(d) / std::numbers::sqrt2))});
}

std::optional<TestOutcome> serial_test(const BitSequence& seq, std::size_t pattern_length) {
  const std::size_t n = seq.size();
  const std::size_t m = pattern_length;
  if (n < 8 || m < 1 || m + 2 >= floor_log2(n)) return std::nullopt;
  const double psi0 = psi_squared(seq, m);
  const double psi1 = psi_squared(seq, m - 1);
  const double psi2 = m >= 2 ? psi_squared(seq, m - 2) : 0.0;
  const double del1 = psi0 - psi1;
  const double del2 = psi0 - 2.0 * psi1 + psi2;
  const int e = static_cast<int>(m);
  return make_outcome(TestId::serial, {clamp01(igamc(std::ldexp(1.0, e - 2), std::max(0.0, del1) / 2.0)),
                                       clamp01(igamc(std::ldexp(1.0, e - 3), std::max(0.0, del2) / 2.0))});
}

std::optional<TestOutcome> approximate_entropy_test(const BitSequence& seq, std::size_t pattern_length) {
  const std::size_t n = seq.size();
  const std::size_t m = pattern_length;
  if (m < 1 || n < m + 2) return std::nullopt;
  const double apen = phi(seq, m) - phi(seq, m + 1);
  const double chi2 = 2.0 * static_cast<double>(n) * (std::numbers::ln2 - apen);
  return make_outcome(TestId::approximate_entropy,
                      {clamp01(igamc(std::ldexp(1.0, static_cast<int>(m) - 1), std::max(0.0, chi2) / 2.0))});
}

std::optional<TestOutcome> cumulative_sums_test(const BitSequence& seq) {
  const std::size_t n = seq.size();
  if (n < 1) return std::nullopt;
  const auto nd = static_cast<double>(n);
  return make_outcome(TestId::cumulative_sums,
                      {cusum_p_value(nd, max_excursion(seq, true)), cusum_p_value(nd, max_excursion(seq, false))});
}

const std::vector<EligibilityRule>& eligibility_table() {
  static const std::vector<EligibilityRule> table = {
      {TestId::monobit, 1, nullptr},
      {TestId::block_frequency, 16, &block_frequency_size},
      {TestId::runs, 16, nullptr},
      {TestId::longest_run, 128, nullptr},
      {TestId::dft_spectral, 64, nullptr},
      {TestId::serial, 32, &serial_length},
      {TestId::approximate_entropy, 32, &apen_length},
      {TestId::cumulative_sums, 16, nullptr},
  };
  return table;
}

std::vector<TestId> eligible_tests(std::size_t n) {
  std::vector<TestId> out;
  for (const auto& rule : eligibility_table()) {
    if (n >= rule.min_length) out.push_back(rule.test_id);
  }
  return out;
}

std::size_t bound_parameter(TestId id, std::size_t n) {
  for (const auto& rule : eligibility_table()) {
    if (rule.test_id == id) return rule.parameter ? rule.parameter(n) : 0;
  }
  return 0;
}

std::optional<TestOutcome> run_test(TestId id, const BitSequence& seq) {
  const std::size_t param = bound_parameter(id, seq.size());
  switch (id) {
    case TestId::monobit: return monobit_test(seq);
    case TestId::block_frequency: return block_frequency_test(seq, param);
    case TestId::runs: return runs_test(seq);
    case TestId::longest_run: return longest_run_test(seq);
    case TestId::dft_spectral: return dft_spectral_test(seq);
    case TestId::serial: return serial_test(seq, param);
    case TestId::approximate_entropy: return approximate_entropy_test(seq, param);
    case TestId::cumulative_sums: return cumulative_sums_test(seq);
  }
  return std::nullopt;
}

BatteryReport run_battery(const BitSequence& seq) {
  std::vector<TestOutcome> outcomes;
  for (auto id : eligible_tests(seq.size())) {
    if (auto outcome = run_test(id, seq)) outcomes.push_back(std::move(*outcome));
  }
  return aggregate(std::move(outcomes));
}

double avg_nist(const BitSequence& seq) { return run_battery(seq).avg_score; }

}  // namespace prngrl::nist
