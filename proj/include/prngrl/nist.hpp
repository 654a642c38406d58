#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prngrl/bitseq.hpp"

namespace prngrl::nist {

/// Significance level for the pass/fail decision.
inline constexpr double kAlpha = 0.01;

enum class TestId {
  monobit,
  block_frequency,
  runs,
  longest_run,
  dft_spectral,
  serial,
  approximate_entropy,
  cumulative_sums,
};

inline constexpr TestId kAllTests[] = {
    TestId::monobit,      TestId::block_frequency, TestId::runs,
    TestId::longest_run,  TestId::dft_spectral,    TestId::serial,
    TestId::approximate_entropy, TestId::cumulative_sums,
};

std::string_view to_string(TestId id);
std::optional<TestId> test_from_string(std::string_view name);

struct TestOutcome {
  TestId test_id;
  std::vector<double> p_values;
  bool passed = false;
  /// Mean P-value if passed, 0 otherwise.
  double score = 0.0;
};

/// Builds an outcome from raw P-values: passed iff every value >= alpha.
TestOutcome make_outcome(TestId id, std::vector<double> p_values, double alpha = kAlpha);

struct BatteryReport {
  std::vector<TestOutcome> outcomes;
  std::size_t eligible_count = 0;
  double avg_score = 0.0;
};

/// Mean of the outcome scores; 0 for an empty list.
BatteryReport aggregate(std::vector<TestOutcome> outcomes);

// Individual tests. Each returns std::nullopt when the sequence does not
// satisfy the test's own preconditions (the ineligibility signal).

std::optional<TestOutcome> monobit_test(const BitSequence& seq);
std::optional<TestOutcome> block_frequency_test(const BitSequence& seq, std::size_t block_size);
std::optional<TestOutcome> runs_test(const BitSequence& seq);
std::optional<TestOutcome> longest_run_test(const BitSequence& seq);
/// An odd-length input drops its last bit.
std::optional<TestOutcome> dft_spectral_test(const BitSequence& seq);
std::optional<TestOutcome> serial_test(const BitSequence& seq, std::size_t pattern_length);
std::optional<TestOutcome> approximate_entropy_test(const BitSequence& seq, std::size_t pattern_length);
std::optional<TestOutcome> cumulative_sums_test(const BitSequence& seq);

/// Minimum length and parameter bindings used by the battery.
struct EligibilityRule {
  TestId test_id;
  std::size_t min_length;
  /// Block size M (block_frequency) or pattern length m (serial,
  /// approximate_entropy) at length n; 0 for parameterless tests.
  std::size_t (*parameter)(std::size_t n);
};

const std::vector<EligibilityRule>& eligibility_table();

/// Tests eligible at length n, in table order.
std::vector<TestId> eligible_tests(std::size_t n);

/// Parameter the battery binds for `id` at length n (0 if none).
std::size_t bound_parameter(TestId id, std::size_t n);

/// Runs one test with the battery's parameter binding.
std::optional<TestOutcome> run_test(TestId id, const BitSequence& seq);

/// Runs every eligible test.
BatteryReport run_battery(const BitSequence& seq);

/// The terminal reward: avg_score of run_battery, 0 when nothing is eligible.
double avg_nist(const BitSequence& seq);

}  // namespace prngrl::nist
