#pragma once

// Binary checkpoint layout (all integers little-endian, reals IEEE-754
// binary64 little-endian):
//
//   bytes  0..7   magic "PRNGRLCK"
//   u32           format version (currently 1)
//   u32           formulation: 0 = bf, 1 = bf_wanderer, 2 = rf
//   u64           size: B (bf*) or N (rf)
//   u64           horizon T
//   u64           epochs completed
//   u32 k, u64[k] LSTM hidden sizes (rf; k = 0 for bf*)
//   u32 k, u64[k] dense hidden widths (rf heads / bf networks)
//   u32           tensor count
//   per tensor:   u32 name length, name bytes, u64 rows, u64 cols,
//                 rows*cols f64 in column-major order
//
// Tensors appear in the network's all_params() order.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prngrl/neural.hpp"

namespace prngrl {

enum class Formulation : std::uint32_t { bf = 0, bf_wanderer = 1, rf = 2 };

std::string_view to_string(Formulation f);
/// Throws std::invalid_argument for unknown names.
Formulation formulation_from_string(std::string_view name);
inline bool is_bf(Formulation f) { return f != Formulation::rf; }

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Architecture {
  Formulation formulation = Formulation::rf;
  std::uint64_t size = 0;
  std::uint64_t horizon = 0;
  std::vector<std::uint64_t> lstm_hidden;
  std::vector<std::uint64_t> dense_hidden;

  bool operator==(const Architecture&) const = default;
};

struct NamedTensor {
  std::string name;
  nn::Matrix<double> value;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  Architecture arch;
  std::uint64_t epochs = 0;
  std::vector<NamedTensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of parameter values in list order.
std::vector<NamedTensor> capture(const std::vector<nn::ParamRef<double>>& params);
/// Writes tensors back; names and shapes must match the parameter list exactly.
void restore(const std::vector<nn::ParamRef<double>>& params, const std::vector<NamedTensor>& tensors);

}  // namespace prngrl
