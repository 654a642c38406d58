#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace prngrl {

/// Ordered sequence of binary symbols. Every stored element is 0 or 1.
class BitSequence {
 public:
  BitSequence() = default;
  explicit BitSequence(std::size_t length, std::uint8_t fill = 0);
  BitSequence(std::initializer_list<int> bits);
  explicit BitSequence(std::vector<std::uint8_t> bits);

  /// Parses a string of '0'/'1' characters.
  static BitSequence from_string(std::string_view text);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  /// Zero-based read.
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  std::uint8_t at(std::size_t i) const;

  std::span<const std::uint8_t> bits() const { return bits_; }
  auto begin() const { return bits_.begin(); }
  auto end() const { return bits_.end(); }

  std::size_t count_ones() const;
  std::string to_string() const;

  /// Last `count` bits (or all of them when shorter).
  BitSequence tail(std::size_t count) const;
  BitSequence complement() const;
  BitSequence reversed() const;

  // In-place builders for owners that accumulate a sequence step by step.
  void push_back(std::uint8_t bit);
  void assign(std::size_t i, std::uint8_t bit);

  friend bool operator==(const BitSequence&, const BitSequence&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Returns `seq` with the bit at 1-based position `n` set to `v`.
/// Throws std::out_of_range unless 1 <= n <= seq.size().
BitSequence set_bit(const BitSequence& seq, std::size_t n, std::uint8_t v);

/// Concatenation. Throws std::invalid_argument for an empty pattern.
BitSequence append_pattern(const BitSequence& seq, const BitSequence& pattern);

/// 1 -> +1, 0 -> -1.
std::vector<double> to_pm1(const BitSequence& seq);

/// N-bit big-endian expansion of `value`.
BitSequence bits_from_index(std::uint64_t value, std::size_t width);
std::uint64_t index_from_bits(const BitSequence& seq);

// --- bit images -----------------------------------------------------------

enum class Smoothing { none, box3 };

struct BitImageSpec {
  std::size_t rows = 40;
  std::size_t cols = 25;
  std::size_t block_px = 10;
  Smoothing smoothing = Smoothing::box3;
};

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Expands each bit into a block_px square (1 white, 0 black), filling the
/// grid row-major from the top-left, then applies the smoothing kernel once.
GrayImage render_image(const BitSequence& seq, const BitImageSpec& spec = {});

/// Binary PGM (P5, maxval 255).
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

// --- bit files -------------------------------------------------------------

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// '0'/'1' characters, no separators, newline-terminated.
void write_bitfile(const BitSequence& seq, const std::filesystem::path& path);

/// Accepts a trailing newline (and CRLF). Any other character raises a
/// ParseError carrying its 1-based line and column.
BitSequence read_bitfile(const std::filesystem::path& path);
BitSequence parse_bits(std::string_view text);

}  // namespace prngrl
