#include "prngrl/bitseq.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

namespace prngrl {

namespace {

std::uint8_t checked_bit(long long v) {
  if (v != 0 && v != 1) throw std::invalid_argument("bit value must be 0 or 1, got " + std::to_string(v));
  return static_cast<std::uint8_t>(v);
}

}  // namespace

BitSequence::BitSequence(std::size_t length, std::uint8_t fill) : bits_(length, checked_bit(fill)) {}

BitSequence::BitSequence(std::initializer_list<int> bits) {
  bits_.reserve(bits.size());
  for (int b : bits) bits_.push_back(checked_bit(b));
}

BitSequence::BitSequence(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) checked_bit(b);
}

BitSequence BitSequence::from_string(std::string_view text) { return parse_bits(text); }

std::uint8_t BitSequence::at(std::size_t i) const {
  if (i >= bits_.size()) throw std::out_of_range("bit index " + std::to_string(i) + " out of range");
  return bits_[i];
}

std::size_t BitSequence::count_ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string BitSequence::to_string() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
  return s;
}

BitSequence BitSequence::tail(std::size_t count) const {
  count = std::min(count, bits_.size());
  return BitSequence(std::vector<std::uint8_t>(bits_.end() - static_cast<std::ptrdiff_t>(count), bits_.end()));
}

BitSequence BitSequence::complement() const {
  std::vector<std::uint8_t> out(bits_.size());
  std::transform(bits_.begin(), bits_.end(), out.begin(), [](std::uint8_t b) { return std::uint8_t(1 - b); });
  return BitSequence(std::move(out));
}

BitSequence BitSequence::reversed() const { return BitSequence(std::vector<std::uint8_t>(bits_.rbegin(), bits_.rend())); }

void BitSequence::push_back(std::uint8_t bit) { bits_.push_back(checked_bit(bit)); }

void BitSequence::assign(std::size_t i, std::uint8_t bit) {
  if (i >= bits_.size()) throw std::out_of_range("bit index " + std::to_string(i) + " out of range");
  bits_[i] = checked_bit(bit);
}

BitSequence set_bit(const BitSequence& seq, std::size_t n, std::uint8_t v) {
  if (n < 1 || n > seq.size()) {
    throw std::out_of_range("position " + std::to_string(n) + " outside 1.." + std::to_string(seq.size()));
  }
  BitSequence out = seq;
  out.assign(n - 1, v);
  return out;
}

BitSequence append_pattern(const BitSequence& seq, const BitSequence& pattern) {
  if (pattern.empty()) throw std::invalid_argument("append_pattern: empty pattern");
  std::vector<std::uint8_t> out(seq.begin(), seq.end());
  out.insert(out.end(), pattern.begin(), pattern.end());
  return BitSequence(std::move(out));
}

std::vector<double> to_pm1(const BitSequence& seq) {
  std::vector<double> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) out[i] = seq[i] ? 1.0 : -1.0;
  return out;
}

BitSequence bits_from_index(std::uint64_t value, std::size_t width) {
  std::vector<std::uint8_t> out(width);
  for (std::size_t i = 0; i < width; ++i) out[width - 1 - i] = static_cast<std::uint8_t>((value >> i) & 1U);
  return BitSequence(std::move(out));
}

std::uint64_t index_from_bits(const BitSequence& seq) {
  std::uint64_t v = 0;
  for (auto b : seq) v = (v << 1) | b;
  return v;
}

GrayImage render_image(const BitSequence& seq, const BitImageSpec& spec) {
  if (spec.block_px < 1) throw DimensionError("block_px must be >= 1");
  if (spec.rows * spec.cols != seq.size()) {
    throw DimensionError("sequence of " + std::to_string(seq.size()) + " bits does not fill a " +
                         std::to_string(spec.rows) + "x" + std::to_string(spec.cols) + " grid");
  }
  GrayImage img;
  img.height = spec.rows * spec.block_px;
  img.width = spec.cols * spec.block_px;
  img.pixels.assign(img.width * img.height, 0);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t bit = (y / spec.block_px) * spec.cols + x / spec.block_px;
      img.pixels[y * img.width + x] = seq[bit] ? 255 : 0;
    }
  }
  if (spec.smoothing == Smoothing::none) return img;

  // 3x3 box filter, clamped borders, rounded to nearest.
  std::vector<std::uint8_t> out(img.pixels.size());
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      int sum = 0;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const auto yy = std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1);
          const auto xx = std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1);
          sum += img.pixels[static_cast<std::size_t>(yy * w + xx)];
        }
      }
      out[static_cast<std::size_t>(y * w + x)] = static_cast<std::uint8_t>((sum + 4) / 9);
    }
  }
  img.pixels = std::move(out);
  return img;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int maxval = 0;
  GrayImage img;
  is >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255) throw std::runtime_error(path.string() + ": not an 8-bit P5 image");
  is.get();
  img.pixels.resize(img.width * img.height);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw std::runtime_error(path.string() + ": truncated pixel data");
  return img;
}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

BitSequence parse_bits(std::string_view text) {
  std::vector<std::uint8_t> bits;
  bits.reserve(text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '0' || c == '1') {
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
      ++column;
    } else if (c == '\n') {
      ++line;
      column = 1;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else {
      throw ParseError(line, column, std::string("unexpected character '") + c + "'");
    }
  }
  return BitSequence(std::move(bits));
}

void write_bitfile(const BitSequence& seq, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << seq.to_string() << '\n';
}

BitSequence read_bitfile(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_bits(text);
}

}  // namespace prngrl
